"""Training and inference around ResNet18: image transform, SGD loop with
best-validation checkpointing, prediction, and checkpoint persistence.

The training protocol: SGD with momentum on sigmoid cross-entropy (1 logit,
binary) or softmax cross-entropy (12 logits, attack types); after every
epoch the model is scored on the validation split and the weights with the
best validation accuracy so far are retained (ties keep the earlier epoch).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .catalog import NUM_CLASSES
from .errors import ConfigError, DataError, TrainingError
from .pixels import EncodedImage
from .resnet import ResNet18
from .util import read_json, subseed, write_json_atomic

TASKS = ("binary", "multiclass")

#: Binary task classes: index 0 = normal, 1 = attack (the positive class).
BINARY_CLASS_NAMES = ("Normal", "Attack")


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters for one training/inference run."""

    task: str = "multiclass"
    learning_rate: float = 1e-4
    momentum: float = 0.9
    epochs: Optional[int] = None  # defaults: 10 binary, 50 multiclass
    batch_size: int = 32
    seed: int = 0
    input_size: tuple[int, int] = (224, 224)
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if self.resolved_epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @property
    def num_outputs(self) -> int:
        return 1 if self.task == "binary" else NUM_CLASSES

    @property
    def resolved_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 10 if self.task == "binary" else 50

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "epochs": self.resolved_epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "input_size": list(self.input_size),
            "deterministic": self.deterministic,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        return cls(
            task=raw["task"],
            learning_rate=float(raw["learning_rate"]),
            momentum=float(raw["momentum"]),
            epochs=int(raw["epochs"]),
            batch_size=int(raw["batch_size"]),
            seed=int(raw["seed"]),
            input_size=tuple(raw.get("input_size", (224, 224))),
            deterministic=bool(raw.get("deterministic", True)),
        )


def set_determinism(enabled: bool = True) -> None:
    """Ask the backend for reproducible kernels (CPU ops here all comply)."""
    torch.use_deterministic_algorithms(enabled)


def transform_image(
    image: EncodedImage | np.ndarray, size: tuple[int, int] = (224, 224)
) -> np.ndarray:
    """Resize one HxWx3 uint8 image bilinearly and scale to [0, 1] floats."""
    pixels = image.pixels if isinstance(image, EncodedImage) else image
    return transform_batch(pixels[np.newaxis], size)[0].permute(1, 2, 0).numpy()


def transform_batch(
    pixels: np.ndarray, size: tuple[int, int] = (224, 224)
) -> torch.Tensor:
    """uint8 (N, H, W, 3) -> float32 (N, 3, size, size) tensor in [0, 1].

    The resampling itself runs in float64 so the result is the correctly
    rounded bilinear value; only the final tensor is narrowed to float32.
    """
    arr = np.asarray(pixels)
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise DataError(f"expected (N, H, W, 3) pixel batch, got {arr.shape}")
    batch = torch.from_numpy(np.ascontiguousarray(arr)).permute(0, 3, 1, 2).double()
    if batch.shape[-2:] != torch.Size(size):
        batch = F.interpolate(batch, size=size, mode="bilinear", align_corners=False)
    return (batch / 255.0).float()


@dataclass
class ImageSet:
    """An in-memory split: raw uint8 images plus integer targets.

    Targets are class ids 0..11 for the multiclass task and 0/1
    (normal/attack) for the binary task.
    """

    pixels: np.ndarray  # uint8 (N, H, W, 3)
    targets: np.ndarray  # int64 (N,)

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if len(self.pixels) != len(self.targets):
            raise DataError("pixels and targets must have equal length")

    def __len__(self) -> int:
        return len(self.targets)


@dataclass
class EpochStats:
    epoch: int  # 1-based
    train_loss: float
    train_accuracy: float
    val_accuracy: float


@dataclass
class Checkpoint:
    """Best-so-far weights plus the metadata needed to reuse them."""

    state: dict  # torch state_dict (opaque blob)
    epoch: int
    val_accuracy: float
    config: ModelConfig
    stats_ref: str = ""
    fingerprint: str = ""
    history: list[EpochStats] = field(default_factory=list)

    def save(self, stem: Path | str) -> tuple[Path, Path]:
        """Persist as <stem>.pt (weights) + <stem>.json (readable sidecar)."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        weights = stem.with_suffix(".pt")
        sidecar = stem.with_suffix(".json")
        torch.save(self.state, weights)
        write_json_atomic(
            sidecar,
            {
                "version": 1,
                "epoch": self.epoch,
                "val_accuracy": self.val_accuracy,
                "config": self.config.to_dict(),
                "stats_ref": self.stats_ref,
                "fingerprint": self.fingerprint,
                "history": [
                    {
                        "epoch": h.epoch,
                        "train_loss": h.train_loss,
                        "train_accuracy": h.train_accuracy,
                        "val_accuracy": h.val_accuracy,
                    }
                    for h in self.history
                ],
            },
        )
        return weights, sidecar

    @classmethod
    def load(cls, stem: Path | str) -> "Checkpoint":
        stem = Path(stem)
        meta = read_json(stem.with_suffix(".json"))
        state = torch.load(stem.with_suffix(".pt"), map_location="cpu", weights_only=True)
        return cls(
            state=state,
            epoch=int(meta["epoch"]),
            val_accuracy=float(meta["val_accuracy"]),
            config=ModelConfig.from_dict(meta["config"]),
            stats_ref=meta.get("stats_ref", ""),
            fingerprint=meta.get("fingerprint", ""),
            history=[
                EpochStats(
                    epoch=int(h["epoch"]),
                    train_loss=float(h["train_loss"]),
                    train_accuracy=float(h["train_accuracy"]),
                    val_accuracy=float(h["val_accuracy"]),
                )
                for h in meta.get("history", [])
            ],
        )


def build_model(config: ModelConfig) -> ResNet18:
    """Instantiate a seeded ResNet18 with the task's head."""
    if config.num_outputs not in (1, NUM_CLASSES):
        raise ConfigError(f"unsupported head size: {config.num_outputs}")
    torch.manual_seed(subseed(config.seed, "init"))
    return ResNet18(num_outputs=config.num_outputs)


def _loss_and_correct(
    logits: torch.Tensor, targets: torch.Tensor, task: str
) -> tuple[torch.Tensor, int]:
    if task == "binary":
        loss = F.binary_cross_entropy_with_logits(logits[:, 0], targets.float())
        predicted = (torch.sigmoid(logits[:, 0]) >= 0.5).long()
    else:
        loss = F.cross_entropy(logits, targets)
        predicted = logits.argmax(dim=1)
    return loss, int((predicted == targets).sum().item())


def evaluate(model: ResNet18, data: ImageSet, config: ModelConfig) -> float:
    """Accuracy of the model on one split (eval mode, no gradients)."""
    if len(data) == 0:
        raise DataError("cannot evaluate an empty split")
    model.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(data), config.batch_size):
            batch = transform_batch(data.pixels[start : start + config.batch_size],
                                    config.input_size)
            targets = torch.from_numpy(data.targets[start : start + config.batch_size])
            logits = model(batch)
            _, n_correct = _loss_and_correct(logits, targets, config.task)
            correct += n_correct
    return correct / len(data)


def best_epoch(val_accuracies: Sequence[float]) -> int:
    """1-based index of the highest validation accuracy; ties take the earliest."""
    if not val_accuracies:
        raise DataError("empty validation history")
    best = max(val_accuracies)
    return next(i + 1 for i, v in enumerate(val_accuracies) if v == best)


def train(
    model: ResNet18,
    train_set: ImageSet,
    val_set: ImageSet,
    config: ModelConfig,
    stats_ref: str = "",
    fingerprint: str = "",
    log=None,
) -> Checkpoint:
    """Run the full SGD schedule and return the best-validation checkpoint."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise DataError("train and validation splits must both be non-empty")
    if config.deterministic:
        set_determinism(True)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=config.learning_rate, momentum=config.momentum
    )
    history: list[EpochStats] = []
    best_state: Optional[dict] = None
    best_val = -1.0
    best_at = 0
    n = len(train_set)
    for epoch in range(1, config.resolved_epochs + 1):
        rng = np.random.default_rng(subseed(config.seed, "shuffle", str(epoch)))
        order = rng.permutation(n)
        model.train()
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = transform_batch(train_set.pixels[idx], config.input_size)
            targets = torch.from_numpy(train_set.targets[idx])
            optimizer.zero_grad()
            logits = model(batch)
            loss, n_correct = _loss_and_correct(logits, targets, config.task)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} (batch offset {start}); "
                    "lower the learning rate or inspect the inputs"
                )
            loss.backward()
            optimizer.step()
            loss_sum += loss.item() * len(idx)
            correct += n_correct
        val_accuracy = evaluate(model, val_set, config)
        stats = EpochStats(
            epoch=epoch,
            train_loss=loss_sum / n,
            train_accuracy=correct / n,
            val_accuracy=val_accuracy,
        )
        history.append(stats)
        if log is not None:
            log(
                f"epoch {epoch}/{config.resolved_epochs}: "
                f"loss {stats.train_loss:.4f} acc {stats.train_accuracy:.4f} "
                f"val {val_accuracy:.4f}"
            )
        if val_accuracy > best_val:
            best_val = val_accuracy
            best_at = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    return Checkpoint(
        state=best_state,
        epoch=best_at,
        val_accuracy=best_val,
        config=config,
        stats_ref=stats_ref,
        fingerprint=fingerprint,
        history=history,
    )


def decide_multiclass(logits: np.ndarray) -> np.ndarray:
    """Argmax per row; exact ties resolve to the lowest class id."""
    return np.argmax(logits, axis=1).astype(np.int64)


def decide_binary(scores: np.ndarray) -> np.ndarray:
    """1 (attack) where the sigmoid score reaches 0.5, else 0 (normal)."""
    return (scores >= 0.5).astype(np.int64)


def predict(
    checkpoint: Checkpoint,
    pixels: np.ndarray,
    model: Optional[ResNet18] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Predict classes for a uint8 (N, H, W, 3) batch.

    Returns (predicted ids, scores): for the multiclass task, ids 0..11 and
    softmax probabilities (N, 12); for binary, ids 1=attack/0=normal and
    sigmoid scores (N,). Batch order is preserved.
    """
    config = checkpoint.config
    if model is None:
        model = ResNet18(num_outputs=config.num_outputs)
        model.load_state_dict(checkpoint.state)
    model.eval()
    all_logits = []
    with torch.no_grad():
        for start in range(0, len(pixels), config.batch_size):
            batch = transform_batch(pixels[start : start + config.batch_size],
                                    config.input_size)
            all_logits.append(model(batch))
    logits = torch.cat(all_logits).numpy() if all_logits else np.zeros((0, config.num_outputs))
    if config.task == "binary":
        scores = 1.0 / (1.0 + np.exp(-logits[:, 0]))
        return decide_binary(scores), scores
    exp = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs = exp / exp.sum(axis=1, keepdims=True)
    return decide_multiclass(logits), probs
