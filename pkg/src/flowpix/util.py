"""Small shared helpers: seed derivation, config fingerprints, atomic writes."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Mapping


def subseed(root_seed: int, *names: str) -> int:
    """Derive a named child seed from a root seed.

    Every random decision in the pipeline (split sampling, weight init,
    batch shuffling, ...) draws from its own named stream so that adding or
    reordering one consumer cannot perturb the others. Stable across
    processes and platforms (unlike ``hash()``).
    """
    h = hashlib.sha256(str(int(root_seed)).encode("ascii"))
    for name in names:
        h.update(b"/")
        h.update(name.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little") & 0x7FFFFFFFFFFFFFFF


def canonical_json(obj: Any) -> str:
    """JSON with sorted keys and no whitespace churn, for hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def fingerprint(obj: Any) -> str:
    """Short stable digest of a JSON-serializable object (12 hex chars)."""
    return hashlib.sha256(canonical_json(obj).encode("ascii")).hexdigest()[:12]


def write_text_atomic(path: Path | str, text: str) -> None:
    """Write text via a temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def write_json_atomic(path: Path | str, obj: Mapping[str, Any]) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: Path | str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
