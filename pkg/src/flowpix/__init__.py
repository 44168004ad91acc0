"""flowpix: DoS/DDoS detection from flow-feature CSVs via image encoding.

The pipeline cleans CICFlowMeter-style CSV exports down to 60 numeric flow
features, min/max-scales each feature to 8-bit pixels, packs 180-row
same-class chunks into 60x60x3 images, trains a ResNet18 on them (binary
attack detection or 12-class attack-type recognition), and reports
confusion-matrix metrics.
"""

from .catalog import (
    CLASS_LABELS,
    ClassLabel,
    ColumnPlan,
    FeatureCatalog,
    FeatureSpec,
    LabelMapper,
    map_label,
    resolve_columns,
)
from .errors import (
    ConfigError,
    DataError,
    PipelineError,
    SchemaError,
    TrainingError,
    UnknownLabelError,
)
from .ingest import FlowRecord, IngestStats, ingest_file
from .metrics import (
    ConfusionMatrix,
    EvalReport,
    accuracy,
    confusion,
    precision_recall_f1,
    render_report,
)
from .model import (
    Checkpoint,
    ImageSet,
    ModelConfig,
    build_model,
    predict,
    train,
    transform_image,
)
from .pipeline import PipelineConfig, cmd_encode, cmd_eval, cmd_predict, cmd_train
from .pixels import (
    DatasetManifest,
    EncodedImage,
    NormStats,
    encode_chunks,
    fit_stats,
    normalize,
    read_image,
    split_dataset,
    write_image,
)
from .synth import ClassSpec, FeatureModel, SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "CLASS_LABELS",
    "Checkpoint",
    "ClassLabel",
    "ClassSpec",
    "ColumnPlan",
    "ConfigError",
    "ConfusionMatrix",
    "DataError",
    "DatasetManifest",
    "EncodedImage",
    "EvalReport",
    "FeatureCatalog",
    "FeatureModel",
    "FeatureSpec",
    "FlowRecord",
    "ImageSet",
    "IngestStats",
    "LabelMapper",
    "ModelConfig",
    "NormStats",
    "PipelineConfig",
    "PipelineError",
    "SchemaError",
    "SynthSpec",
    "TrainingError",
    "UnknownLabelError",
    "accuracy",
    "build_model",
    "cmd_encode",
    "cmd_eval",
    "cmd_predict",
    "cmd_train",
    "confusion",
    "encode_chunks",
    "fit_stats",
    "generate",
    "ingest_file",
    "map_label",
    "normalize",
    "precision_recall_f1",
    "predict",
    "read_image",
    "render_report",
    "resolve_columns",
    "split_dataset",
    "train",
    "transform_image",
    "write_image",
]
