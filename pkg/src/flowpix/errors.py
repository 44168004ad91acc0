"""Exception hierarchy shared by all pipeline stages.

The CLI maps these onto exit codes: ConfigError -> 1, SchemaError and
DataError -> 2, anything else -> 3.
"""


class PipelineError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(PipelineError):
    """Invalid configuration or command usage."""


class SchemaError(PipelineError):
    """A CSV header does not satisfy the active column plan or catalog."""


class DataError(PipelineError):
    """Input data cannot be processed (empty, inconsistent, or corrupt)."""


class TrainingError(PipelineError):
    """Training aborted (e.g. non-finite loss)."""


class UnknownLabelError(DataError):
    """A raw label string has no entry in the alias table."""
