"""Exception taxonomy. The CLI maps these onto categorized exit codes."""


class UpresError(Exception):
    """Base class for all package-specific errors."""


class DataError(UpresError, ValueError):
    """Malformed or inconsistent series data (CSV shape, spacing, finiteness)."""


class ConfigError(UpresError, ValueError):
    """Invalid run configuration: unknown keys, bad values, schema violations."""


class DegenerateInputError(UpresError, ValueError):
    """Statistically degenerate input, e.g. zero-variance vector passed to pcc."""


class ReferenceAuditError(UpresError, RuntimeError):
    """A held-out reference window was touched inside a guarded loss path."""


class CheckpointError(UpresError, RuntimeError):
    """Missing, unreadable, or incompatible checkpoint file."""


class NanLossError(UpresError, RuntimeError):
    """Training aborted on a non-finite loss. Carries the last good checkpoint."""

    def __init__(self, message: str, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


class KernelNotPositiveDefiniteError(UpresError, RuntimeError):
    """GP kernel matrix stayed indefinite after the whole jitter ladder."""

    def __init__(self, message: str, jitter_tried=()):
        super().__init__(message)
        self.jitter_tried = tuple(jitter_tried)
