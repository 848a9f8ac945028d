"""Shared exception types."""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ConfigError(ValueError):
    """A configuration value is outside its allowed range."""


class EmptySetError(ValueError):
    """An operation received an empty active-sensor set."""


class EmptySequenceError(ValueError):
    """A time series with zero timesteps was passed where T >= 1 is required."""


class ContractError(RuntimeError):
    """An API contract was violated (wrong call order, non-scalar loss, ...)."""


class CoverageError(ValueError):
    """A sensor has no active data in the training split."""


class GenerationError(RuntimeError):
    """Random generation could not satisfy its distinctness constraints."""


class IngestionError(ValueError):
    """A dataset manifest or record file is malformed."""


class CheckpointError(ValueError):
    """A checkpoint file failed validation on load."""
