"""Exception vocabulary shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ParameterError(ValueError):
    """A scalar argument lies outside its legal range."""


class ContractError(ValueError):
    """An operation was invoked in a way its contract forbids."""


class ProtocolError(RuntimeError):
    """Memory read/write sequencing rules were violated."""


class ModeError(RuntimeError):
    """An addressing-mode-specific operation was called in the wrong mode."""


class DeterminismError(RuntimeError):
    """A closure that must be deterministic returned differing values."""


class ConfigError(ValueError):
    """Invalid training or benchmark configuration."""


class DataError(ValueError):
    """Input data does not satisfy an operation's preconditions."""


class CheckpointError(ValueError):
    """Checkpoint bytes are malformed or fail their integrity check."""


class NanLossError(RuntimeError):
    """Training produced a non-finite loss and was aborted."""
