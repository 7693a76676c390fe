"""Exception hierarchy shared across the toolkit."""


class CrackSegError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(CrackSegError):
    """A parameter is outside its documented range."""


class ShapeError(CrackSegError):
    """Array dimensions of paired inputs do not match."""


class FormatError(CrackSegError):
    """A file does not follow the expected format."""


class CorruptFileError(FormatError):
    """Header and payload of a volume file disagree."""


class GenerationError(CrackSegError):
    """Synthetic data generation could not satisfy its spec."""


class TrainingError(CrackSegError):
    """Training data is unusable (e.g. a class is missing)."""


class ContractError(CrackSegError):
    """A serialized model does not match the runtime configuration."""
