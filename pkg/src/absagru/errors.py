"""Exception types shared across the package."""


class AbsaGruError(Exception):
    """Base class for all package errors."""


class ShapeError(AbsaGruError):
    """Operands have incompatible shapes."""


class ContractError(AbsaGruError):
    """A caller violated a documented precondition."""


class ConfigError(AbsaGruError):
    """A configuration value is out of its documented range."""


class ParseError(AbsaGruError):
    """Input document could not be parsed."""


class ValidationError(AbsaGruError):
    """Parsed input violates a consistency rule (offsets, spans, ...)."""


class FormatError(AbsaGruError):
    """A serialized file does not match its declared format."""


class TrainingError(AbsaGruError):
    """Training aborted (non-finite loss or similar)."""
