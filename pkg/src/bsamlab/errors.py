"""Exception types shared across the package."""


class BsamlabError(Exception):
    """Base class for all package errors."""


class ShapeError(BsamlabError):
    """Tensor/parameter dimensions do not match what an operation expects."""


class ConfigError(BsamlabError):
    """Invalid configuration value or combination."""


class RangeError(BsamlabError):
    """A scalar argument is outside its documented range."""


class DegenerateVectorError(BsamlabError):
    """An operation received a (near-)zero vector where a direction is required."""


class ParseError(BsamlabError):
    """Malformed config or data file; message carries line/offset context."""
