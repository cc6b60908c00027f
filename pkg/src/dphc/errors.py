"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside the domain an operation accepts."""


class ShapeError(ValueError):
    """Inputs disagree on size or dimension."""


class InvalidVertexError(ParameterError):
    """A vertex id is negative or not below the vertex count."""


class SizeLimitError(ParameterError):
    """The request exceeds an exhaustive-enumeration ceiling."""


class GraphFormatError(ValueError):
    """A graph or tree file is malformed."""


class BottomError(RuntimeError):
    """Every private spectral-gap gate refused, so no clustering is released."""
