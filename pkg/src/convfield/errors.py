"""Exception types shared across the package."""


class DataFormatError(ValueError):
    """Raised when a dataset or model file cannot be parsed."""


class CompatibilityError(ValueError):
    """Raised when a model and a dataset disagree on feature width or alphabet."""


class DegenerateLabelingError(ValueError):
    """Raised when no label has both positive and negative positions."""


class NumericalError(ArithmeticError):
    """Raised when a computation produced non-finite intermediate values."""
