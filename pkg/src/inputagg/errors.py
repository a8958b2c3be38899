"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand dimensions do not chain."""


class SymmetryError(ValueError):
    """A matrix required to be symmetric is not."""


class DomainError(ValueError):
    """Input lies outside the domain of a matrix function (e.g. not SPD)."""


class GroupingError(ValueError):
    """Output-vector count is not divisible by the group count."""


class DegenerateInputError(ValueError):
    """Input carries no usable information (e.g. an all-zero feature set)."""


class NumericalError(ArithmeticError):
    """An iterative kernel failed to converge."""


class TrainingError(RuntimeError):
    """Training diverged or received non-finite gradients."""
