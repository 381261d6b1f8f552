"""Exception types raised across the package."""


class StructureError(ValueError):
    """Tensor-network shapes or leg layouts do not fit together."""


class SizeError(ValueError):
    """A dense expansion would exceed the configured element cap."""


class DomainError(ValueError):
    """A complex argument lies outside the region where a transform is defined."""


class DecompositionError(ValueError):
    """A matrix factorization failed.

    Attributes
    ----------
    pivot : int or None
        Index of the pivot at which the factorization broke down.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot
