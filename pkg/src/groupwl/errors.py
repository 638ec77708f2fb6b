"""Exception types shared across the package."""


class GroupWLError(Exception):
    """Base class for all package errors."""


class CompositeModulusError(GroupWLError):
    """Operation requires a prime modulus."""


class ShapeMismatchError(GroupWLError):
    """Matrix or tuple shapes are incompatible."""


class CapExceededError(GroupWLError):
    """A configured enumeration/closure cap was exceeded.

    This is a signal, not necessarily a bug: callers such as the
    average-case pseudo-isometry driver catch it to report a generic
    failure instead of grinding through an infeasible enumeration.
    """


class NotNormalError(GroupWLError):
    """Subgroup is not normal in its parent."""


class NotNilpotentError(GroupWLError):
    """Group is not nilpotent."""


class NotElementaryAbelianError(GroupWLError):
    """Quotient is not elementary abelian."""


class NonUnitriangularError(GroupWLError):
    """Matrix generators are not upper unitriangular."""


class NotAlternatingError(GroupWLError):
    """Bilinear map is not alternating."""


class MixedPrimesError(GroupWLError):
    """Layers live over different primes."""


class TrivialLayerError(GroupWLError):
    """A required filter layer is trivial."""


class NotBetweenLayersError(GroupWLError):
    """Refinement subgroup does not sit strictly between a filter term and its boundary."""


class BlockMismatchError(GroupWLError):
    """Matrix is not block-upper-unitriangular for the given block structure."""


class FilterRepairError(GroupWLError):
    """Filter axiom repair did not converge."""
