"""Shared exception types and the two global numerical tolerances.

Validity checks (norms, hermiticity, projector algebra) use VALIDITY_ATOL.
Agreement between two independent formulas for the same quantity is held
to the tighter CROSS_ATOL.
"""

VALIDITY_ATOL = 1e-10
CROSS_ATOL = 1e-12

# Branches below this weight are dropped from sampling and conditioning.
MIN_BRANCH_PROBABILITY = 1e-14


class DecolabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DecolabError):
    """A value violates a declared invariant or precondition."""


class SpaceMismatchError(DecolabError):
    """Operands live on incompatible tensor spaces."""


class ZeroProbabilityError(DecolabError):
    """A projection or conditioning step has vanishing probability."""
