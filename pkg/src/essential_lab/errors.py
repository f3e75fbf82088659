"""Exception types shared across the library."""


class EssentialLabError(Exception):
    """Base class for all library errors."""


class DegenerateInput(EssentialLabError):
    """Input matrix does not satisfy the essential-matrix equations."""


class RankDeficient(EssentialLabError):
    """A 5x9 coefficient matrix has numerical rank below 5."""


class EliminationFailed(EssentialLabError):
    """Pivoting broke down while reducing the constraint matrix.

    Callers should re-randomize the nullspace basis and retry.
    """


class EigenNoConvergence(EssentialLabError):
    """The dense eigenvalue iteration did not converge."""


class DegeneratePencil(EssentialLabError):
    """det(s*A + t*B) vanishes identically."""


class ChartSingularity(EssentialLabError):
    """Point lies on (or too close to) the chart boundary u3 = 0."""


class DomainError(EssentialLabError):
    """Argument outside the mathematical domain of a special function."""


class CrossCheckFailed(EssentialLabError):
    """Two independent estimates of the same quantity disagree.

    Carries both estimates and their confidence data in ``args[1]``.
    """


class AssertionFailure(EssentialLabError):
    """A numerical verification check exceeded its tolerance."""
