"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class OrliczDualityError(Exception):
    """Base class for every error raised by the library."""


class DegenerateUtility(OrliczDualityError):
    """Utility is constant on its effective domain (lower bound equals bliss point)."""


class BracketTooSmall(OrliczDualityError):
    """Numerical conjugation pinned the maximizer to the search bracket boundary."""


class TailBoundUnavailable(OrliczDualityError):
    """A series random variable cannot certify its tail at the requested scaling."""


class NonFiniteNorm(OrliczDualityError):
    """No finite scaling brings the modular below one."""


class InconclusiveGrid(OrliczDualityError):
    """Delta-2 ratios are still growing at the end of the grid."""


class ImproperFunction(OrliczDualityError):
    """Grid function has no finite value."""


class EmptyDomain(OrliczDualityError):
    """Convolution result is identically +inf."""


class UnboundedUtility(OrliczDualityError):
    """Primal utility escapes to the bliss level along a diverging strategy."""


class InfeasibleCore(OrliczDualityError):
    """No admissible claim lies in the algebraic interior of the utility domain."""


class DualDiverges(OrliczDualityError):
    """Dual objective is infinite for every admissible density."""


class NotBlissFree(OrliczDualityError):
    """Complete market has infinite dual objective for every multiplier."""


class ArbitrageError(OrliczDualityError):
    """Operation requires an arbitrage-free market."""


class InteriorOptimum(OrliczDualityError):
    """Levy model drift violates the corner-solution assumption.

    ``root`` holds the interior root of the first-order condition in the
    position variable (units of the asset), ``theta`` the implied optimal
    buy-and-hold position.
    """

    def __init__(self, message: str, root: float, theta: float):
        super().__init__(message)
        self.root = root
        self.theta = theta


class QuadratureFailure(OrliczDualityError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message: str, interval: tuple[float, float], estimate: float, error: float):
        super().__init__(f"{message} on [{interval[0]}, {interval[1]}]: estimate={estimate!r}, error={error!r}")
        self.interval = interval
        self.estimate = estimate
        self.error = error


class IndexOutOfTruncation(OrliczDualityError):
    """Shock index exceeds the truncation level of the gap market."""
