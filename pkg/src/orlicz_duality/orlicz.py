"""Modulars, gauge (Luxemburg) norms and the Delta-2 test for Young functions.

Random variables live either on a finite probability space
(``FiniteRandomVariable``) or on a countable one given term by term with a
certified tail bound (``SeriesRandomVariable``).  On finite spaces every
variable belongs to both the Orlicz space and its heart, so ``membership``
answers without any series work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import InconclusiveGrid, NonFiniteNorm, TailBoundUnavailable
from .utility import UtilitySpec, young_function

OVERFLOW = 1e300
SERIES_TERM_CAP = 10**7


@dataclass(frozen=True)
class YoungFunction:
    """Even convex function with phi(0) = 0, vectorized over numpy arrays.

    ``log_func`` optionally gives log phi on |x| without overflow; series
    modulars use it to pair tiny probabilities with huge values.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    log_func: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.func(np.abs(xa))
        return float(out) if np.ndim(x) == 0 else out

    def log(self, x) -> np.ndarray:
        xa = np.abs(np.asarray(x, dtype=float))
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if self.log_func is not None:
                return self.log_func(xa)
            return np.log(self.func(xa))


def exponential_young() -> YoungFunction:
    """phi(x) = exp|x| - 1, the Young function of exponential utility."""
    return YoungFunction("exp", lambda x: np.expm1(x), lambda x: x + np.log(-np.expm1(-x)))


def entropic_young() -> YoungFunction:
    """Conjugate of exp|x| - 1: |y| ln|y| - |y| + 1 beyond 1, zero inside."""

    def f(y):
        big = np.maximum(y, 1.0)
        return np.where(y > 1.0, big * np.log(big) - big + 1.0, 0.0)

    return YoungFunction("entropic", f)


def power_young(p: float) -> YoungFunction:
    if p < 1:
        raise ValueError("power Young function needs p >= 1")
    return YoungFunction(f"power:{p:g}", lambda x: x**p)


def utility_young(u: UtilitySpec) -> YoungFunction:
    return YoungFunction(f"utility:{u.family}", young_function(u))


def parse_young(text: str) -> YoungFunction:
    """Parse ``exp`` or ``power:p``."""
    if text == "exp":
        return exponential_young()
    if text == "entropic":
        return entropic_young()
    if text.startswith("power:"):
        return power_young(float(text.split(":", 1)[1]))
    raise ValueError(f"unknown Young function {text!r}; expected 'exp' or 'power:p'")


# --------------------------------------------------------------------------
# random variables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteRandomVariable:
    outcomes: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.outcomes, dtype=float).ravel()
        p = np.asarray(self.probs, dtype=float).ravel()
        if x.shape != p.shape:
            raise ValueError("outcomes and probs must have equal length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1 within 1e-12")
        object.__setattr__(self, "outcomes", x)
        object.__setattr__(self, "probs", p)

    def scaled(self, c: float) -> "FiniteRandomVariable":
        return FiniteRandomVariable(c * self.outcomes, self.probs)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.outcomes[self.probs > 0] == 0))

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteRandomVariable":
        return cls(np.asarray(data["outcomes"], float), np.asarray(data["probs"], float))


class Estimate(NamedTuple):
    value: float
    error_bound: float


@dataclass(frozen=True)
class SeriesRandomVariable:
    """Countably-valued variable ``scale * X`` given term by term.

    ``term(i)`` returns ``(outcome, probability)`` for arrays of indices
    ``i >= 0``; with ``log_probs`` set it returns log-probabilities instead.  ``tail_bound(i, scale)`` bounds the remaining modular mass
    sum_{j >= i} p_j phi(scale * x_j) for the Young function the variable is
    paired with; it returns ``math.inf`` when that sum diverges and ``None``
    when no bound is available at this scaling.
    """

    term: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    tail_bound: Callable[[int, float], float | None]
    scale: float = 1.0
    identically_zero: bool = False
    log_probs: bool = False

    def scaled(self, c: float) -> "SeriesRandomVariable":
        return SeriesRandomVariable(self.term, self.tail_bound, self.scale * c, self.identically_zero, self.log_probs)


RandomVariable = FiniteRandomVariable | SeriesRandomVariable


# --------------------------------------------------------------------------
# modular
# --------------------------------------------------------------------------


def _finite_modular(phi: YoungFunction, x: FiniteRandomVariable) -> float:
    mask = x.probs > 0
    with np.errstate(over="ignore", invalid="ignore"):
        vals = phi(x.outcomes[mask])
        if not np.all(np.isfinite(vals)):
            return math.inf
        total = float(np.dot(x.probs[mask], vals))
    return total if total < OVERFLOW else math.inf


def series_modular(phi: YoungFunction, x: SeriesRandomVariable, rel_tol: float = 1e-12, abs_tol: float = 1e-10) -> Estimate:
    """Sum terms until the certified tail falls below the tolerance."""
    if x.identically_zero or x.scale == 0:
        return Estimate(0.0, 0.0)
    total = 0.0
    start, chunk = 0, 64
    while start < SERIES_TERM_CAP:
        idx = np.arange(start, start + chunk)
        outcomes, probs = x.term(idx)
        with np.errstate(over="ignore", invalid="ignore"):
            if x.log_probs:
                vals = np.exp(np.asarray(probs) + phi.log(x.scale * np.asarray(outcomes)))
            else:
                vals = np.asarray(probs) * phi(x.scale * np.asarray(outcomes))
        if not np.all(np.isfinite(vals)):
            return Estimate(math.inf, 0.0)
        total += float(vals.sum())
        if total > OVERFLOW:
            return Estimate(math.inf, 0.0)
        start += chunk
        tb = x.tail_bound(start, x.scale)
        if tb is None:
            raise TailBoundUnavailable(f"no tail bound at index {start} for scaling {x.scale}")
        if math.isinf(tb):
            return Estimate(math.inf, 0.0)
        if tb < min(abs_tol, max(rel_tol * total, 1e-300)) or (total == 0.0 and tb == 0.0):
            return Estimate(total, tb)
        chunk = min(chunk * 2, 1 << 16)
    tb = x.tail_bound(start, x.scale)
    return Estimate(total, tb if tb is not None else math.inf)


def modular(phi: YoungFunction, x: RandomVariable) -> float:
    """E[phi(X)], +inf when the expectation diverges or overflows."""
    if isinstance(x, SeriesRandomVariable):
        return series_modular(phi, x).value
    return _finite_modular(phi, x)


# --------------------------------------------------------------------------
# gauge norm
# --------------------------------------------------------------------------


def _solve_gauge(rho: Callable[[float], float], start: float) -> float:
    """Smallest lam with rho(1/lam scaling) <= 1, rho decreasing in lam."""
    g = lambda lam: rho(lam) - 1.0
    hi = start
    for _ in range(200):
        if g(hi) <= 0:
            break
        hi *= 2.0
    else:
        raise NonFiniteNorm("modular stays above 1 for every tested scaling")
    lo = hi
    for _ in range(200):
        lo /= 2.0
        if g(lo) > 0:
            break
    else:
        return 0.0
    # log-space bisection until both ends are finite and the bracket is tight
    for _ in range(200):
        if math.isfinite(g(lo)) and hi / lo < 1.5:
            break
        mid = math.sqrt(lo * hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            return hi
    if not math.isfinite(g(lo)):
        return hi
    if g(hi) == 0:
        return hi
    return brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)


def gauge_norm(phi: YoungFunction, x: RandomVariable):
    """inf{lam > 0 : E[phi(X / lam)] <= 1}.

    Finite variables return a float; series variables return an
    ``Estimate`` whose error bound covers the series truncation.
    """
    if isinstance(x, SeriesRandomVariable):
        return _series_gauge(phi, x)
    if x.is_zero:
        return 0.0
    start = float(np.max(np.abs(x.outcomes[x.probs > 0])))
    # work on x / start so tiny or huge outcomes do not under/overflow the bracket
    unit = FiniteRandomVariable(x.outcomes / start, x.probs)
    return start * _solve_gauge(lambda lam: _finite_modular(phi, unit.scaled(1.0 / lam)), 1.0)


def _series_gauge(phi: YoungFunction, x: SeriesRandomVariable) -> Estimate:
    if x.identically_zero or x.scale == 0:
        return Estimate(0.0, 0.0)
    central = _solve_gauge(lambda lam: series_modular(phi, x.scaled(1.0 / lam)).value, 1.0)

    def upper(lam):
        est = series_modular(phi, x.scaled(1.0 / lam))
        return est.value + est.error_bound

    # the upper modular envelope crosses 1 at or beyond the true norm
    outer = _solve_gauge(upper, central)
    return Estimate(central, abs(outer - central))


# --------------------------------------------------------------------------
# Delta-2 and Hoelder
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Delta2Result:
    satisfied: bool
    constant: float | None
    witness: float | None
    grid: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    note: str = ""


def delta2_check(
    phi: YoungFunction,
    x0: float,
    grid: Sequence[float] | None = None,
    threshold: float = 1e6,
    trend_rtol: float = 1e-9,
) -> Delta2Result:
    """Grid semi-decision of phi(2x) <= K phi(x) for x > x0.

    Returns a witness where the ratio exceeds ``threshold``, or the maximal
    ratio when the ratios level off over the last third of the grid.  This
    is evidence on a finite grid, not a proof.
    """
    if grid is None:
        lo = max(x0, 1.0) * 1.01
        grid = np.geomspace(lo, lo * 1e4, 400)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= x0):
        raise ValueError("grid must lie strictly beyond x0")
    if grid.max() / grid.min() < 1e3 - 1e-9:
        raise ValueError("grid must span at least three decades")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        num, den = phi(2.0 * grid), phi(grid)
        ratios = np.where(np.isfinite(num), num / den, np.inf)
    over = np.nonzero(~(ratios <= threshold))[0]
    if len(over):
        return Delta2Result(
            False,
            None,
            float(grid[over[0]]),
            grid,
            ratios,
            "Delta-2 fails: on non-atomic spaces the heart is strictly smaller than the Orlicz space",
        )
    tail = ratios[2 * len(ratios) // 3 :]
    if np.all(np.diff(tail) <= trend_rtol * tail[:-1]):
        return Delta2Result(True, float(ratios.max()), None, grid, ratios, "ratios bounded and nonincreasing at grid end")
    raise InconclusiveGrid(f"ratios still growing at x={grid[-1]:g} (last ratio {ratios[-1]:g})")


def holder_check(x: FiniteRandomVariable, y: FiniteRandomVariable, phi: YoungFunction, psi: YoungFunction) -> bool:
    """E|XY| <= 2 ||X||_phi ||Y||_psi for a conjugate pair (phi, psi)."""
    if not np.array_equal(x.probs, y.probs):
        raise ValueError("variables must live on the same probability vector")
    lhs = float(np.dot(x.probs, np.abs(x.outcomes * y.outcomes)))
    rhs = 2.0 * gauge_norm(phi, x) * gauge_norm(psi, y)
    return lhs <= rhs * (1 + 1e-12) + 1e-300


# --------------------------------------------------------------------------
# membership and modular-versus-norm convergence
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Membership:
    in_orlicz_space: bool
    in_heart: bool
    reason: str


def membership(phi: YoungFunction, x: RandomVariable, scalings: Sequence[float] = (2.0**-10, 2.0**-5, 1.0, 2.0**5, 2.0**10)) -> Membership:
    if isinstance(x, FiniteRandomVariable):
        return Membership(True, True, "finite probability space: bounded variables lie in every Orlicz heart")
    finite = [math.isfinite(modular(phi, x.scaled(c))) for c in scalings]
    return Membership(any(finite), all(finite), f"modular finite at scalings {[c for c, f in zip(scalings, finite) if f]}")


@dataclass(frozen=True)
class ConvergenceReport:
    ks: list[int]
    scalings: list[float]
    modulars: list[list[float]]  # modulars[i][j] = rho(scalings[j] * Y_{ks[i]})
    norms: list[Estimate]
    modular_to_zero: bool
    norm_not_to_zero: bool


def modular_vs_norm_convergence(
    phi: YoungFunction,
    seq: Callable[[int], RandomVariable],
    ks: Sequence[int],
    scalings: Sequence[float] = (0.5,),
    zero_tol: float = 1e-3,
) -> ConvergenceReport:
    ks = list(ks)
    rows, norms = [], []
    for k in ks:
        y = seq(k)
        rows.append([modular(phi, y.scaled(c)) for c in scalings])
        n = gauge_norm(phi, y)
        norms.append(n if isinstance(n, Estimate) else Estimate(n, 0.0))
    mods = np.array(rows, dtype=float)
    modular_to_zero = False
    for j in range(len(scalings)):
        col = mods[:, j]
        if not np.all(np.isfinite(col)):
            continue
        if np.all(col == 0):
            modular_to_zero = True
        elif np.all(np.diff(col) < 0) and col[-1] <= zero_tol * col[0]:
            modular_to_zero = True
    nv = np.array([n.value for n in norms])
    # same relative threshold that decides modular convergence
    norm_not_to_zero = bool(nv[0] > 0 and nv[-1] > zero_tol * nv[0])
    return ConvergenceReport(ks, list(scalings), mods.tolist(), norms, modular_to_zero, norm_not_to_zero)
