"""Utility functions, their conjugates and the induced Young functions.

A utility is a proper, concave, nondecreasing, upper semicontinuous map with
values in [-inf, inf).  Each named family has closed-form expressions for the
utility, its derivatives and the convex conjugate

    V(y) = sup_x { U(x) - x y },

which is minus the concave conjugate of U.  Evaluation works on scalars and
numpy arrays alike and returns -inf (for U) or +inf (for V) outside the
effective domain.

Normalization is explicit: ``normalize`` shifts U by a constant so that
U(0) = 0, and V moves by the same constant.  Raw and normalized specs are
both valid inputs everywhere; only the Young functions are always built from
the normalized utility.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np
from scipy.optimize import brentq

from .errors import BracketTooSmall, DegenerateUtility

ArrayLike = Any


class CaseTag(str, enum.Enum):
    """Left-tail taxonomy: linear-finite, superlinear-finite, infinite."""

    L_F = "L_F"
    SL_F = "SL_F"
    SL_INF = "SL_INF"


def _arr(x: ArrayLike) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _out(values: np.ndarray, like: ArrayLike):
    if np.ndim(like) == 0:
        return float(values)
    return values


# --------------------------------------------------------------------------
# closed-form families (raw, un-normalized)
# --------------------------------------------------------------------------


class _Family:
    x_lower = -math.inf
    x_bliss = math.inf
    kinked = False

    def u(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def du(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d2u(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def v(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dv(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d2v(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def case(self) -> CaseTag:
        raise NotImplementedError


class _Exponential(_Family):
    def __init__(self, rate: float = 1.0):
        if not rate > 0:
            raise ValueError("exponential rate must be positive")
        self.rate = float(rate)

    def u(self, x):
        return -np.exp(-self.rate * x)

    def du(self, x):
        return self.rate * np.exp(-self.rate * x)

    def d2u(self, x):
        return -self.rate**2 * np.exp(-self.rate * x)

    def v(self, y):
        r = self.rate
        out = np.full(y.shape, np.inf)
        pos = y > 0
        z = y[pos] / r
        out[pos] = z * (np.log(z) - 1.0)
        out[y == 0] = 0.0
        return out

    def dv(self, y):
        with np.errstate(divide="ignore"):
            return np.where(y > 0, np.log(np.maximum(y, 0) / self.rate) / self.rate, -np.inf)

    def d2v(self, y):
        with np.errstate(divide="ignore"):
            return np.where(y > 0, 1.0 / (self.rate * np.maximum(y, 0)), np.inf)

    def case(self):
        return CaseTag.SL_F


class _Log(_Family):
    def __init__(self, shift: float = 1.0):
        if not shift > 0:
            raise ValueError("log shift must be positive so that 0 is interior")
        self.shift = float(shift)
        self.x_lower = -self.shift

    def u(self, x):
        w = x + self.shift
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), -np.inf)

    def du(self, x):
        w = x + self.shift
        with np.errstate(divide="ignore"):
            return np.where(w > 0, 1.0 / np.where(w > 0, w, 1.0), np.inf)

    def d2u(self, x):
        w = x + self.shift
        return np.where(w > 0, -1.0 / np.where(w > 0, w, 1.0) ** 2, -np.inf)

    def v(self, y):
        out = np.full(y.shape, np.inf)
        pos = y > 0
        out[pos] = -np.log(y[pos]) - 1.0 + self.shift * y[pos]
        return out

    def dv(self, y):
        with np.errstate(divide="ignore"):
            return np.where(y > 0, -1.0 / np.where(y > 0, y, 1.0) + self.shift, -np.inf)

    def d2v(self, y):
        return np.where(y > 0, 1.0 / np.where(y > 0, y, 1.0) ** 2, np.inf)

    def case(self):
        return CaseTag.SL_INF


class _Power(_Family):
    """U(x) = (x + s)^p / p with p < 1, p != 0."""

    def __init__(self, exponent: float, shift: float = 1.0):
        p = float(exponent)
        if not (p < 1 and p != 0):
            raise ValueError("power exponent must satisfy p < 1, p != 0")
        if not shift > 0:
            raise ValueError("power shift must be positive")
        self.p = p
        self.shift = float(shift)
        self.q = p / (p - 1.0)
        self.x_lower = -self.shift

    def u(self, x):
        w = x + self.shift
        p = self.p
        inside = w > 0 if p < 0 else w >= 0
        safe = np.where(w > 0, w, 1.0)
        vals = safe**p / p
        if p > 0:
            vals = np.where(w == 0, 0.0, vals)
        return np.where(inside, vals, -np.inf)

    def du(self, x):
        w = x + self.shift
        return np.where(w > 0, np.where(w > 0, w, 1.0) ** (self.p - 1.0), np.inf)

    def d2u(self, x):
        w = x + self.shift
        return np.where(w > 0, (self.p - 1.0) * np.where(w > 0, w, 1.0) ** (self.p - 2.0), -np.inf)

    def v(self, y):
        q = self.q
        out = np.full(y.shape, np.inf)
        pos = y > 0
        out[pos] = -y[pos] ** q / q + self.shift * y[pos]
        if self.p < 0:
            out[y == 0] = 0.0
        return out

    def dv(self, y):
        return np.where(y > 0, -np.where(y > 0, y, 1.0) ** (self.q - 1.0) + self.shift, -np.inf)

    def d2v(self, y):
        return np.where(y > 0, (1.0 - self.q) * np.where(y > 0, y, 1.0) ** (self.q - 2.0), np.inf)

    def case(self):
        return CaseTag.SL_INF


class _TruncatedQuadratic(_Family):
    """U(x) = -(b - x)^2 / 2 below the bliss point b, constant 0 above."""

    def __init__(self, bliss: float = 1.0):
        if not bliss > 0:
            raise ValueError("bliss point must be positive")
        self.b = float(bliss)
        self.x_bliss = self.b

    def u(self, x):
        d = np.maximum(self.b - x, 0.0)
        return -0.5 * d * d

    def du(self, x):
        return np.maximum(self.b - x, 0.0)

    def d2u(self, x):
        return np.where(x < self.b, -1.0, 0.0)

    def v(self, y):
        return np.where(y >= 0, 0.5 * y * y - self.b * y, np.inf)

    def dv(self, y):
        return np.where(y >= 0, y - self.b, -np.inf)

    def d2v(self, y):
        return np.ones_like(y)

    def case(self):
        return CaseTag.SL_F


class _PiecewiseLinear(_Family):
    """Concave piecewise linear utility with U(0) = 0.

    ``slopes`` are strictly decreasing and nonnegative, ``kinks`` strictly
    increasing with len(slopes) == len(kinks) + 1.
    """

    kinked = True

    def __init__(self, slopes, kinks=()):
        s = np.asarray(slopes, dtype=float)
        k = np.asarray(kinks, dtype=float)
        if s.ndim != 1 or k.ndim != 1 or len(s) != len(k) + 1:
            raise ValueError("need len(slopes) == len(kinks) + 1")
        if np.any(np.diff(s) >= 0) or s[-1] < 0 or s[0] <= 0:
            raise ValueError("slopes must be positive first, strictly decreasing, nonnegative")
        if np.any(np.diff(k) <= 0):
            raise ValueError("kinks must be strictly increasing")
        self.slopes = s
        self.kinks = k
        # U at each kink, integrating slope from 0
        self._u_kinks = np.array([self._integral(t) for t in k])
        if s[-1] == 0:
            self.x_bliss = float(k[-1])

    def _slope_right(self, x):
        idx = np.searchsorted(self.kinks, x, side="right")
        return self.slopes[idx]

    def _integral(self, x: float) -> float:
        # integral of the right-continuous slope function from 0 to x
        pts = np.concatenate(([-np.inf], self.kinks, [np.inf]))
        total = 0.0
        lo, hi = (0.0, x) if x >= 0 else (x, 0.0)
        for i, s in enumerate(self.slopes):
            a, b = max(lo, pts[i]), min(hi, pts[i + 1])
            if b > a:
                total += s * (b - a)
        return total if x >= 0 else -total

    def u(self, x):
        flat = np.ravel(x)
        vals = np.array([self._integral(float(t)) for t in flat])
        return vals.reshape(np.shape(x))

    def du(self, x):
        return self._slope_right(x)

    def d2u(self, x):
        return np.zeros_like(x)

    def v(self, y):
        s0, sl = self.slopes[0], self.slopes[-1]
        out = np.full(y.shape, np.inf)
        inside = (y >= sl) & (y <= s0)
        if len(self.kinks) == 0:
            out[inside] = 0.0
            return out
        yy = y[inside][:, None]
        out[inside] = np.max(self._u_kinks[None, :] - self.kinks[None, :] * yy, axis=1)
        return out

    def dv(self, y):
        # a subgradient: minus the maximizing kink
        if len(self.kinks) == 0:
            return np.zeros_like(y)
        yy = np.atleast_1d(y)[:, None]
        idx = np.argmax(self._u_kinks[None, :] - self.kinks[None, :] * yy, axis=1)
        return (-self.kinks[idx]).reshape(np.shape(y))

    def d2v(self, y):
        return np.zeros_like(y)

    def case(self):
        return CaseTag.L_F


class _Custom(_Family):
    def __init__(self, u, du, x_lower=-math.inf, bracket=None, plateau_grid=None):
        self._u = u
        self._du = du
        self.x_lower = float(x_lower)
        lo = self.x_lower + 1e-9 if math.isfinite(self.x_lower) else -1e6
        self.bracket = tuple(bracket) if bracket is not None else (lo, 1e6)
        self.x_bliss = self._detect_bliss(plateau_grid)

    def _detect_bliss(self, grid) -> float:
        if grid is None:
            grid = np.concatenate((np.linspace(0.0, 10.0, 1001)[1:], np.geomspace(10.0, 1e6, 2000)[1:]))
        vals = np.array([self._value(float(t)) for t in grid])
        slope_far = self._slope(float(grid[-1]))
        if slope_far > 0:
            return math.inf
        plateau = vals[-1]
        slopes = np.array([self._slope(float(t)) for t in grid])
        hit = np.nonzero((np.abs(vals - plateau) < 1e-12) & (slopes == 0))[0]
        return float(grid[hit[0]]) if len(hit) else math.inf

    def u(self, x):
        flat = np.ravel(x)
        vals = np.array([self._value(float(t)) if t >= self.x_lower else -np.inf for t in flat])
        return vals.reshape(np.shape(x))

    def du(self, x):
        flat = np.ravel(x)
        vals = np.array([self._slope(float(t)) if t >= self.x_lower else np.inf for t in flat])
        return vals.reshape(np.shape(x))

    def d2u(self, x, h=1e-5):
        x = np.asarray(x, dtype=float)
        central = (self.du(x + h) - self.du(x - h)) / (2 * h)
        # one-sided near the lower end of the domain
        forward = (self.du(x + h) - self.du(x)) / h
        return np.where(x - h < self.x_lower, forward, central)

    def _value(self, x: float) -> float:
        try:
            return float(self._u(x))
        except OverflowError:
            return -math.inf

    def _slope(self, x: float) -> float:
        try:
            return float(self._du(x))
        except OverflowError:
            return math.inf if x < 0 else 0.0

    def maximizer(self, y: float) -> float:
        """argmax_x {U(x) - x y} by solving U'(x) = y on an expanding bracket.

        The search grows outward from [-1, 1] up to the configured bracket and
        then tenfold past it; a root still outside raises BracketTooSmall.
        """
        b_lo, b_hi = self.bracket
        lo, hi = max(-1.0, b_lo), min(1.0, b_hi)
        if math.isfinite(self.x_lower) and self._slope(b_lo) <= y:
            return self.x_lower
        for _ in range(40):
            f_lo, f_hi = self._slope(lo) - y, self._slope(hi) - y
            if f_lo >= 0 >= f_hi:
                if f_lo == 0:
                    return lo
                if f_hi == 0:
                    return hi
                return brentq(lambda t: self._slope(t) - y, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
            if f_hi > 0:
                hi = hi * 10.0 if hi < b_hi else hi * 10.0
                if hi > b_hi * 1e6:
                    break
            if f_lo < 0:
                if math.isfinite(self.x_lower):
                    lo = self.x_lower + (lo - self.x_lower) / 10.0
                else:
                    lo *= 10.0
                    if lo < b_lo * 1e6:
                        break
        raise BracketTooSmall(f"maximizer of U(x) - {y} x not bracketed in [{lo}, {hi}]")

    def v(self, y):
        flat = np.ravel(y)
        out = np.empty(flat.shape)
        for i, t in enumerate(flat):
            if t < 0:
                out[i] = np.inf
                continue
            if t == 0:
                if math.isfinite(self.x_bliss):
                    out[i] = self._value(self.x_bliss)
                    continue
                raise BracketTooSmall("V(0) needs a bliss point; utility is strictly increasing")
            x = self.maximizer(float(t))
            out[i] = self._value(x) - x * t
        return out.reshape(np.shape(y))

    def dv(self, y):
        flat = np.ravel(y)
        return np.array([-self.maximizer(float(t)) for t in flat]).reshape(np.shape(y))

    def d2v(self, y):
        flat = np.ravel(y)
        out = np.empty(flat.shape)
        for i, t in enumerate(flat):
            x = self.maximizer(float(t))
            if x == self.x_lower:
                # V is affine beyond U'(x_lower)
                out[i] = 0.0
                continue
            curv = float(self.d2u(np.array(x)))
            out[i] = -1.0 / curv if curv < 0 else np.inf
        return out.reshape(np.shape(y))

    def case(self):
        if math.isfinite(self.x_lower):
            return CaseTag.SL_INF
        xs = np.array([-1e2, -1e3, -1e4])
        with np.errstate(over="ignore"):
            ratios = np.array([self._value(float(t)) / t for t in xs])
        if not np.all(np.isfinite(ratios)) or ratios[-1] > 1.5 * ratios[-2]:
            return CaseTag.SL_F
        return CaseTag.L_F


_FAMILIES = {
    "exponential": _Exponential,
    "log": _Log,
    "power": _Power,
    "truncated_quadratic": _TruncatedQuadratic,
    "piecewise_linear": _PiecewiseLinear,
}


# --------------------------------------------------------------------------
# public spec
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UtilitySpec:
    """A concave utility together with its domain bound, bliss point and slope at 0.

    ``offset`` is the constant added to the raw family expression; after
    ``normalize`` it equals minus the raw value at 0.
    """

    family: str
    params: tuple[tuple[str, Any], ...]
    x_lower: float
    x_bliss: float
    u_at_zero: float
    a: float
    offset: float = 0.0
    normalized: bool = False
    _impl: _Family = field(default=None, repr=False, compare=False)

    # -- evaluation ---------------------------------------------------------

    @property
    def param_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params}

    def u(self, x: ArrayLike):
        xa = _arr(x)
        return _out(self._impl.u(xa) + self.offset, x)

    def du(self, x: ArrayLike):
        """Right derivative U'_+(x)."""
        xa = _arr(x)
        return _out(self._impl.du(xa), x)

    def d2u(self, x: ArrayLike):
        xa = _arr(x)
        return _out(self._impl.d2u(xa), x)

    def v(self, y: ArrayLike):
        ya = _arr(y)
        return _out(self._impl.v(ya) + self.offset, y)

    def dv(self, y: ArrayLike):
        ya = _arr(y)
        return _out(self._impl.dv(ya), y)

    def d2v(self, y: ArrayLike):
        ya = _arr(y)
        return _out(self._impl.d2v(ya), y)

    @property
    def u_infinity(self) -> float:
        """U(inf), the supremum of the utility."""
        if math.isfinite(self.x_bliss):
            return float(self.u(self.x_bliss))
        return float(self.v(0.0)) if self.family != "custom" else math.inf

    @property
    def kinked(self) -> bool:
        return self._impl.kinked

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        if self.family == "custom":
            raise ValueError("custom utilities hold callables and cannot be serialized")
        return {"family": self.family, "params": self.param_dict, "normalized": self.normalized}

    @classmethod
    def from_dict(cls, data: dict) -> "UtilitySpec":
        family = data["family"]
        params = dict(data.get("params", {}))
        if family == "quadratic":
            spec = quadratic()
        elif family == "linear":
            spec = linear(**params)
        elif family in _FAMILIES:
            spec = _build(family, **params)
        else:
            raise ValueError(f"unknown utility family {family!r}")
        return normalize(spec) if data.get("normalized", False) else spec


def _build(family: str, **params) -> UtilitySpec:
    impl = _FAMILIES[family](**params)
    u0 = float(impl.u(np.array(0.0)))
    a = float(impl.du(np.array(0.0)))
    frozen = tuple(sorted((k, tuple(v) if isinstance(v, (list, np.ndarray)) else v) for k, v in params.items()))
    return UtilitySpec(
        family=family,
        params=frozen,
        x_lower=float(impl.x_lower),
        x_bliss=float(impl.x_bliss),
        u_at_zero=u0,
        a=a,
        _impl=impl,
    )


def exponential(rate: float = 1.0) -> UtilitySpec:
    """U(x) = -exp(-rate x)."""
    return _build("exponential", rate=rate)


def log_utility(shift: float = 1.0) -> UtilitySpec:
    """U(x) = ln(x + shift) on (-shift, inf)."""
    return _build("log", shift=shift)


def power(exponent: float, shift: float = 1.0) -> UtilitySpec:
    """U(x) = (x + shift)^p / p for p < 1, p != 0."""
    return _build("power", exponent=exponent, shift=shift)


def truncated_quadratic(bliss: float = 1.0) -> UtilitySpec:
    """U(x) = -(bliss - x)^2 / 2 for x <= bliss, 0 beyond."""
    return _build("truncated_quadratic", bliss=bliss)


def quadratic() -> UtilitySpec:
    """Mean-variance utility -(1 - x)^2 / 2 on its monotone part (bliss at 1)."""
    spec = _build("truncated_quadratic", bliss=1.0)
    return replace(spec, family="quadratic", params=())


def piecewise_linear(slopes, kinks=()) -> UtilitySpec:
    """Concave piecewise linear utility anchored at U(0) = 0."""
    return _build("piecewise_linear", slopes=list(slopes), kinks=list(kinks))


def domar_musgrave(loss_slope: float = 2.0, gain_slope: float = 1.0) -> UtilitySpec:
    """Two-slope utility with a kink at 0."""
    return piecewise_linear([loss_slope, gain_slope], [0.0])


def linear(slope: float = 1.0) -> UtilitySpec:
    spec = _build("piecewise_linear", slopes=[slope], kinks=[])
    return replace(spec, family="linear", params=(("slope", slope),))


def custom(
    u: Callable[[float], float],
    du: Callable[[float], float],
    x_lower: float = -math.inf,
    bracket: tuple[float, float] | None = None,
) -> UtilitySpec:
    """Utility given by a scalar callable and its (right) derivative.

    The conjugate is computed pointwise by solving U'(x) = y on ``bracket``
    (default [x_lower + 1e-9, 1e6], expanded tenfold when the root escapes).
    The bliss point is detected on a grid and is approximate.
    """
    impl = _Custom(u, du, x_lower=x_lower, bracket=bracket)
    return UtilitySpec(
        family="custom",
        params=(),
        x_lower=impl.x_lower,
        x_bliss=impl.x_bliss,
        u_at_zero=float(u(0.0)),
        a=float(du(0.0)),
        _impl=impl,
    )


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def normalize(u: UtilitySpec) -> UtilitySpec:
    """Shift U (and V) by a constant so that U(0) = 0."""
    if not u.x_lower < u.x_bliss:
        raise DegenerateUtility("utility is constant on its domain; doing nothing is optimal")
    if not (u.x_lower < 0 < u.x_bliss):
        raise ValueError("0 must lie strictly between the domain bound and the bliss point")
    if u.normalized and u.u_at_zero == 0.0:
        return u
    c = -u.u_at_zero
    return replace(u, offset=u.offset + c, u_at_zero=0.0, normalized=True)


def classify_case(u: UtilitySpec) -> CaseTag:
    """Left-tail case from the domain bound and the limit of U(x)/x at -inf."""
    if math.isfinite(u.x_lower):
        return CaseTag.SL_INF
    return u._impl.case()


@dataclass(frozen=True)
class ConjugatePair:
    """V = -U*, the Young function U_hat and its conjugate V_hat.

    ``v`` follows the spec as given (raw or normalized); ``u_hat`` and
    ``v_hat`` are always built from the normalized utility.
    """

    v: Callable
    u_hat: Callable
    v_hat: Callable
    case_tag: CaseTag
    a: float


def young_function(u: UtilitySpec) -> Callable:
    """U_hat(x) = -U(-|x|) for the normalized utility."""
    un = normalize(u)

    def u_hat(x):
        xa = np.abs(_arr(x))
        return _out(-un.u(-xa), x)

    return u_hat


def conjugate(u: UtilitySpec) -> ConjugatePair:
    un = normalize(u)
    a = un.a

    def v_hat(y):
        ya = np.maximum(np.abs(_arr(y)), a)
        return _out(un.v(ya), y)

    return ConjugatePair(v=u.v, u_hat=young_function(u), v_hat=v_hat, case_tag=classify_case(u), a=a)


def is_subgradient_dependent(u: UtilitySpec, x: ArrayLike) -> bool:
    """True when U has a kink at one of the points ``x`` (derivative is a selection).

    A finite slope at a finite lower end of the domain counts as a kink: the
    superdifferential there is the half-line [U'(x_lower), inf).
    """
    xs = _arr(x)
    if math.isfinite(u.x_lower) and np.any(np.abs(xs - u.x_lower) <= 1e-9 * max(1.0, abs(u.x_lower))):
        with np.errstate(all="ignore"):
            if math.isfinite(float(u.du(u.x_lower))):
                return True
    if not u.kinked:
        return False
    kinks = np.asarray(u._impl.kinks)
    return bool(np.any(np.isin(np.round(_arr(x), 12), np.round(kinks, 12))))
