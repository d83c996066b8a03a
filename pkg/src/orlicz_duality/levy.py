"""A Lévy market with a corner solution under exponential utility.

The log-price X has drift b, no Gaussian part, and Lévy measure

    F(dx) = c x^{-5/2} e^{-x} dx on (0, inf)  +  unit atom at -1/2,
    c = 3 / (4 sqrt(pi)),

i.e. a compensated one-sided tempered stable part (index 3/2, tempering 1)
plus a compensated Poisson part.  Its cumulant is finite exactly on
v <= 1, which pins the optimal buy-and-hold position at theta = -1 once the
drift is low enough.

Integrals against F are computed with QUADPACK through scipy: the x^{-1/2}
singularity at the origin goes to the algebraic-weight rule on [0, 1], the
rest to adaptive Gauss-Kronrod on finite pieces and the transformed rule on
the infinite tail.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .errors import InteriorOptimum, QuadratureFailure

C_DENS = 3.0 / (4.0 * math.sqrt(math.pi))
C_INV = 4.0 * math.sqrt(math.pi) / 3.0
ATOM = -0.5
MOMENT_CONSTANT = 2.0 - 0.5 / math.sqrt(math.e)  # int x (e^x - 1) F(dx)
THRESHOLD = -2.0 + 0.5 / math.sqrt(math.e)

QUAD_EPSABS = 1e-14
QUAD_EPSREL = 1e-12


@dataclass(frozen=True)
class LevyModel:
    b_x: float = -2.0
    horizon: float = 1.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def standing_assumption(self) -> bool:
        return self.b_x < THRESHOLD

    @property
    def A(self) -> float:
        """-(b + 2 - 1/(2 sqrt e)), positive under the standing assumption."""
        return -(self.b_x + MOMENT_CONSTANT)


def levy_density(x):
    """Density of the positive-jump part of the Lévy measure."""
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        return np.where(x > 0, C_DENS * x**-2.5 * np.exp(-x), 0.0)


# --------------------------------------------------------------------------
# quadrature helpers
# --------------------------------------------------------------------------


def _quad(f, a, b, **kw) -> float:
    """scipy quad with warnings promoted to QuadratureFailure."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=500, **kw)
        except integrate.IntegrationWarning as exc:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val, err = integrate.quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=500, **kw)
            if not err <= 1e-9 * max(1.0, abs(val)):
                raise QuadratureFailure(str(exc).splitlines()[0], (a, b), val, err) from None
    return float(val)


def _near_origin(g) -> float:
    """int_0^1 x^{-1/2} g(x) dx for smooth g."""
    return _quad(g, 0.0, 1.0, weight="alg", wvar=(-0.5, 0.0))


def _positive_part(g_regular, h, breakpoints=()) -> float:
    """int_0^inf h(x) dx where h(x) = x^{-1/2} g_regular(x) on (0, 1]."""
    total = _near_origin(g_regular)
    pts = [1.0] + sorted(p for p in breakpoints if p > 1.0)
    for a, b in zip(pts[:-1], pts[1:]):
        total += _quad(h, a, b)
    total += _quad(h, pts[-1], math.inf)
    return total


def _compensated_ratio(v: float, x: float) -> float:
    """(e^{vx} - 1 - vx) / x^2 without cancellation."""
    z = v * x
    if abs(z) < 1e-3:
        return v * v * (0.5 + z / 6.0 + z * z / 24.0 + z**3 / 120.0)
    return (math.expm1(z) - z) / (x * x)


# --------------------------------------------------------------------------
# cumulant
# --------------------------------------------------------------------------


def cumulant(m: LevyModel, v: float) -> float:
    """kappa(v) = e^{-v/2} + (1 - v)^{3/2} - 2 + (2 + b) v for v <= 1, +inf beyond."""
    if v > 1.0:
        return math.inf
    return math.exp(-v / 2.0) + (1.0 - v) ** 1.5 - 2.0 + (2.0 + m.b_x) * v


def cumulant_derivative(m: LevyModel, u: float) -> float:
    """kappa'(u) for u <= 1 (left derivative at 1)."""
    if u > 1.0:
        return math.inf
    return -0.5 * math.exp(-u / 2.0) - 1.5 * math.sqrt(1.0 - u) + 2.0 + m.b_x


def cumulant_by_quadrature(m: LevyModel, v: float) -> float:
    """b v + int (e^{vx} - 1 - vx) F(dx), integrated numerically."""
    if v > 1.0:
        return math.inf
    atom = math.expm1(v * ATOM) - v * ATOM

    def g(x):  # x^{-1/2} g(x) is the integrand on (0, 1]
        return C_DENS * _compensated_ratio(v, x) * math.exp(-x)

    def h(x):
        return C_DENS * x**-2.5 * (math.exp((v - 1.0) * x) - math.exp(-x) - v * x * math.exp(-x))

    return m.b_x * v + atom + _positive_part(g, h)


def moment_integral() -> float:
    """int x (e^x - 1) F(dx) by quadrature; equals 2 - 1/(2 sqrt e)."""

    def g(x):
        return C_DENS * (-math.expm1(-x) / x if x > 0 else 1.0)

    def h(x):
        return C_DENS * x**-1.5 * -math.expm1(-x)

    return ATOM * math.expm1(ATOM) + _positive_part(g, h)


# --------------------------------------------------------------------------
# corner solution
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CornerAnalysis:
    A: float
    A_quadrature: float
    interior_root: float | None
    optimal_theta: float
    optimal_value: float  # -exp(kappa(1) T)


def foc(m: LevyModel, theta: float) -> float:
    """kappa'(-theta), the derivative condition for an interior optimum of -exp(kappa(-theta) T)."""
    return cumulant_derivative(m, -theta)


def corner_analysis(m: LevyModel) -> CornerAnalysis:
    """Optimal buy-and-hold position in X under U(x) = -e^{-x}.

    Expected utility -exp(kappa(-theta) T) is finite only for theta >= -1.
    kappa' is increasing, so kappa'(-theta) is decreasing in theta and its
    value at theta = -1 decides whether an interior root exists.
    """
    A_closed = m.A
    A_quad = -(m.b_x + moment_integral())
    at_edge = foc(m, -1.0)
    if at_edge > 0:
        hi = 1.0
        while foc(m, hi) > 0:
            hi *= 2.0
        root = brentq(lambda t: foc(m, t), -1.0, hi, xtol=1e-14)
        raise InteriorOptimum(f"b_x = {m.b_x} violates b_x < {THRESHOLD:.6f}; interior root theta = {root:.12g}", root, root)
    return CornerAnalysis(A_closed, A_quad, None, -1.0, -math.exp(cumulant(m, 1.0) * m.horizon))


def expected_utility(m: LevyModel, theta: float) -> float:
    """E[-exp(-theta X_T)] = -exp(kappa(-theta) T)."""
    k = cumulant(m, -theta) * m.horizon
    if k > 709.0:
        return -math.inf
    return -math.exp(k)


# --------------------------------------------------------------------------
# dual optimizing sequence
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DualSequenceRow:
    n: int
    K_n: float
    B_n: float
    C_n: float
    drift_L: float
    drift_lnZ_Q: float
    value: float
    value_entropy_route: float
    residual_B2: float


def _boost(K: float, x: float) -> float:
    """ln(1 + K e^{-x} / f(x)) on the boosted window."""
    return math.log1p(K * C_INV * x**2.5)


def _wf(K: float, n: int, x: float) -> float:
    """W_n(x) f(x), without forming e^x."""
    base = C_DENS * x**-2.5 * -math.expm1(-x)
    return base + K if n <= x <= n + 1 else base


def _row(m: LevyModel, n: int) -> DualSequenceRow:
    A = m.A
    K = A / (n + 0.5)
    T = m.horizon
    a, b = float(n), float(n + 1)

    B_n = _quad(lambda x: _boost(K, x) * C_DENS * x**-2.5 * math.exp(-x), a, b)
    C_n = _quad(lambda x: (C_DENS * x**-2.5 * -math.expm1(-x) + K) * _boost(K, x), a, b)
    drift_L_closed = cumulant(m, 1.0) + K
    value = -math.exp((drift_L_closed - B_n - C_n) * T)

    # second route: drifts integrated over the whole Lévy measure
    w_atom = math.expm1(ATOM)
    l_atom = ATOM  # ln(1 + W) at the atom

    def ratio_small(x):  # (1 - e^{-x} - x e^{-x}) / x^2
        if x < 1e-3:
            return 0.5 - x / 3.0 + x * x / 8.0 - x**3 / 30.0
        return (-math.expm1(-x) - x * math.exp(-x)) / (x * x)

    # for n = 1 the window [1, 2] starts where the singular piece ends
    bp = (a, b) if n > 1 else (b,)
    drift_L_quad = m.b_x + (w_atom - ATOM) + _positive_part(
        lambda x: C_DENS * ratio_small(x),
        lambda x: C_DENS * x**-2.5 * (-math.expm1(-x) - x * math.exp(-x)) + (K if a <= x <= b else 0.0),
        bp,
    )

    def lnw(x):
        return x + (_boost(K, x) if a <= x <= b else 0.0)

    def b_log_integrand(x):  # (ln(1 + W) - x) f
        return _boost(K, x) * C_DENS * x**-2.5 * math.exp(-x) if a <= x <= b else 0.0

    b_log = m.b_x + (l_atom - ATOM) + _quad(b_log_integrand, a, b)
    girsanov = w_atom * l_atom + _positive_part(
        lambda x: C_DENS * (-math.expm1(-x) / x if x > 0 else 1.0),
        lambda x: _wf(K, n, x) * lnw(x),
        bp,
    )
    drift_Q_quad = b_log + girsanov
    value_entropy = -math.exp(drift_L_quad * T) * math.exp(-drift_Q_quad * T)

    resid = m.b_x + ATOM * w_atom + _positive_part(
        lambda x: C_DENS * (-math.expm1(-x) / x if x > 0 else 1.0),
        lambda x: x * _wf(K, n, x),
        bp,
    )
    return DualSequenceRow(n, K, B_n, C_n, drift_L_quad, drift_Q_quad, value, value_entropy, resid)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ORLICZ_DUALITY_THREADS", "1")))
    except ValueError:
        return 1


def dual_sequence(m: LevyModel, n_max: int = 50) -> list[DualSequenceRow]:
    """Rows n = 1..n_max of the separating-measure sequence.

    ``value`` is -exp((kappa(1) + K_n - B_n - C_n) T); ``value_entropy_route``
    evaluates -E[Z] exp(-E[Z ln Z]/E[Z]) from drifts integrated over the whole
    Lévy measure.  ``residual_B2`` is b + int x W_n F(dx) by quadrature.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if not m.standing_assumption:
        raise InteriorOptimum(f"b_x = {m.b_x} violates b_x < {THRESHOLD:.6f}", None, None)
    ns = range(1, n_max + 1)
    workers = min(_threads(), n_max)
    if workers == 1:
        return [_row(m, n) for n in ns]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda n: _row(m, n), ns))


# --------------------------------------------------------------------------
# deflator
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DeflatorVerdict:
    contradiction: bool
    lhs: float  # E_t[(c - X_T) e^{X_T}]
    window: tuple[float, float]
    drift_q_hat: float  # drift of X under the optimal measure
    A: float


def deflator_nonexistence(m: LevyModel, c: float, x_t: float, t: float) -> DeflatorVerdict:
    """Test whether (c, x_t, t) witnesses that no deflator D with D_T = e^{X_T} makes D(c - X) a supermartingale.

    E_t[(c - X_T) e^{X_T}] = e^{x_t + kappa(1)(T - t)} (c - x_t - b_Q (T - t)),
    with b_Q = kappa'(1) the drift under dQ/dP = e^{X_T - kappa(1) T}.  The
    supermartingale property would need this to be at most D_t (c - x_t),
    which is nonpositive once x_t > c.  A positive left side then rules out
    every D_t >= 0.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    T = m.horizon
    if not 0 <= t < T:
        raise ValueError("need 0 <= t < T")
    b_q = m.b_x + moment_integral()
    tau = T - t
    lhs = math.exp(x_t + cumulant(m, 1.0) * tau) * (c - x_t - b_q * tau)
    contradiction = x_t > c and lhs > 0
    return DeflatorVerdict(contradiction, lhs, (c, c - b_q * tau), b_q, -b_q)
