"""A countable market where utility jumps from C to its bipolar.

States are the integers.  P({n}) = e^{-|n|} for n in {1, +-2, +-3, ...},
P({-1}) = e^{-5} and state 0 carries the remaining mass.  The traded
claims are X_k = X + Y_k with X = +-1 on states +-1, Y(n) = n for |n| >= 2
and Y_k = Y 1{|Y| >= k}.  Under U(x) = -e^{-x}:

* over the cone C the best utility is -E[e^{-X}] (conditional Jensen, since
  E[Y_k | X] = 0 and only aggregate coefficients of size below 1 keep
  exponential moments finite);
* over the bipolar every multiple of X is available and the optimum is
  2X with value -E[e^{-2X}], strictly higher.

Computations run on the symmetric truncation |n| <= N.  State 0 keeps its
infinite-space mass, so the truncated probabilities fall short of 1 by
2 e^{-N-1} / (1 - e^{-1}) < e^{-N+1}.

An optional variant splits part of state 0 into states -m (m = 1, 2, ...)
where X = -m with weights proportional to e^{-1.5 m} / m^3, so that X keeps
exponential moments E[e^{-lam X}] only for lam <= 1.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import IndexOutOfTruncation
from .market import DualSolution, PrimalSolution
from .orlicz import Estimate, SeriesRandomVariable, exponential_young, gauge_norm, series_modular

E = math.e
P_ZERO = 1.0 - 2.0 / (E * E - E) - math.exp(-1.0) - math.exp(-5.0)
HEAVY_ORDER = 1.5


def _heavy_norm() -> float:
    m = np.arange(1, 200)
    return float(np.sum(np.exp(-HEAVY_ORDER * m) / m**3.0))


@dataclass(frozen=True)
class GapMarket:
    N: int = 40
    heavy_tail_weight: float = 0.0
    labels: np.ndarray = field(init=False, repr=False)
    probs: np.ndarray = field(init=False, repr=False)
    x: np.ndarray = field(init=False, repr=False)
    y: np.ndarray = field(init=False, repr=False)
    heavy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("truncation level N must be at least 2")
        w = float(self.heavy_tail_weight)
        if not 0 <= w < P_ZERO:
            raise ValueError(f"heavy_tail_weight must lie in [0, {P_ZERO:.6f})")
        n = np.arange(-self.N, self.N + 1)
        p = np.exp(-np.abs(n).astype(float))
        p[n == -1] = math.exp(-5.0)
        p[n == 0] = P_ZERO - w
        x = np.where(n == 1, 1.0, np.where(n == -1, -1.0, 0.0))
        y = np.where(np.abs(n) >= 2, n, 0).astype(float)
        heavy = np.zeros(len(n), dtype=bool)
        if w > 0:
            m = np.arange(1, self.N + 1)
            q = w * np.exp(-HEAVY_ORDER * m) / m**3.0 / _heavy_norm()
            n = np.concatenate([n, np.full(len(m), 0)])
            p = np.concatenate([p, q])
            x = np.concatenate([x, -m.astype(float)])
            y = np.concatenate([y, np.zeros(len(m))])
            heavy = np.concatenate([heavy, np.ones(len(m), dtype=bool)])
        for name, val in (("labels", n), ("probs", p), ("x", x), ("y", y), ("heavy", heavy)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def mass_defect(self) -> float:
        """1 minus the truncated total mass."""
        return 1.0 - float(self.probs.sum())

    @property
    def moment_order(self) -> float:
        """sup{lam >= 0 : E[e^{-lam X}] < inf} on the untruncated space."""
        return HEAVY_ORDER if self.heavy_tail_weight > 0 else math.inf

    def y_k(self, k: int) -> np.ndarray:
        if k > self.N:
            raise IndexOutOfTruncation(f"shock index {k} exceeds truncation N = {self.N}")
        return np.where(np.abs(self.y) >= k, self.y, 0.0)

    def expect(self, values) -> float:
        return float(self.probs @ np.asarray(values, dtype=float))


# --------------------------------------------------------------------------
# exponential moments
# --------------------------------------------------------------------------


def exponential_moment(m: GapMarket, lam: float) -> float:
    """E[e^{-lam X}] including the mass where X = 0."""
    with np.errstate(over="ignore"):
        return m.expect(np.exp(-lam * m.x))


def _moment_slope(m: GapMarket, lam: float) -> float:
    """-d/dlam E[e^{-lam X}] = E[X e^{-lam X}], decreasing in lam."""
    with np.errstate(over="ignore"):
        return m.expect(m.x * np.exp(-lam * m.x))


def exponential_moment_argmin(m: GapMarket, bounds: tuple[float, float] = (-4.0, 6.0)) -> float:
    """Minimizer of the convex map lam -> E[e^{-lam X}] over ``bounds`` cut at the moment order.

    Located as the root of the derivative, or at an end of the interval
    when the derivative keeps one sign there.
    """
    lo, hi = bounds
    hi = min(hi, m.moment_order)
    if _moment_slope(m, hi) >= 0:
        return float(hi)
    if _moment_slope(m, lo) <= 0:
        return float(lo)
    return float(brentq(lambda t: _moment_slope(m, t), lo, hi, xtol=1e-15))


# --------------------------------------------------------------------------
# completions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Completions:
    effective: np.ndarray  # e^{-X} / E[e^{-X}]
    full: np.ndarray  # e^{-lam X} / E[e^{-lam X}] at the minimizing lam
    full_exponent: float
    entropy_full: float  # H(Q_full | P) = E[Z ln Z]
    log_moment: float  # -ln E[e^{-lam X}]
    corner_value: float  # E[X e^{-X}]
    value_identity_residual: float  # |-E[e^{-X}] - (I_V(e^{-X}) + E[X e^{-X}])|
    separating_residual: float  # max |E_Q_full[X]|, |E_Q_full[Y_k]|


def _entropic_v(y: np.ndarray) -> np.ndarray:
    """V(y) = y ln y - y for U(x) = -e^{-x}."""
    return y * np.log(y) - y


def completions(m: GapMarket) -> Completions:
    lam = exponential_moment_argmin(m)
    e1 = np.exp(-m.x)
    el = np.exp(-lam * m.x)
    eff = e1 / m.expect(e1)
    full = el / m.expect(el)
    entropy = m.expect(full * np.log(full))
    corner = m.expect(m.x * e1)
    identity = abs(-m.expect(e1) - (m.expect(_entropic_v(e1)) + corner))
    resid = abs(m.expect(full * m.x))
    for k in range(2, m.N + 1):
        resid = max(resid, abs(m.expect(full * m.y_k(k))))
    return Completions(eff, full, lam, entropy, -math.log(m.expect(el)), corner, identity, resid)


# --------------------------------------------------------------------------
# strategy mechanics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MechanicsReport:
    ks: list[int]
    xi: list[float]  # partial sums of the coefficients in ascending k
    xi_final: float  # coefficient on X
    finite_in_limit: bool  # |xi_final| < 1
    conditional_residual: float  # max |E[Y_k | X]|
    moment_z: float  # E[e^{-Z}]
    moment_xi: float  # E[e^{-xi X}]
    moment_x: float  # E[e^{-X}]
    jensen_chain: bool
    growth: dict[int, float]
    growth_increasing: bool


def conditional_shock_mean(m: GapMarket, k: int) -> float:
    """max over levels x of |E[Y_k | X = x]|, summed in +-n pairs."""
    yk = m.y_k(k)
    worst = 0.0
    for level in np.unique(m.x):
        mask = m.x == level
        mass = float(m.probs[mask].sum())
        pos = mask & (m.labels > 0)
        total = 0.0
        for lab in m.labels[pos]:
            i = np.nonzero(mask & (m.labels == lab))[0]
            j = np.nonzero(mask & (m.labels == -lab))[0]
            total += float(m.probs[i] @ yk[i]) + (float(m.probs[j] @ yk[j]) if len(j) else 0.0)
        worst = max(worst, abs(total / mass))
    return worst


def strategy(m: GapMarket, coeffs: Sequence[tuple[int, float]]) -> np.ndarray:
    """Z = sum lam_i X_{k_i} as a vector over the truncated states."""
    z = np.zeros_like(m.x)
    for k, lam in coeffs:
        z = z + lam * (m.x + m.y_k(int(k)))
    return z


def gap_mechanics(m: GapMarket, coeffs: Sequence[tuple[int, float]], truncations: Sequence[int] = (10, 20, 40)) -> MechanicsReport:
    """Aggregate coefficients, E[Y_k | X] = 0, the Jensen chain and growth in N.

    ``coeffs`` lists (k, lam) with distinct indices; they are sorted by k.
    """
    pairs = sorted((int(k), float(lam)) for k, lam in coeffs)
    ks = [k for k, _ in pairs]
    if len(set(ks)) != len(ks):
        raise ValueError("shock indices must be distinct")
    if any(k < 1 for k in ks):
        raise ValueError("shock indices start at 1")
    for k in ks:
        if k > m.N:
            raise IndexOutOfTruncation(f"shock index {k} exceeds truncation N = {m.N}")
    xi = list(np.cumsum([lam for _, lam in pairs]))
    xi_final = xi[-1] if xi else 0.0
    cond = max((conditional_shock_mean(m, max(k, 2)) for k in ks), default=0.0)
    with np.errstate(over="ignore"):
        mz = m.expect(np.exp(-strategy(m, pairs)))
    mxi = exponential_moment(m, xi_final)
    mx = exponential_moment(m, 1.0)
    tol = 1e-12 * max(1.0, mz)
    chain = mz >= mxi - tol and (abs(xi_final) > 1 or mxi >= mx - tol)
    growth = {}
    for N in truncations:
        if N < max(ks, default=0):
            raise IndexOutOfTruncation(f"truncation {N} below shock index {max(ks)}")
        mN = GapMarket(N, m.heavy_tail_weight)
        with np.errstate(over="ignore"):
            growth[int(N)] = mN.expect(np.exp(-strategy(mN, pairs)))
    vals = [growth[N] for N in sorted(growth)]
    return MechanicsReport(ks, [float(v) for v in xi], float(xi_final), abs(xi_final) < 1, cond, mz, mxi, mx, bool(chain), growth, bool(np.all(np.diff(vals) > 0)))


# --------------------------------------------------------------------------
# certificate
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GapCertificate:
    u_over_C: float
    u_over_bipolar: float
    strict_gap: bool
    margin: float
    lam_bipolar: float  # maximizer of -E[e^{-lam X}] over all lam
    lam_C: float  # maximizer over |lam| <= 1
    sampled_max: float  # best -E[e^{-Z}] over sampled cone strategies
    n_sampled: int
    sampled_below_bound: bool


def sample_cone_strategies(m: GapMarket, n: int = 200, seed: int = 0, xi_cap: float = 0.999, max_terms: int = 6) -> list[list[tuple[int, float]]]:
    """Random finite combinations sum lam_i X_{k_i} with every partial sum in [-xi_cap, xi_cap]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        t = int(rng.integers(1, max_terms + 1))
        ks = np.sort(rng.choice(np.arange(1, m.N + 1), size=t, replace=False))
        xi = rng.uniform(-xi_cap, xi_cap, size=t)
        lams = np.diff(np.concatenate([[0.0], xi]))
        out.append([(int(k), float(l)) for k, l in zip(ks, lams)])
    return out


def gap_certificate(m: GapMarket, n_samples: int = 200, seed: int = 0) -> GapCertificate:
    """Maximal utility over C versus its bipolar, with a randomized check of the C side."""
    u_c = -exponential_moment(m, 1.0)
    lam_full = exponential_moment_argmin(m)
    lam_c = exponential_moment_argmin(m, (-1.0, 1.0))
    u_bip = -exponential_moment(m, lam_full)
    best = -math.inf
    for coeffs in sample_cone_strategies(m, n_samples, seed):
        with np.errstate(over="ignore"):
            best = max(best, -m.expect(np.exp(-strategy(m, coeffs))))
    return GapCertificate(u_c, u_bip, u_bip > u_c, u_bip - u_c, lam_full, lam_c, best, n_samples, best <= u_c + 1e-9)


def corner_solutions(m: GapMarket) -> tuple[PrimalSolution, DualSolution]:
    """Primal optimum X over C with its effective completion Y = e^{-X}.

    The support term sup{E[W e^{-X}] : W in C cap dom I_U} is evaluated on
    the strategy X_2 = X + Y_2, which prices like X because Y_2 is
    orthogonal to every function of X.
    """
    e1 = np.exp(-m.x)
    x2 = m.x + m.y_k(2)
    support = m.expect(x2 * e1)
    value = -m.expect(e1)
    primal = PrimalSolution(m.x.copy(), np.array([1.0]), value, True, np.zeros_like(m.x), m.probs, np.zeros_like(m.x))
    iv = m.expect(_entropic_v(e1))
    dual = DualSolution(e1, iv + support, support, "effective", e1 / m.expect(e1), 0.0)
    return primal, dual


# --------------------------------------------------------------------------
# shocks in the Orlicz space of e^{|x|} - 1
# --------------------------------------------------------------------------


def tail_shock_series(k: int) -> SeriesRandomVariable:
    """Y_k on the untruncated space, for k >= 2: outcomes +-n (n >= k) with mass e^{-n} each.

    Masses are passed as logarithms; past n = 709 they underflow while the
    Young function overflows.
    """
    if k < 2:
        raise ValueError("Y_k = Y_2 for k < 2; use k >= 2")

    def term(i):
        i = np.asarray(i)
        n = k + i // 2
        sign = np.where(i % 2 == 0, 1.0, -1.0)
        return sign * n, -n.astype(float)

    def tail(i, s):
        if s >= 1:
            return math.inf
        n0 = k + i // 2
        return 2.0 * math.exp((s - 1.0) * n0) / -math.expm1(s - 1.0)

    return SeriesRandomVariable(term, tail, log_probs=True)


def shock_modular_closed_form(k: int, s: float) -> float:
    """E[e^{s |Y_k|} - 1] = 2 [r^k / (1 - r) - e^{-k} / (1 - e^{-1})], r = e^{s - 1}."""
    if s >= 1:
        return math.inf
    r = math.exp(s - 1.0)
    return 2.0 * (r**k / (1.0 - r) - math.exp(-k) / (1.0 - math.exp(-1.0)))


def shock_norm_closed_form(k: int) -> float:
    """Gauge norm of Y_k: 1/s where the closed-form modular at scaling s equals 1."""
    s = brentq(lambda s: shock_modular_closed_form(k, s) - 1.0, 1e-12, 1.0 - 1e-15, xtol=1e-16)
    return 1.0 / s


@dataclass(frozen=True)
class ShockRow:
    k: int
    modular_half: float  # E[e^{|Y_k|/2} - 1] by series summation
    modular_half_closed: float
    norm: Estimate
    norm_closed: float


def shock_table(ks: Sequence[int] = (2, 4, 8, 16, 32, 64), scaling: float = 0.5) -> list[ShockRow]:
    phi = exponential_young()
    rows = []
    for k in ks:
        y = tail_shock_series(k)
        rows.append(ShockRow(k, series_modular(phi, y.scaled(scaling)).value, shock_modular_closed_form(k, scaling), gauge_norm(phi, y), shock_norm_closed_form(k)))
    return rows
