"""Expected utility maximization on finite-state one-period markets.

A market is a strictly positive probability vector over n states, a finite
list of claim vectors generating the cone of zero-cost trades, and an
endowment.  Generators are either two-sided (any real multiple can be held)
or one-sided (nonnegative multiples only, e.g. under a short-sale ban).

The primal problem maximizes E[U(B + G theta)] over admissible positions.
The dual problem minimizes I_V(Y) + sup{E[XY] : X in (B + C) cap dom I_U}
over nonnegative densities Y, solved directly in Y so that effective
completions (support term beyond E[BY]) can be represented.  The two are
solved by independent routes and agree at the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from ._barrier import Constraint, DivergenceError, barrier_minimize
from .errors import (
    ArbitrageError,
    DualDiverges,
    InfeasibleCore,
    NotBlissFree,
    UnboundedUtility,
)
from .utility import UtilitySpec, is_subgradient_dependent, normalize

ARBITRAGE_TOL = 1e-9
CORNER_TOL = 1e-8
GAP_TOL = 1e-6


@dataclass(frozen=True)
class Generator:
    payoff: np.ndarray
    two_sided: bool = True

    def __post_init__(self):
        object.__setattr__(self, "payoff", np.asarray(self.payoff, dtype=float).ravel())


@dataclass(frozen=True)
class FiniteMarket:
    """Probability vector, cone generators and endowment.

    States with zero probability are removed at construction; the payoffs and
    the endowment lose the same coordinates.
    """

    probs: np.ndarray
    generators: tuple[Generator, ...]
    endowment: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1 within 1e-12")
        keep = p > 0
        gens = []
        for g in self.generators:
            if not isinstance(g, Generator):
                g = Generator(*g) if isinstance(g, tuple) else Generator(g)
            if g.payoff.shape != p.shape:
                raise ValueError("generator payoff length must equal the number of states")
            pay = g.payoff[keep]
            if not np.any(pay != 0):
                raise ValueError("generators must be nonzero on states of positive probability")
            gens.append(Generator(pay, g.two_sided))
        b = np.zeros_like(p) if self.endowment is None else np.asarray(self.endowment, dtype=float).ravel()
        if b.shape != p.shape:
            raise ValueError("endowment length must equal the number of states")
        object.__setattr__(self, "probs", p[keep])
        object.__setattr__(self, "generators", tuple(gens))
        object.__setattr__(self, "endowment", b[keep])

    @property
    def n_states(self) -> int:
        return len(self.probs)

    @property
    def G(self) -> np.ndarray:
        """Payoff matrix, one column per generator."""
        if not self.generators:
            return np.zeros((self.n_states, 0))
        return np.column_stack([g.payoff for g in self.generators])

    @property
    def two_sided(self) -> np.ndarray:
        return np.array([g.two_sided for g in self.generators], dtype=bool)

    def with_endowment(self, b) -> "FiniteMarket":
        return FiniteMarket(self.probs, self.generators, b)

    def scaled_generators(self, c: float) -> "FiniteMarket":
        return FiniteMarket(self.probs, tuple(Generator(c * g.payoff, g.two_sided) for g in self.generators), self.endowment)

    def to_dict(self) -> dict:
        return {
            "probs": self.probs.tolist(),
            "generators": [{"payoff": g.payoff.tolist(), "sided": "two" if g.two_sided else "one"} for g in self.generators],
            "endowment": self.endowment.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteMarket":
        try:
            probs = data["probs"]
            gens = []
            for i, g in enumerate(data.get("generators", [])):
                sided = g.get("sided", "two")
                if sided not in ("one", "two"):
                    raise ValueError(f"generators[{i}].sided must be 'one' or 'two', got {sided!r}")
                gens.append(Generator(g["payoff"], sided == "two"))
        except KeyError as exc:
            raise ValueError(f"missing field {exc.args[0]!r} in market description") from None
        return cls(probs, tuple(gens), data.get("endowment"))


# --------------------------------------------------------------------------
# no-arbitrage
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoArbitrageResult:
    arbitrage_free: bool
    witness: np.ndarray  # separating density (E[Y] = 1) or arbitrage claim
    margin: float


def _separation_rows(m: FiniteMarket, weights: np.ndarray):
    """Equality and inequality rows for E[g Y] = 0 / <= 0 with Y weighted by ``weights``."""
    G = m.G
    two = m.two_sided
    A_eq = (G[:, two] * weights[:, None]).T
    A_ub = (G[:, ~two] * weights[:, None]).T
    return A_eq, A_ub


def check_no_arbitrage(m: FiniteMarket) -> NoArbitrageResult:
    """Strictly positive separating density, or an arbitrage claim.

    Solves max eps s.t. Y >= eps, E[Y] = 1, E[g Y] = 0 (two-sided),
    E[g Y] <= 0 (one-sided).  When the optimal eps vanishes, a second LP
    returns a claim X = G theta >= 0, X != 0.
    """
    n = m.n_states
    p = m.probs
    A_eq_g, A_ub_g = _separation_rows(m, p)
    # variables: Y (n), eps
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = [np.concatenate([-np.eye(n), np.ones((n, 1))], axis=1)]
    b_ub = [np.zeros(n)]
    if len(A_ub_g):
        A_ub.append(np.concatenate([A_ub_g, np.zeros((len(A_ub_g), 1))], axis=1))
        b_ub.append(np.zeros(len(A_ub_g)))
    A_eq = [np.concatenate([p, [0.0]])[None, :]]
    b_eq = [np.array([1.0])]
    if len(A_eq_g):
        A_eq.append(np.concatenate([A_eq_g, np.zeros((len(A_eq_g), 1))], axis=1))
        b_eq.append(np.zeros(len(A_eq_g)))
    bounds = [(0, None)] * n + [(None, 1.0)]
    res = linprog(c, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub), A_eq=np.vstack(A_eq), b_eq=np.concatenate(b_eq), bounds=bounds, method="highs")
    if res.status == 0 and -res.fun > ARBITRAGE_TOL:
        return NoArbitrageResult(True, res.x[:n], float(-res.fun))
    claim, size = _arbitrage_claim(m)
    return NoArbitrageResult(False, claim, size)


def _arbitrage_claim(m: FiniteMarket) -> tuple[np.ndarray, float]:
    G = m.G
    k = G.shape[1]
    if k == 0:
        return np.zeros(m.n_states), 0.0
    c = -G.sum(axis=0)
    A_ub = np.vstack([-G, G])
    b_ub = np.concatenate([np.zeros(m.n_states), np.ones(m.n_states)])
    bounds = [(None, None) if t else (0, None) for t in m.two_sided]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return np.zeros(m.n_states), 0.0
    x = G @ res.x
    x[np.abs(x) < 1e-12] = 0.0
    return x, float(-res.fun)


# --------------------------------------------------------------------------
# primal
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PrimalSolution:
    x_hat: np.ndarray
    theta: np.ndarray
    value: float
    boundary_flag: bool
    slack: np.ndarray
    probs: np.ndarray = field(repr=False)
    endowment: np.ndarray = field(repr=False)


def _domain_rows(m: FiniteMarket, x_lower: float):
    """Rows of C theta <= d for B + G theta >= x_lower."""
    return -m.G, m.endowment - x_lower


def _strict_start(C: np.ndarray, d: np.ndarray, k: int, box: float = 1e6) -> tuple[np.ndarray, float]:
    """Small-norm point with positive slack in C x <= d.

    The first LP finds the largest attainable minimal slack s* (capped at 1);
    the second minimizes ||x||_1 subject to slack s*/2, keeping the start
    away from regions where the utility overflows.
    """
    if len(C) == 0:
        return np.zeros(k), 1.0
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A = np.concatenate([C, np.ones((len(C), 1))], axis=1)
    bounds = [(-box, box)] * k + [(None, 1.0)]
    res = linprog(c, A_ub=A, b_ub=d, bounds=bounds, method="highs")
    if res.status != 0:
        return np.zeros(k), -math.inf
    s_star = float(-res.fun)
    if s_star <= 0:
        return res.x[:k], s_star
    # variables x (k), a (k) with |x| <= a
    c2 = np.concatenate([np.zeros(k), np.ones(k)])
    eye = np.eye(k)
    A2 = np.vstack([
        np.concatenate([C, np.zeros((len(C), k))], axis=1),
        np.concatenate([eye, -eye], axis=1),
        np.concatenate([-eye, -eye], axis=1),
    ])
    b2 = np.concatenate([d - s_star / 2.0, np.zeros(2 * k)])
    res2 = linprog(c2, A_ub=A2, b_ub=b2, bounds=[(-box, box)] * k + [(0, None)] * k, method="highs")
    if res2.status != 0:
        return res.x[:k], s_star
    return res2.x[:k], s_star / 2.0


def solve_primal(m: FiniteMarket, u: UtilitySpec, tol: float = 1e-12) -> PrimalSolution:
    """Maximize E[U(B + G theta)] over two-sided (free) and one-sided (>= 0) positions."""
    na = check_no_arbitrage(m)
    if not na.arbitrage_free:
        raise ArbitrageError(f"market admits the arbitrage claim {na.witness.tolist()}")
    p, B, G = m.probs, m.endowment, m.G
    k = G.shape[1]
    rows, rhs = [], []
    one = np.nonzero(~m.two_sided)[0]
    for i in one:
        r = np.zeros(k)
        r[i] = -1.0
        rows.append(r)
        rhs.append(0.0)
    if math.isfinite(u.x_lower):
        Cd, dd = _domain_rows(m, u.x_lower)
        rows.extend(Cd)
        rhs.extend(dd)
    C = np.array(rows).reshape(-1, k)
    d = np.array(rhs)
    theta0, margin = _strict_start(C, d, k)
    if margin <= 0:
        raise InfeasibleCore("no admissible claim lies strictly inside the utility domain")

    def objective(theta):
        w = B + G @ theta
        with np.errstate(all="ignore"):
            uw = u.u(w)
            if not np.all(np.isfinite(uw)):
                return math.inf, None, None
            du = u.du(w)
            d2u = u.d2u(w)
        f = -float(p @ uw)
        grad = -G.T @ (p * du)
        hess = -(G.T * (p * d2u)) @ G
        return f, grad, hess

    if k == 0:
        theta = np.zeros(0)
    else:
        try:
            res = barrier_minimize(objective, theta0, linear=(C, d), tol=tol)
        except DivergenceError:
            raise UnboundedUtility("positions diverge while utility approaches its supremum") from None
        theta = res.x
    w = B + G @ theta
    slack = np.zeros_like(w)
    if math.isfinite(u.x_bliss):
        slack = np.maximum(w - u.x_bliss, 0.0)
    x_hat = G @ theta - slack
    value = float(p @ u.u(B + x_hat))
    if math.isfinite(u.u_infinity) and value > u.u_infinity - 1e-12 and np.max(np.abs(theta), initial=0) > 1e8:
        raise UnboundedUtility("utility reaches the bliss level only along diverging positions")
    boundary = False
    if math.isfinite(u.x_lower):
        with np.errstate(all="ignore"):
            boundary = not np.all(np.isfinite(u.u((1 + 1e-7) * (B + x_hat))))
            boundary = boundary or bool(np.min(B + x_hat) - u.x_lower <= 1e-9 * max(1.0, abs(u.x_lower)))
    return PrimalSolution(x_hat, theta, value, boundary, slack, p, B)


# --------------------------------------------------------------------------
# dual
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DualSolution:
    y_hat: np.ndarray
    value: float
    support_term: float
    completion: str  # "full" or "effective"
    q_hat: np.ndarray
    endowment_price: float  # E[B Y]


def _row_basis(A: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    if A.size == 0:
        return A.reshape(0, A.shape[1] if A.ndim == 2 else 0)
    _, s, vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > rtol * max(s[0], 1e-300)))
    return vt[:rank]


def support_function(m: FiniteMarket, u: UtilitySpec, y: np.ndarray, tol: float = 1e-9) -> float:
    """sup{E[X Y] : X in (B + C) cap dom U}, evaluated by linear programming.

    Slack is never useful for Y >= 0, so the supremum runs over B + G theta
    with theta admissible and B + G theta >= x_lower when the domain is
    bounded below.
    """
    y = np.asarray(y, dtype=float)
    p, B, G = m.probs, m.endowment, m.G
    base = float(p @ (B * y))
    k = G.shape[1]
    if k == 0:
        return base
    c = G.T @ (p * y)
    scale = float(p @ (np.abs(G).max(axis=1) * np.abs(y))) + 1e-300
    if not math.isfinite(u.x_lower):
        two = m.two_sided
        if np.any(np.abs(c[two]) > tol * scale) or np.any(c[~two] > tol * scale):
            return math.inf
        return base
    Cd, dd = _domain_rows(m, u.x_lower)
    # Null directions of G carry rounding-level objective slopes; comparing
    # two box sizes separates genuine unboundedness from that noise.
    values = []
    for box in (1e4, 1e7):
        bounds = [(-box, box) if t else (0, box) for t in m.two_sided]
        res = linprog(-c, A_ub=Cd, b_ub=dd, bounds=bounds, method="highs")
        if res.status != 0:
            return math.inf
        values.append(float(-res.fun))
    if values[1] - values[0] > 1e-7 * (1.0 + abs(values[0])):
        return math.inf
    return base + values[0]


def dual_objective(m: FiniteMarket, u: UtilitySpec, y: np.ndarray) -> float:
    """I_V(Y) + support function; an upper bound on the primal value for every Y >= 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        return math.inf
    iv = float(m.probs @ u.v(y))
    if not math.isfinite(iv):
        return math.inf
    return iv + support_function(m, u, y)


def _dual_start(m: FiniteMarket, with_mu: bool):
    """Strictly feasible (z, mu) for the dual barrier problem.

    One-sided constraints that cannot hold strictly are promoted to
    equalities; returns the start point and the equality/inequality rows.
    """
    n = m.n_states
    G = m.G
    two = m.two_sided.copy()
    nv = 2 * n if with_mu else n

    def lift(rows):
        return np.concatenate([rows, rows], axis=1) if with_mu else rows

    for _ in range(G.shape[1] + 1):
        A_eq = lift(G[:, two].T)
        A_ub = lift(G[:, ~two].T)
        # variables w (nv), s: max s, w >= s, A_ub w <= -s, A_eq w = 0, sum z = 1
        c = np.zeros(nv + 1)
        c[-1] = -1.0
        ub = [np.concatenate([-np.eye(nv), np.ones((nv, 1))], axis=1)]
        bub = [np.zeros(nv)]
        if len(A_ub):
            ub.append(np.concatenate([A_ub, np.ones((len(A_ub), 1))], axis=1))
            bub.append(np.zeros(len(A_ub)))
        norm_row = np.zeros(nv + 1)
        norm_row[:n] = 1.0
        eq = [norm_row[None, :]]
        beq = [np.array([1.0])]
        if len(A_eq):
            eq.append(np.concatenate([A_eq, np.zeros((len(A_eq), 1))], axis=1))
            beq.append(np.zeros(len(A_eq)))
        res = linprog(c, A_ub=np.vstack(ub), b_ub=np.concatenate(bub), A_eq=np.vstack(eq), b_eq=np.concatenate(beq), bounds=[(None, None)] * nv + [(None, 1.0)], method="highs")
        if res.status == 0 and -res.fun > 1e-10:
            return res.x[:nv], A_eq, A_ub, two
        # find a one-sided constraint that is implicitly an equality
        promoted = False
        for i in np.nonzero(~two)[0]:
            row = lift(G[:, [i]].T)[0]
            cc = np.concatenate([row, [0.0]])
            # max -row.w subject to w >= 0, other constraints, sum z = 1
            r2 = linprog(cc, A_ub=np.vstack(ub[1:]) if len(ub) > 1 else None, b_ub=np.concatenate(bub[1:]) if len(bub) > 1 else None, A_eq=np.vstack(eq), b_eq=np.concatenate(beq), bounds=[(0, None)] * nv + [(0, 0)], method="highs")
            if r2.status == 0 and -r2.fun <= 1e-12:
                two[i] = True
                promoted = True
                break
        if not promoted:
            break
    raise DualDiverges("no strictly positive separating density exists")


def solve_dual(m: FiniteMarket, u: UtilitySpec, tol: float = 1e-12, corner_tol: float = CORNER_TOL) -> DualSolution:
    """Minimize I_V(Y) + support function over Y >= 0.

    Writes z = P * Y for the state prices and, when the utility domain is
    bounded below, adds boundary prices mu >= 0 whose cost (B - x_lower) is
    the linear-programming dual of the domain constraint.  The support term
    reported is recomputed from the optimal Y by an independent LP.
    """
    p, B = m.probs, m.endowment
    n = m.n_states
    na = check_no_arbitrage(m)
    if not na.arbitrage_free:
        v0 = float(u.v(0.0))
        if not math.isfinite(v0):
            raise DualDiverges("utility is unbounded and the market has arbitrage: only Y = 0 is feasible")
        y = np.zeros(n)
        return DualSolution(y, v0, 0.0, "full", y.copy(), 0.0)
    with_mu = math.isfinite(u.x_lower)
    w0, A_eq, A_ub, _ = _dual_start(m, with_mu)
    cost_mu = B - u.x_lower if with_mu else None
    if with_mu and np.any(cost_mu <= 0):
        raise InfeasibleCore("endowment touches the domain bound")

    def objective(w):
        z = w[:n]
        if np.any(z <= 0):
            return math.inf, None, None
        y = z / p
        with np.errstate(all="ignore"):
            vy = u.v(y)
            if not np.all(np.isfinite(vy)):
                return math.inf, None, None
            dv = u.dv(y)
            d2v = u.d2v(y)
        f = float(p @ vy + B @ z)
        g = dv + B
        h = np.diag(d2v / p)
        if with_mu:
            mu = w[n:]
            f += float(cost_mu @ mu)
            g = np.concatenate([g, cost_mu])
            H = np.zeros((2 * n, 2 * n))
            H[:n, :n] = h
            h = H
        return f, g, h

    nv = len(w0)
    C = -np.eye(nv)
    d = np.zeros(nv)
    if len(A_ub):
        C = np.vstack([C, A_ub])
        d = np.concatenate([d, np.zeros(len(A_ub))])
    res = barrier_minimize(objective, w0, A_eq=_row_basis(A_eq) if len(A_eq) else None, linear=(C, d), tol=tol)
    y_hat = res.x[:n] / p
    support = support_function(m, u, y_hat)
    iv = float(p @ u.v(y_hat))
    value = iv + support
    price_b = float(p @ (B * y_hat))
    completion = "full" if support - price_b <= corner_tol else "effective"
    q_hat = y_hat / float(p @ y_hat)
    return DualSolution(y_hat, value, support, completion, q_hat, price_b)


# --------------------------------------------------------------------------
# complete markets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CompleteMarketValue:
    value: float
    multiplier: float
    closed_form: float | None


def _golden_min(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def entropy_dual_value(probs, z) -> float:
    """-E[Z] exp(-E[Z ln Z] / E[Z]), the minimum over y > 0 of E[V(yZ)] for V(y) = y ln y - y."""
    p = np.asarray(probs, float)
    z = np.asarray(z, float)
    ez = float(p @ z)
    pos = z > 0
    ezlnz = float(p[pos] @ (z[pos] * np.log(z[pos])))
    return -ez * math.exp(-ezlnz / ez)


def relative_entropy(probs, q_density) -> float:
    """H(Q | P) = E[Z ln Z] for Z = dQ/dP."""
    p = np.asarray(probs, float)
    z = np.asarray(q_density, float)
    pos = z > 0
    return float(p[pos] @ (z[pos] * np.log(z[pos])))


def complete_market_value(probs, q, u: UtilitySpec, tol: float = 1e-10) -> CompleteMarketValue:
    """u_Q(0) = min over lam > 0 of E[V(lam dQ/dP)].

    ``q`` is a nonnegative density (any positive multiple is accepted).
    Golden-section search on log(lam) followed by Newton polishing on lam.
    For the exponential family the entropy formula is evaluated alongside and
    must agree to 1e-9.
    """
    p = np.asarray(probs, dtype=float)
    z = np.asarray(q, dtype=float)
    if np.any(z < 0) or not p @ z > 0:
        raise ValueError("density must be nonnegative and not identically zero")
    z = z / float(p @ z)

    def h(lam: float) -> float:
        with np.errstate(all="ignore"):
            val = float(p @ u.v(lam * z))
        return val if math.isfinite(val) else math.inf

    grid = np.linspace(-40.0, 40.0, 161)
    vals = np.array([h(math.exp(s)) for s in grid])
    if not np.any(np.isfinite(vals)):
        raise NotBlissFree("E[V(lam q)] is infinite for every lam > 0")
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    s_star = _golden_min(lambda s: h(math.exp(s)), lo, hi, tol=1e-12)
    lam = math.exp(s_star)
    for _ in range(50):
        with np.errstate(all="ignore"):
            g1 = float(p @ (z * u.dv(lam * z)))
            g2 = float(p @ (z * z * u.d2v(lam * z)))
        if not (math.isfinite(g1) and math.isfinite(g2)) or g2 <= 0:
            break
        step = g1 / g2
        new = lam - step
        if new <= 0:
            new = lam / 2.0
        if not h(new) <= h(lam) + 1e-15 * max(1.0, abs(h(lam))):
            break
        lam = new
        if abs(step) < tol * max(1.0, lam):
            break
    value = h(lam)
    closed = None
    if u.family == "exponential":
        closed = entropy_dual_value(p, z) + u.offset
        if abs(closed - value) >= 1e-9:
            raise AssertionError(f"entropy formula {closed!r} disagrees with 1-D minimization {value!r}")
    return CompleteMarketValue(value, lam, closed)


# --------------------------------------------------------------------------
# corner classification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CornerReport:
    marginal_value: float  # E[X U'(B + X)]
    priced_value: float  # E[X Y]
    excess_support: float  # support term minus E[B Y]
    agree: bool
    corner: bool
    foc_residual: float
    subgradient_dependent: bool


def classify_corner(p: PrimalSolution, d: DualSolution, u: UtilitySpec, tol: float = CORNER_TOL, agree_tol: float = 1e-6) -> CornerReport:
    """Corner solution test: E[X U'(B + X)] > 0 matches a positive excess support term.

    When B + X touches a point where U has no derivative (a kink, or a finite
    slope at the lower end of the domain) the dual density is only a
    supergradient there, so agreement is required of E[X Y] and the
    derivative route is reported without being enforced.
    """
    probs, B = p.probs, p.endowment
    w = B + p.x_hat
    du = u.du(w)
    marginal = float(probs @ (p.x_hat * du))
    priced = float(probs @ (p.x_hat * d.y_hat))
    excess = d.support_term - d.endowment_price
    subgrad = is_subgradient_dependent(u, w)
    scale = max(1.0, abs(excess))
    agree = abs(priced - excess) <= agree_tol * scale
    if not subgrad:
        agree = agree and abs(marginal - excess) <= agree_tol * scale
    corner = priced > tol and excess > tol
    interior = np.ones_like(w, dtype=bool)
    if math.isfinite(u.x_lower):
        interior &= w > u.x_lower + 1e-7 * max(1.0, abs(u.x_lower))
    if math.isfinite(u.x_bliss):
        interior &= w < u.x_bliss
    resid = float(np.max(np.abs(d.y_hat[interior] - du[interior]) / np.maximum(1.0, np.abs(du[interior])), initial=0.0))
    return CornerReport(marginal, priced, excess, bool(agree), bool(corner), resid, subgrad)


# --------------------------------------------------------------------------
# indirect utility and the loss bound
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UtilityProfile:
    xs: list[float]
    values: list[float]
    ratios: list[float]
    sublinear: bool  # verdict on u_bar(x) / x -> 0 at the sampled horizon


def _indirect_utility(m: FiniteMarket, un: UtilitySpec, x: float, tol: float) -> float:
    p, G = m.probs, m.G
    n, k = m.n_states, G.shape[1]
    one = ~m.two_sided

    def split(v):
        return v[:k], v[k:]

    def objective(v):
        theta, z = split(v)
        w = G @ theta + z
        with np.errstate(all="ignore"):
            uw = un.u(w)
            if not np.all(np.isfinite(uw)):
                return math.inf, None, None
            du, d2u = un.du(w), un.d2u(w)
        J = np.concatenate([G, np.eye(n)], axis=1)
        return -float(p @ uw), -J.T @ (p * du), -(J.T * (p * d2u)) @ J

    def ball(v):
        _, z = split(v)
        with np.errstate(all="ignore"):
            phi = -un.u(-z / x)
            if not np.all(np.isfinite(phi)):
                return math.inf, None, None
            d1 = un.du(-z / x) / x
            d2 = -un.d2u(-z / x) / x**2
        g = np.concatenate([np.zeros(k), p * d1])
        H = np.zeros((k + n, k + n))
        H[k:, k:] = np.diag(p * d2)
        return float(p @ phi) - 1.0, g, H

    cons = [Constraint(ball)]
    rows, rhs = [], []
    for i in range(n):
        r = np.zeros(k + n)
        r[k + i] = -1.0
        rows.append(r)
        rhs.append(0.0)
    for i in np.nonzero(one)[0]:
        r = np.zeros(k + n)
        r[i] = -1.0
        rows.append(r)
        rhs.append(0.0)
    if math.isfinite(un.x_lower):
        for j in range(n):
            r = np.concatenate([-G[j], -np.eye(n)[j]])
            rows.append(r)
            rhs.append(-un.x_lower)
    lin = (np.array(rows), np.array(rhs))
    c = 0.5
    while True:
        with np.errstate(all="ignore"):
            if float(p @ (-un.u(-np.full(n, c)))) < 0.5:
                break
        c /= 2.0
    v0 = np.concatenate([np.where(one, 1e-6, 0.0), np.full(n, c * x)])
    try:
        res = barrier_minimize(objective, v0, cons, linear=lin, tol=tol)
    except DivergenceError:
        return math.inf
    return -res.value


def indirect_utility_profile(m: FiniteMarket, u: UtilitySpec, xs: Sequence[float], tol: float = 1e-9, decay: float = 0.5) -> UtilityProfile:
    """u_bar(x) = sup{E[U(X + Z)] : X in C, ||Z|| <= x} on the sampled x.

    The verdict on u_bar(x)/x -> 0 is a trend test: ratios nonincreasing and
    the last ratio below ``decay`` times the first.
    """
    na = check_no_arbitrage(m)
    if not na.arbitrage_free:
        raise ArbitrageError("indirect utility needs an arbitrage-free market")
    un = normalize(u)
    xs = [float(x) for x in xs]
    vals = [_indirect_utility(m, un, x, tol) for x in xs]
    ratios = [v / x for v, x in zip(vals, xs)]
    r = np.array(ratios)
    if not np.all(np.isfinite(r)):
        verdict = False
    elif np.all(np.abs(r) <= 1e-12):
        verdict = True
    else:
        verdict = bool(np.all(np.diff(r) <= 1e-9 * np.abs(r[:-1]) + 1e-12) and r[-1] <= decay * r[0])
    return UtilityProfile(xs, vals, ratios, verdict)


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    n_checked: int
    min_margin: float
    witness: np.ndarray | None


def loss_bound_terms(m: FiniteMarket, un: UtilitySpec, y_tilde, lam1: float, lam2: float, x) -> tuple[float, float]:
    """Left side I_U(X) and right side of the two-multiplier bound on expected utility."""
    p = m.probs
    y = np.asarray(y_tilde, float)
    x = np.asarray(x, float)
    with np.errstate(all="ignore"):
        lhs = float(p @ un.u(x))
    rhs = float(p @ un.v(lam1 * y)) + float(p @ un.v(lam2 * y)) + lam1 * float(p @ (x * y)) - (lam2 - lam1) * float(p @ (np.maximum(-x, 0.0) * y))
    return lhs, rhs


def lemma32_bound_check(m: FiniteMarket, u: UtilitySpec, y_tilde, lambdas: tuple[float, float], n_samples: int = 500, seed: int = 0, scale: float = 2.0) -> BoundCheck:
    """Check I_U(X) <= I_V(l1 Y) + I_V(l2 Y) + l1 E[XY] - (l2 - l1) E[X^- Y] on random X in B + C.

    Uses the normalized utility (U(0) = 0), which the bound requires.
    """
    lam1, lam2 = lambdas
    if not lam2 > lam1 > 0:
        raise ValueError("need lam2 > lam1 > 0")
    un = normalize(u)
    p = m.probs
    y = np.asarray(y_tilde, float)
    for lam in (lam1, lam2):
        if not math.isfinite(float(p @ un.v(lam * y))):
            raise ValueError(f"{lam} * y_tilde is outside the domain of I_V")
    rng = np.random.default_rng(seed)
    G = m.G
    k = G.shape[1]
    min_margin = math.inf
    for _ in range(n_samples):
        theta = rng.normal(scale=scale, size=k)
        theta[~m.two_sided] = np.abs(theta[~m.two_sided])
        s = rng.exponential(scale=scale, size=m.n_states) * (rng.random(m.n_states) < 0.5)
        x = m.endowment + G @ theta - s
        lhs, rhs = loss_bound_terms(m, un, y, lam1, lam2, x)
        margin = rhs - lhs
        min_margin = min(min_margin, margin)
        if margin < -1e-10 * max(1.0, abs(rhs)):
            return BoundCheck(False, n_samples, margin, x)
    return BoundCheck(True, n_samples, min_margin, None)
