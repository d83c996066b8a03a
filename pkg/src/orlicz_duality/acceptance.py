"""Acceptance criteria as executable checks.

Each ``criterion_<n>`` returns a ``CriterionResult`` made of named
sub-checks so that a failure says exactly which part missed its tolerance.
The CLI ``acceptance`` subcommand and the test-suite both run these.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import convex, gap, levy, market, orlicz, utility


@dataclass
class Check:
    name: str
    passed: bool
    value: float | str | None = None
    bound: float | str | None = None


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, value=None, bound=None) -> None:
        self.checks.append(Check(name, bool(passed), value, bound))

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        bad = self.failures()
        if not bad:
            return "all checks passed"
        return "; ".join(f"{c.name}: {c.value!r} vs {c.bound!r}" for c in bad)


def _timed(number: int, title: str, limit: float | None):
    def deco(fn: Callable[..., None]):
        def run(seed: int = 0) -> CriterionResult:
            res = CriterionResult(number, title)
            t0 = time.perf_counter()
            fn(res, seed)
            res.elapsed = time.perf_counter() - t0
            if limit is not None:
                res.add(f"runtime below {limit:g} s", res.elapsed < limit, res.elapsed, limit)
            return res

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return deco


# --------------------------------------------------------------------------
# Lévy market
# --------------------------------------------------------------------------

CUMULANT_GRID = (-3.0, -1.0, 0.0, 0.5, 0.9, 1.0)


@_timed(1, "cumulant closed form vs quadrature", 1.0)
def criterion_1(res: CriterionResult, seed: int) -> None:
    m = levy.LevyModel(-2.0, 1.0)
    worst = max(abs(levy.cumulant(m, v) - levy.cumulant_by_quadrature(m, v)) for v in CUMULANT_GRID)
    res.add("max |closed - quadrature| on 6 points", worst < 1e-8, worst, 1e-8)


@_timed(2, "corner solution theta = -1", 1.0)
def criterion_2(res: CriterionResult, seed: int) -> None:
    m = levy.LevyModel(-2.0, 1.0)
    ca = levy.corner_analysis(m)
    thetas = np.concatenate([np.linspace(-1.0, 5.0, 601), np.geomspace(5.0, 200.0, 50)])
    slopes = [levy.foc(m, t) for t in thetas]
    res.add("no interior root of the first-order condition", ca.interior_root is None and max(slopes) < 0, max(slopes), 0.0)
    res.add("optimal theta", ca.optimal_theta == -1.0, ca.optimal_theta, -1.0)
    best_grid = max(levy.expected_utility(m, t) for t in thetas)
    res.add("grid utility never beats theta = -1", best_grid <= ca.optimal_value + 1e-15, best_grid, ca.optimal_value)
    target = 0.5 / math.sqrt(math.e)
    res.add("A closed form = 1/(2 sqrt e)", abs(ca.A - target) < 1e-15, ca.A, target)
    res.add("A closed form vs quadrature", abs(ca.A - ca.A_quadrature) < 1e-7, abs(ca.A - ca.A_quadrature), 1e-7)


@_timed(3, "dual optimizing sequence", 30.0)
def criterion_3(res: CriterionResult, seed: int) -> None:
    m = levy.LevyModel(-2.0, 1.0)
    rows = levy.dual_sequence(m, 50)
    values = np.array([r.value for r in rows])
    limit = -math.exp(levy.cumulant(m, 1.0) * m.horizon)
    steps = np.diff(values)
    worst_step = float(steps.max())
    res.add("values nonincreasing in n", worst_step <= 0.0, worst_step, 0.0)
    res.add("values bounded below by -exp(kappa(1) T)", bool(np.all(values >= limit)), float(values.min() - limit), 0.0)
    gap_50 = float(abs(values[-1] - limit))
    res.add("final gap |value_50 - limit|", gap_50 < 1e-4, gap_50, 1e-4)
    resid = max(abs(r.residual_B2) for r in rows)
    res.add("martingale residual at every n", resid < 1e-7, resid, 1e-7)


@_timed(4, "no deflator ends at U'(-X_T)", 1.0)
def criterion_4(res: CriterionResult, seed: int) -> None:
    m = levy.LevyModel(-2.0, 1.0)
    A = m.A
    v = levy.deflator_nonexistence(m, 0.0, A / 2.0, 0.0)
    res.add("left side positive", v.lhs > 0, v.lhs, 0.0)
    res.add("right side forced nonpositive (x_t > c)", A / 2.0 > 0.0, A / 2.0, 0.0)
    res.add("verdict is a contradiction", v.contradiction, str(v.contradiction), "True")
    res.add("drift under Q-hat equals -A", abs(v.drift_q_hat + A) < 1e-7, abs(v.drift_q_hat + A), 1e-7)


# --------------------------------------------------------------------------
# countable gap market
# --------------------------------------------------------------------------


@_timed(5, "utility gap between C and its bipolar", 5.0)
def criterion_5(res: CriterionResult, seed: int) -> None:
    e = math.exp
    m40 = gap.GapMarket(40)
    cert = gap.gap_certificate(m40, seed=seed)
    comp = gap.completions(m40)
    mom1 = e(-4) + e(-2) + 1 - e(-5) - e(-1)
    mom2 = 2 * e(-3) + 1 - e(-5) - e(-1)
    res.add("u over C = -E[e^{-X}]", abs(cert.u_over_C + mom1) < 1e-12, abs(cert.u_over_C + mom1), 1e-12)
    res.add("u over bipolar = -E[e^{-2X}]", abs(cert.u_over_bipolar + mom2) < 1e-12, abs(cert.u_over_bipolar + mom2), 1e-12)
    res.add("strict gap", cert.strict_gap and cert.margin > 0.05, cert.margin, 0.05)
    res.add("sampled cone strategies stay below u over C", cert.sampled_below_bound, cert.sampled_max, cert.u_over_C)
    cv = abs(comp.corner_value - (e(-2) - e(-4)))
    res.add("corner value E[X e^{-X}] = e^-2 - e^-4", cv < 1e-12, cv, 1e-12)
    ent = abs(comp.entropy_full + math.log(gap.exponential_moment(m40, 2.0)))
    res.add("entropy of full completion = -ln E[e^{-2X}]", ent < 1e-12, ent, 1e-12)
    stab = 0.0
    a, b = gap.GapMarket(30), gap.GapMarket(60)
    ca, cb = gap.gap_certificate(a, seed=seed), gap.gap_certificate(b, seed=seed)
    qa, qb = gap.completions(a), gap.completions(b)
    for x, y in ((ca.u_over_C, cb.u_over_C), (ca.u_over_bipolar, cb.u_over_bipolar), (qa.corner_value, qb.corner_value), (qa.entropy_full, qb.entropy_full)):
        stab = max(stab, abs(x - y))
    res.add("stable between N = 30 and N = 60", stab < 1e-9, stab, 1e-9)


# --------------------------------------------------------------------------
# finite markets
# --------------------------------------------------------------------------


def random_market(rng: np.random.Generator, with_endowment: bool, max_states: int = 6, max_generators: int = 3) -> market.FiniteMarket:
    """Arbitrage-free market built around a random pricing density.

    Two-sided generators have zero price under the density; one-sided ones
    are shifted to a nonpositive price.
    """
    n = int(rng.integers(2, max_states + 1))
    k = int(rng.integers(1, max_generators + 1))
    p = rng.dirichlet(np.ones(n))
    z = rng.dirichlet(np.ones(n)) / p
    gens = []
    for _ in range(k):
        g = rng.normal(size=n)
        g = g - (p * z) @ g
        two = bool(rng.random() < 0.6)
        if not two:
            g = g - rng.random() * 0.3
        gens.append(market.Generator(g, two))
    b = rng.uniform(-0.5, 0.5, size=n) if with_endowment else np.zeros(n)
    return market.FiniteMarket(p, tuple(gens), b)


@_timed(6, "zero duality gap on random finite markets", 60.0)
def criterion_6(res: CriterionResult, seed: int) -> None:
    rng = np.random.default_rng(seed)
    worst = 0.0
    errors = 0
    utilities = (utility.exponential(), utility.log_utility())
    for i in range(200):
        m = random_market(rng, with_endowment=(i % 2 == 0))
        for u in utilities:
            try:
                gap_i = abs(market.solve_primal(m, u).value - market.solve_dual(m, u).value)
            except Exception:
                errors += 1
                continue
            worst = max(worst, gap_i)
    res.add("solver failures", errors == 0, errors, 0)
    res.add("max |primal - dual| over 400 solves", worst < 1e-6, worst, 1e-6)


@_timed(7, "complete-market value: 1-D minimization vs entropy formula", None)
def criterion_7(res: CriterionResult, seed: int) -> None:
    rng = np.random.default_rng(seed)
    u = utility.exponential()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 7))
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        z = q / p
        try:
            v = market.complete_market_value(p, z, u)
            worst = max(worst, abs(v.value - market.entropy_dual_value(p, z)))
        except AssertionError:
            worst = math.inf
    res.add("max |1-D route - closed form| over 50 pairs", worst < 1e-9, worst, 1e-9)
    v = market.complete_market_value([2 / 3, 1 / 3], [0.75, 1.5], u).value
    target = -2.0 * math.sqrt(2.0) / 3.0
    res.add("two-state value -2 sqrt 2 / 3", abs(v - target) < 1e-9, abs(v - target), 1e-9)


def brute_force_arbitrage(m: market.FiniteMarket, radius: int = 8) -> bool:
    """Exhaustive search for integer positions theta in [-radius, radius]^k with G theta >= 0, != 0."""
    G = m.G
    ranges = [range(0 if not two else -radius, radius + 1) for two in m.two_sided]
    for theta in itertools.product(*ranges):
        x = G @ np.array(theta, dtype=float)
        if np.all(x >= 0) and np.any(x > 0):
            return True
    return False


def random_integer_market(rng: np.random.Generator, n: int = 3) -> market.FiniteMarket:
    k = int(rng.integers(1, 4))
    gens = []
    while len(gens) < k:
        g = rng.integers(-2, 3, size=n).astype(float)
        if np.any(g != 0):
            gens.append(market.Generator(g, bool(rng.random() < 0.5)))
    return market.FiniteMarket(rng.dirichlet(np.ones(n)), tuple(gens))


@_timed(8, "no-arbitrage LP vs exhaustive grid", None)
def criterion_8(res: CriterionResult, seed: int) -> None:
    rng = np.random.default_rng(seed)
    disagree = 0
    for _ in range(100):
        m = random_integer_market(rng)
        lp = market.check_no_arbitrage(m).arbitrage_free
        if lp == brute_force_arbitrage(m):
            disagree += 1
    res.add("disagreements on 100 three-state markets", disagree == 0, disagree, 0)


# --------------------------------------------------------------------------
# convex analysis and Orlicz spaces
# --------------------------------------------------------------------------


def _oracle_functions():
    return {
        "x^2": lambda x: x**2,
        "|x|": np.abs,
        "e^x": np.exp,
        "x^4": lambda x: x**4,
        "max(x, 2x - 1)": lambda x: np.maximum(x, 2 * x - 1),
        "x ln x": lambda x: np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), np.where(x == 0, 0.0, np.inf)),
    }


@_timed(9, "Fenchel-Moreau and the convolution identity on grids", 30.0)
def criterion_9(res: CriterionResult, seed: int) -> None:
    grid = np.linspace(-2.0, 2.0, 801)
    h = float(grid[1] - grid[0])
    worst_ratio = 0.0
    for name, f in _oracle_functions().items():
        gf = convex.GridFunction.sample(f, grid)
        dev = convex.biconjugate_check(gf)
        worst_ratio = max(worst_ratio, dev / h)
    res.add("max biconjugation deviation / h (convex samples)", worst_ratio < 1.0, worst_ratio, 1.0)
    nc = convex.GridFunction.sample(lambda x: np.cos(3 * x) + 0.2 * x**2, grid, check=False)
    hull = convex.closed_hull(nc)
    fin = np.isfinite(hull.values)
    dev = float(np.max(np.abs(convex.biconjugate(nc).values[fin] - hull.values[fin])))
    res.add("non-convex biconjugate equals closed hull within h", dev < h, dev, h)

    rng = np.random.default_rng(seed)
    x = np.linspace(-1.0, 1.0, 201)
    worst = 0.0
    for _ in range(50):
        fs = []
        for _ in range(2):
            kind = int(rng.integers(0, 3))
            a, b, c = rng.uniform(0.2, 2.0), rng.uniform(-1, 1), rng.uniform(-1, 1)
            if kind == 0:
                vals = a * x**2 + b * x + c
            elif kind == 1:
                vals = a * np.abs(x - 0.3 * b) + c
            else:
                vals = a * np.exp(b * x) + c
            fs.append(convex.GridFunction(x, vals))
        dual = np.linspace(-3.0, 3.0, 121)
        worst = max(worst, convex.conjugate_of_convolution_gap(fs[0], fs[1], dual))
    res.add("max |(f conv g)* - (f* + g*)| over 50 pairs", worst < 1e-9, worst, 1e-9)


@_timed(10, "gauge norms, Delta-2 and the shock table", None)
def criterion_10(res: CriterionResult, seed: int) -> None:
    rng = np.random.default_rng(seed)
    youngs = [orlicz.exponential_young(), orlicz.power_young(2.0), orlicz.power_young(1.5)]
    hom, mono = 0.0, 0
    for i in range(500):
        phi = youngs[i % len(youngs)]
        n = int(rng.integers(1, 8))
        p = rng.dirichlet(np.ones(n))
        xv = rng.normal(scale=2.0, size=n)
        c = float(rng.uniform(-5.0, 5.0)) or 1.0
        X = orlicz.FiniteRandomVariable(xv, p)
        nx = orlicz.gauge_norm(phi, X)
        ncx = orlicz.gauge_norm(phi, X.scaled(c))
        hom = max(hom, abs(ncx - abs(c) * nx) / max(1e-300, abs(c) * nx))
        bigger = orlicz.FiniteRandomVariable(np.sign(xv) * (np.abs(xv) + rng.uniform(0, 1, size=n)), p)
        if orlicz.gauge_norm(phi, bigger) < nx * (1 - 1e-12):
            mono += 1
    res.add("homogeneity relative error over 500 instances", hom < 1e-9, hom, 1e-9)
    res.add("monotonicity violations over 500 instances", mono == 0, mono, 0)

    d_pow = orlicz.delta2_check(orlicz.power_young(2.0), 1.0)
    res.add("Delta-2 holds for power", d_pow.satisfied, str(d_pow.satisfied), "True")
    d_exp = orlicz.delta2_check(orlicz.exponential_young(), 1.0)
    res.add("Delta-2 fails for exponential with witness", (not d_exp.satisfied) and d_exp.witness is not None, str(d_exp.witness), "witness")

    rows = gap.shock_table()
    mod_err = max(abs(r.modular_half - r.modular_half_closed) for r in rows)
    norm_err = max(abs(r.norm.value - r.norm_closed) for r in rows)
    res.add("series modular vs closed form", mod_err < 1e-6, mod_err, 1e-6)
    res.add("series norm vs closed form", norm_err < 1e-6, norm_err, 1e-6)
    mods = [r.modular_half for r in rows]
    res.add("modular of Y_k / 2 decreases to 0", all(b < a for a, b in zip(mods, mods[1:])) and mods[-1] < 1e-10, mods[-1], 1e-10)
    norms = [r.norm.value for r in rows]
    res.add("norm of Y_k stays >= 1 and decreases toward 1", min(norms) >= 1 - 1e-6 and all(b < a for a, b in zip(norms, norms[1:])), norms[-1], 1.0)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def run_all(seed: int = 0, only: list[int] | None = None) -> list[CriterionResult]:
    out = []
    for i, fn in enumerate(CRITERIA, start=1):
        if only and i not in only:
            continue
        out.append(fn(seed))
    return out
