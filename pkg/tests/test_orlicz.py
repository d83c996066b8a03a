import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_duality import gap, orlicz
from orlicz_duality.errors import NonFiniteNorm, TailBoundUnavailable
from orlicz_duality.orlicz import FiniteRandomVariable, SeriesRandomVariable

EXP = orlicz.exponential_young()
COIN = FiniteRandomVariable([1.0, -1.0], [0.5, 0.5])


def test_modular_coin():
    assert orlicz.modular(EXP, COIN) == pytest.approx(math.e - 1, rel=1e-15)


def test_modular_zero():
    assert orlicz.modular(EXP, FiniteRandomVariable([0.0, 0.0], [0.3, 0.7])) == 0.0
    assert orlicz.gauge_norm(EXP, FiniteRandomVariable([0.0], [1.0])) == 0.0


@pytest.mark.parametrize("k", [2, 5, 20])
def test_shock_modular_diverges_at_scaling_one(k):
    assert math.isinf(orlicz.modular(EXP, gap.tail_shock_series(k)))


def test_gauge_coin():
    lam = orlicz.gauge_norm(EXP, COIN)
    assert lam == pytest.approx(1 / math.log(2), rel=1e-13)
    assert abs(orlicz.modular(EXP, COIN.scaled(1 / lam)) - 1) < 1e-10


def test_gauge_power_two_is_l2():
    assert orlicz.gauge_norm(orlicz.power_young(2.0), FiniteRandomVariable([3.0], [1.0])) == pytest.approx(3.0, rel=1e-14)


@pytest.mark.parametrize("c", [0.5, 2.0, -3.0])
def test_homogeneity(c, rng):
    for _ in range(20):
        x = FiniteRandomVariable(rng.normal(size=5), rng.dirichlet(np.ones(5)))
        n = orlicz.gauge_norm(EXP, x)
        assert abs(orlicz.gauge_norm(EXP, x.scaled(c)) - abs(c) * n) < 1e-8 * max(1.0, abs(c) * n)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-20, 20, allow_nan=False), min_size=1, max_size=6),
    st.lists(st.floats(0, 3, allow_nan=False), min_size=6, max_size=6),
    st.integers(0, 2**31 - 1),
)
def test_monotone(xs, bumps, seed):
    rng = np.random.default_rng(seed)
    xs = np.array(xs)
    p = rng.dirichlet(np.ones(len(xs)))
    ys = np.sign(xs) * (np.abs(xs) + np.array(bumps[: len(xs)]))
    for phi in (EXP, orlicz.power_young(1.5)):
        nx = orlicz.gauge_norm(phi, FiniteRandomVariable(xs, p))
        ny = orlicz.gauge_norm(phi, FiniteRandomVariable(ys, p))
        assert nx <= ny * (1 + 1e-12) + 1e-300


def test_unit_modular_at_norm(rng):
    for _ in range(50):
        x = FiniteRandomVariable(rng.normal(scale=3, size=4), rng.dirichlet(np.ones(4)))
        if x.is_zero:
            continue
        n = orlicz.gauge_norm(EXP, x)
        assert abs(orlicz.modular(EXP, x.scaled(1 / n)) - 1) < 1e-10


def test_delta2_power():
    r = orlicz.delta2_check(orlicz.power_young(2.0), 1.0)
    assert r.satisfied and r.constant == pytest.approx(4.0, rel=1e-12)


def test_delta2_exponential_fails_with_witness():
    r = orlicz.delta2_check(EXP, 1.0)
    assert not r.satisfied and r.witness is not None
    assert EXP(60.0) / EXP(30.0) > 0.9 * math.exp(30)
    assert "heart" in r.note


def test_delta2_x2_log():
    phi = orlicz.YoungFunction("x^2 ln(e+x)", lambda x: np.abs(x) ** 2 * np.log(np.e + np.abs(x)))
    r = orlicz.delta2_check(phi, 1.0, np.geomspace(2.0, 2e6, 600))
    assert r.satisfied and r.constant <= 8.0


def test_delta2_grid_validation():
    with pytest.raises(ValueError):
        orlicz.delta2_check(EXP, 1.0, np.linspace(2, 20, 10))
    with pytest.raises(ValueError):
        orlicz.delta2_check(EXP, 5.0, np.geomspace(1, 1e4, 10))


def test_modular_vs_norm_on_shocks():
    rep = orlicz.modular_vs_norm_convergence(EXP, gap.tail_shock_series, [2, 4, 8, 16, 32])
    assert rep.modular_to_zero and rep.norm_not_to_zero
    mods = [row[0] for row in rep.modulars]
    assert all(b < a for a, b in zip(mods, mods[1:]))
    norms = [n.value for n in rep.norms]
    assert min(norms) >= 1 - 1e-6
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_modular_vs_norm_zero_sequence():
    zero = SeriesRandomVariable(lambda i: (np.zeros(len(i)), np.zeros(len(i))), lambda i, s: 0.0, identically_zero=True)
    rep = orlicz.modular_vs_norm_convergence(EXP, lambda k: zero, [2, 3, 4])
    assert all(row[0] == 0.0 for row in rep.modulars)
    assert all(n.value == 0.0 for n in rep.norms)


def test_shock_norm_matches_closed_form():
    for row in gap.shock_table():
        assert abs(row.norm.value - row.norm_closed) < 1e-6
        assert abs(row.modular_half - row.modular_half_closed) < 1e-6


def test_series_without_tail_bound():
    x = SeriesRandomVariable(lambda i: (np.asarray(i, float), np.exp(-np.asarray(i, float) - 1.0)), lambda i, s: None)
    with pytest.raises(TailBoundUnavailable):
        orlicz.modular(EXP, x.scaled(0.5))


def test_non_finite_norm():
    x = SeriesRandomVariable(lambda i: (np.asarray(i, float), np.full(len(i), 0.0)), lambda i, s: math.inf)
    with pytest.raises(NonFiniteNorm):
        orlicz.gauge_norm(EXP, x)


def test_holder_examples():
    quad = orlicz.YoungFunction("x^2/2", lambda x: np.asarray(x, float) ** 2 / 2)
    y = FiniteRandomVariable([1.0, 1.0], [0.5, 0.5])
    assert orlicz.holder_check(COIN, y, quad, quad)
    zero = FiniteRandomVariable([0.0, 0.0], [0.5, 0.5])
    assert orlicz.holder_check(zero, y, quad, quad)


def test_holder_random_exponential(rng):
    psi = orlicz.entropic_young()
    for _ in range(1000):
        p = rng.dirichlet(np.ones(5))
        x = FiniteRandomVariable(rng.normal(scale=2, size=5), p)
        y = FiniteRandomVariable(rng.normal(scale=2, size=5), p)
        assert orlicz.holder_check(x, y, EXP, psi)


def test_membership_finite_space():
    m = orlicz.membership(EXP, COIN)
    assert m.in_orlicz_space and m.in_heart and "finite" in m.reason


def test_membership_shock_not_in_heart():
    m = orlicz.membership(EXP, gap.tail_shock_series(3))
    assert m.in_orlicz_space and not m.in_heart


def test_parse_young():
    assert orlicz.parse_young("power:3")(2.0) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        orlicz.parse_young("cosh")


def test_probs_validated():
    with pytest.raises(ValueError):
        FiniteRandomVariable([1.0, 2.0], [0.5, 0.6])
