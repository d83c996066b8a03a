import math

import numpy as np
import pytest

from orlicz_duality import gap, orlicz
from orlicz_duality.errors import IndexOutOfTruncation

e = math.exp
M40 = gap.GapMarket(40)
MOM1 = e(-4) + e(-2) + 1 - e(-5) - e(-1)
MOM2 = 2 * e(-3) + 1 - e(-5) - e(-1)


def test_residual_mass_positive():
    assert gap.P_ZERO == pytest.approx(1 - 2 / (e(2) - e(1)) - e(-1) - e(-5), abs=1e-15)
    assert gap.P_ZERO > 0


@pytest.mark.parametrize("N", [5, 10, 30])
def test_truncation_mass_defect(N):
    m = gap.GapMarket(N)
    assert 0 < m.mass_defect < e(-N + 1)


def test_moment_at_zero():
    assert gap.exponential_moment(M40, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_moment_closed_form():
    for lam in (-1.0, 0.5, 1.0, 2.0, 3.0):
        closed = e(-5) * e(lam) + e(-1) * e(-lam) + (1 - e(-5) - e(-1))
        assert abs(gap.exponential_moment(M40, lam) - closed) < 1e-15


def test_argmin_is_two():
    lam = gap.exponential_moment_argmin(M40)
    assert lam == pytest.approx(2.0, abs=1e-12)
    assert abs(e(-5) * e(lam) - e(-1) * e(-lam)) < 1e-15


def test_moment_values():
    m1, m2 = gap.exponential_moment(M40, 1.0), gap.exponential_moment(M40, 2.0)
    assert abs(m1 - MOM1) < 1e-15 and abs(m2 - MOM2) < 1e-15
    assert m1 == pytest.approx(0.77902, abs=2e-4)
    assert m2 == pytest.approx(0.72503, abs=2e-4)
    assert m1 - m2 == pytest.approx(0.054, abs=1e-3) and m1 > m2


def test_completions():
    c = gap.completions(M40)
    assert c.corner_value == pytest.approx(e(-2) - e(-4), abs=1e-15)
    assert c.corner_value > 0.117
    assert c.separating_residual < 1e-12
    assert c.value_identity_residual < 1e-12
    assert c.entropy_full == pytest.approx(-math.log(MOM2), abs=1e-12)
    assert c.entropy_full == pytest.approx(0.32154, abs=2e-4)
    assert abs(M40.expect(c.full) - 1) < 1e-15 and abs(M40.expect(c.effective) - 1) < 1e-15


def test_conditional_mean_exactly_zero():
    for k in (2, 5, 17, 40):
        assert gap.conditional_shock_mean(M40, k) == 0.0


def test_mechanics_boundary_growth():
    r = gap.gap_mechanics(M40, [(2, 1.0)])
    assert r.xi_final == 1.0 and not r.finite_in_limit
    assert r.growth_increasing
    vals = [r.growth[N] for N in (10, 20, 40)]
    assert vals[2] - vals[1] > vals[1] - vals[0] > 0


def test_mechanics_half_stabilizes():
    r = gap.gap_mechanics(M40, [(2, 0.5)], truncations=(20, 40))
    assert abs(r.growth[40] - r.growth[20]) < 1e-10


def test_mechanics_half_geometric_tail():
    r = gap.gap_mechanics(M40, [(2, 0.5)], truncations=(20, 40))
    # states -n contribute e^{-n/2}, states +n contribute e^{-3n/2}
    tail = sum(e(-n / 2) + e(-1.5 * n) for n in range(21, 41))
    assert r.growth[40] - r.growth[20] == pytest.approx(tail, rel=1e-10)


def test_mechanics_jensen_chain():
    r = gap.gap_mechanics(M40, [(2, 0.3), (5, -0.6), (9, 0.2)])
    assert r.jensen_chain and r.finite_in_limit
    assert r.xi == pytest.approx([0.3, -0.3, -0.1], abs=1e-15)
    assert r.moment_z >= r.moment_xi >= r.moment_x


def test_mechanics_rejects_index_beyond_truncation():
    with pytest.raises(IndexOutOfTruncation):
        gap.gap_mechanics(gap.GapMarket(10), [(11, 0.5)])
    with pytest.raises(ValueError):
        gap.gap_mechanics(M40, [(3, 0.5), (3, 0.1)])


def test_certificate():
    c = gap.gap_certificate(M40)
    assert c.u_over_C == pytest.approx(-MOM1, abs=1e-15)
    assert c.u_over_bipolar == pytest.approx(-MOM2, abs=1e-15)
    assert c.strict_gap and c.margin > 0.05
    assert c.lam_bipolar == pytest.approx(2.0, abs=1e-12) and c.lam_C == 1.0


def test_sampled_strategies_below_bound():
    m = gap.GapMarket(30)
    c = gap.gap_certificate(m, n_samples=200, seed=7)
    assert c.sampled_below_bound and c.sampled_max <= c.u_over_C + 1e-9


def test_sampled_partial_sums_capped():
    for coeffs in gap.sample_cone_strategies(M40, 100, seed=3):
        xi = np.cumsum([lam for _, lam in coeffs])
        assert np.all(np.abs(xi) <= 0.999)


def test_truncation_stability():
    a, b = gap.GapMarket(30), gap.GapMarket(60)
    ca, cb = gap.completions(a), gap.completions(b)
    ga, gb = gap.gap_certificate(a), gap.gap_certificate(b)
    for x, y in ((ca.corner_value, cb.corner_value), (ca.entropy_full, cb.entropy_full), (ga.u_over_C, gb.u_over_C), (ga.u_over_bipolar, gb.u_over_bipolar)):
        assert abs(x - y) < 1e-9


def test_shock_norms_above_one_and_decreasing():
    rows = gap.shock_table()
    norms = [r.norm.value for r in rows]
    assert min(norms) >= 1 - 1e-6
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1.1


def test_shock_modular_closed_form():
    y = gap.tail_shock_series(6)
    phi = orlicz.exponential_young()
    for s in (0.25, 0.5, 0.9):
        assert orlicz.modular(phi, y.scaled(s)) == pytest.approx(gap.shock_modular_closed_form(6, s), rel=1e-10)
    assert math.isinf(gap.shock_modular_closed_form(6, 1.0))


def test_heavy_variant():
    m = gap.GapMarket(40, heavy_tail_weight=0.005)
    assert m.moment_order == 1.5
    assert gap.exponential_moment_argmin(m) == 1.5
    assert m.expect(m.x * np.exp(-1.5 * m.x)) > 0
    assert abs(m.probs.sum() - M40.probs.sum()) < 1e-15


def test_invalid_markets():
    with pytest.raises(ValueError):
        gap.GapMarket(1)
    with pytest.raises(ValueError):
        gap.GapMarket(10, heavy_tail_weight=0.5)
    with pytest.raises(IndexOutOfTruncation):
        gap.GapMarket(10).y_k(11)
