import math

import numpy as np
import pytest

from orlicz_duality import levy
from orlicz_duality.errors import InteriorOptimum, QuadratureFailure

M = levy.LevyModel(-2.0, 1.0)
LIMIT = -math.exp(math.exp(-0.5) - 2.0)


@pytest.fixture(scope="module")
def rows():
    return levy.dual_sequence(M, 50)


def test_cumulant_at_zero():
    assert levy.cumulant(M, 0.0) == 0.0


def test_cumulant_at_one():
    assert levy.cumulant(M, 1.0) == pytest.approx(math.exp(-0.5) - 2.0, abs=1e-15)
    assert abs(levy.cumulant_by_quadrature(M, 1.0) - (math.exp(-0.5) - 2.0)) < 1e-8


def test_cumulant_infinite_beyond_one():
    assert math.isinf(levy.cumulant(M, 1.01))


@pytest.mark.parametrize("v", [-3.0, -1.0, 0.0, 0.5, 0.9, 1.0])
def test_cumulant_quadrature(v):
    assert abs(levy.cumulant(M, v) - levy.cumulant_by_quadrature(M, v)) < 1e-8


def test_cumulant_derivative_matches_difference():
    h = 1e-6
    for v in (-2.0, 0.0, 0.7):
        fd = (levy.cumulant(M, v + h) - levy.cumulant(M, v - h)) / (2 * h)
        assert abs(fd - levy.cumulant_derivative(M, v)) < 1e-7


def test_moment_integral():
    assert abs(levy.moment_integral() - (2 - 0.5 / math.sqrt(math.e))) < 1e-8


def test_corner_at_default_drift():
    ca = levy.corner_analysis(M)
    assert ca.interior_root is None and ca.optimal_theta == -1.0
    assert ca.A == pytest.approx(0.5 / math.sqrt(math.e), abs=1e-15)
    assert abs(ca.A - ca.A_quadrature) < 1e-7
    assert ca.optimal_value == pytest.approx(LIMIT, abs=1e-15)


def test_interior_optimum_reported():
    with pytest.raises(InteriorOptimum) as info:
        levy.corner_analysis(levy.LevyModel(-1.0))
    root = info.value.root
    assert root > -1 and abs(levy.foc(levy.LevyModel(-1.0), root)) < 1e-10


def test_threshold():
    assert levy.THRESHOLD == pytest.approx(-2 + 0.5 / math.sqrt(math.e), abs=1e-15)
    assert round(levy.THRESHOLD, 1) == -1.7
    assert levy.LevyModel(levy.THRESHOLD - 1e-9).standing_assumption
    assert not levy.LevyModel(levy.THRESHOLD).standing_assumption


def test_expected_utility_uses_horizon():
    m2 = levy.LevyModel(-2.0, 2.0)
    assert levy.expected_utility(m2, -1.0) == pytest.approx(-math.exp(2 * levy.cumulant(m2, 1.0)), rel=1e-15)
    assert levy.expected_utility(M, -1.0) == pytest.approx(LIMIT, rel=1e-15)
    assert levy.expected_utility(M, -1.5) == -math.inf


def test_K_n(rows):
    for r in rows:
        assert r.K_n == pytest.approx(M.A / (r.n + 0.5), rel=1e-15)


def test_martingale_residual(rows):
    assert max(abs(r.residual_B2) for r in rows) < 1e-7


def test_log_drift_cancellation(rows):
    assert max(abs(r.drift_lnZ_Q - r.B_n - r.C_n) for r in rows) < 1e-7


def test_entropy_route(rows):
    assert max(abs(r.value - r.value_entropy_route) for r in rows[:10]) < 1e-7


def test_B_C_nonnegative_and_eventually_decreasing(rows):
    B = np.array([r.B_n for r in rows])
    C = np.array([r.C_n for r in rows])
    assert np.all(B >= 0) and np.all(C >= 0)
    assert np.all(np.diff(B[2:]) < 0) and np.all(np.diff(C[2:]) < 0)


def test_values_bounded_below(rows):
    assert all(r.value >= LIMIT for r in rows)


def test_values_nonincreasing(rows):
    v = np.array([r.value for r in rows])
    assert np.all(np.diff(v) <= 0)


def test_final_gap(rows):
    assert abs(rows[-1].value - LIMIT) < 1e-4


def test_B_C_small_at_ten(rows):
    r = rows[9]
    assert r.n == 10
    assert r.B_n < math.exp(-9) and r.C_n < math.exp(-9)


def test_values_approach_limit_slowly(rows):
    gaps = [r.value - LIMIT for r in rows]
    assert all(b < a for a, b in zip(gaps[5:], gaps[6:]))


def test_thread_count_does_not_change_rows(monkeypatch):
    monkeypatch.setenv("ORLICZ_DUALITY_THREADS", "1")
    a = levy.dual_sequence(M, 8)
    monkeypatch.setenv("ORLICZ_DUALITY_THREADS", "4")
    b = levy.dual_sequence(M, 8)
    assert a == b


def test_sequence_requires_assumption():
    with pytest.raises(InteriorOptimum):
        levy.dual_sequence(levy.LevyModel(-1.0), 3)
    with pytest.raises(ValueError):
        levy.dual_sequence(M, 0)


def test_deflator_contradiction():
    v = levy.deflator_nonexistence(M, 0.0, M.A / 2, 0.0)
    assert v.contradiction and v.lhs > 0
    assert abs(v.drift_q_hat + M.A) < 1e-7
    assert v.window[0] == 0.0 and v.window[1] == pytest.approx(M.A, abs=1e-12)


def test_deflator_below_window():
    v = levy.deflator_nonexistence(M, 0.0, -1.0, 0.0)
    assert not v.contradiction


def test_deflator_argument_checks():
    with pytest.raises(ValueError):
        levy.deflator_nonexistence(M, -1.0, 0.1, 0.0)
    with pytest.raises(ValueError):
        levy.deflator_nonexistence(M, 0.0, 0.1, 1.0)


def test_quadrature_failure_is_reported():
    with pytest.raises(QuadratureFailure) as info:
        levy._quad(lambda x: 1.0 / x, 0.0, 1.0)
    assert info.value.interval == (0.0, 1.0)


def test_density():
    assert levy.levy_density(-1.0) == 0.0
    x = 2.0
    assert levy.levy_density(x) == pytest.approx(3 / (4 * math.sqrt(math.pi)) * x**-2.5 * math.exp(-x), rel=1e-15)
