import math

import numpy as np
import pytest

from orlicz_duality import utility
from orlicz_duality.errors import DegenerateUtility
from orlicz_duality.utility import CaseTag

NAMED = {
    "exponential": utility.exponential(),
    "exponential_rate2": utility.exponential(2.0),
    "log": utility.log_utility(),
    "power": utility.power(0.5),
    "quadratic": utility.quadratic(),
    "truncated_quadratic": utility.truncated_quadratic(2.0),
}


def test_normalize_exponential():
    un = utility.normalize(utility.exponential())
    xs = np.linspace(-3, 3, 13)
    assert np.allclose(un.u(xs), 1 - np.exp(-xs), atol=1e-15)
    ys = np.array([0.25, 1.0, 3.0])
    assert np.allclose(un.v(ys), ys * np.log(ys) - ys + 1, atol=1e-14)
    assert un.u(0.0) == 0.0


def test_normalize_identity_on_normalized_piecewise():
    u = utility.domar_musgrave()
    assert u.u(0.0) == 0.0
    un = utility.normalize(u)
    xs = np.linspace(-2, 2, 9)
    assert np.array_equal(un.u(xs), u.u(xs))


def test_normalize_truncated_quadratic():
    un = utility.normalize(utility.quadratic())
    xs = np.array([-1.0, 0.0, 0.5, 1.0, 2.0, 5.0])
    expected = np.where(xs <= 1, (1 - (1 - xs) ** 2) / 2, 0.5)
    assert np.allclose(un.u(xs), expected, atol=1e-15)
    assert un.x_bliss == 1.0


def test_normalize_degenerate_raises():
    const = utility.custom(lambda x: 0.0, lambda x: 0.0, x_lower=0.0)
    with pytest.raises((DegenerateUtility, ValueError)):
        utility.normalize(const)


def test_exponential_conjugate():
    u = utility.exponential()
    assert u.v(1.0) == pytest.approx(-1.0, abs=1e-15)
    ys = np.array([0.5, 2.0, 7.0])
    assert np.allclose(u.v(ys), ys * np.log(ys) - ys, atol=1e-14)


def test_linear_conjugate():
    u = utility.linear(1.0)
    assert u.v(1.0) == 0.0
    assert math.isinf(u.v(0.5)) and math.isinf(u.v(2.0))


def test_custom_conjugate_matches_closed_form():
    c = utility.custom(lambda x: -math.exp(-x), lambda x: math.exp(-x))
    e = utility.exponential()
    for y in (0.5, 1.0, 2.0):
        assert abs(c.v(y) - e.v(y)) < 1e-8


@pytest.mark.parametrize(
    "u, tag",
    [
        (utility.exponential(), CaseTag.SL_F),
        (utility.log_utility(), CaseTag.SL_INF),
        (utility.domar_musgrave(), CaseTag.L_F),
        (utility.power(0.5), CaseTag.SL_INF),
        (utility.quadratic(), CaseTag.SL_F),
    ],
)
def test_classify_case(u, tag):
    assert utility.classify_case(u) is tag


@pytest.mark.parametrize("name", sorted(NAMED))
def test_right_derivative_at_zero(name):
    u = NAMED[name]
    h = 1e-5
    fd = (u.u(h) - u.u(-h)) / (2 * h)
    assert abs(fd - u.a) < 1e-8 * max(1.0, abs(u.a)) + 1e-9


@pytest.mark.parametrize("name", sorted(NAMED))
def test_fenchel_inequality_and_equality(name):
    u = NAMED[name]
    lo = u.x_lower + 0.05 if math.isfinite(u.x_lower) else -3.0
    hi = min(3.0, u.x_bliss - 0.05) if math.isfinite(u.x_bliss) else 3.0
    xs = np.linspace(lo, hi, 20)
    ys = np.linspace(0.05, 4.0, 30)
    gap = u.v(ys)[None, :] + np.outer(xs, ys) - u.u(xs)[:, None]
    assert gap.min() > -1e-12
    slopes = u.du(xs)
    eq = u.v(slopes) + xs * slopes - u.u(xs)
    assert np.max(np.abs(eq)) < 1e-10


@pytest.mark.parametrize("name", ["exponential", "log", "power", "quadratic"])
def test_biconjugation_recovers_u(name):
    u = NAMED[name]
    lo = u.x_lower + 0.1 if math.isfinite(u.x_lower) else -2.0
    xs = np.linspace(lo, 0.9, 15)
    ys = np.geomspace(1e-3, 1e3, 20001)
    vs = u.v(ys)
    back = np.min(vs[None, :] + np.outer(xs, ys), axis=1)
    assert np.max(np.abs(back - u.u(xs))) < 1e-6


@pytest.mark.parametrize("name", sorted(NAMED))
def test_concave_and_nondecreasing(name):
    u = NAMED[name]
    lo = u.x_lower + 1e-3 if math.isfinite(u.x_lower) else -5.0
    xs = np.linspace(lo, 5.0, 400)
    vals = u.u(xs)
    assert np.all(np.diff(vals) >= -1e-14)
    assert np.all(np.diff(vals, 2) <= 1e-12)


def test_young_function_axioms():
    for u in NAMED.values():
        phi = utility.conjugate(u).u_hat
        top = min(5.0, -u.x_lower - 1e-3) if np.isfinite(u.x_lower) else 5.0
        xs = np.linspace(0, top, 101)
        vals = phi(xs)
        assert phi(0.0) == 0.0
        assert np.allclose(phi(-xs), vals)
        assert np.all(np.diff(vals) >= -1e-14)
        assert np.all(np.diff(vals, 2) >= -1e-12)


def test_v_hat_flat_below_a():
    u = utility.exponential(2.0)
    pair = utility.conjugate(u)
    un = utility.normalize(u)
    a = pair.a
    ys = np.linspace(0, a, 7)
    assert np.allclose(pair.v_hat(ys), un.v(a))
    big = np.array([a, 2 * a, 5 * a])
    assert np.allclose(pair.v_hat(big), un.v(big))


def test_superlinear_growth_matches_case():
    exp_hat = utility.conjugate(utility.exponential()).u_hat
    ratios = [exp_hat(x) / x for x in (10.0, 20.0, 40.0)]
    assert ratios[0] < ratios[1] < ratios[2]
    dm_hat = utility.conjugate(utility.domar_musgrave()).u_hat
    assert max(dm_hat(x) / x for x in (10.0, 20.0, 40.0)) <= 2.0 + 1e-12


def test_json_round_trip():
    for u in (utility.exponential(1.5), utility.log_utility(2.0), utility.quadratic(), utility.normalize(utility.power(0.3))):
        back = utility.UtilitySpec.from_dict(u.to_dict())
        xs = np.linspace(-0.5, 0.5, 5)
        assert np.allclose(back.u(xs), u.u(xs))


def test_custom_not_serializable():
    c = utility.custom(lambda x: -math.exp(-x), lambda x: math.exp(-x))
    with pytest.raises(ValueError):
        c.to_dict()


def test_subgradient_dependence():
    assert utility.is_subgradient_dependent(utility.domar_musgrave(), [0.0])
    assert not utility.is_subgradient_dependent(utility.exponential(), [0.0, 1.0])
