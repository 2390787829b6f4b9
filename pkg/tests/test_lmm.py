import math

import numpy as np
import pytest

from qlmm.lmm import (
    EULER,
    IvpSpec,
    LmmCoefficients,
    absolutely_stable,
    absolutely_stable_all,
    consistency_order,
    consistency_residuals,
    error_constant,
    euler_step,
    integrate,
    jury_condition,
    lmm_step,
    polynomial_roots,
    rk4_step,
    stability_polynomial,
    zero_stable,
)
from qlmm.optimizer import coefficients_for
from qlmm.reference import BALLISTIC_COEFFS, SPRING_COEFFS
from qlmm.scenarios import spring_mass_damper


def scalar_ivp(rate=1.0, const=None):
    if const is None:
        deriv = lambda t, x, p: rate * x
    else:
        deriv = lambda t, x, p: np.full_like(x, const)
    return IvpSpec(1, deriv, lambda p: np.array([1.0]), 0.0, 1.0,
                   u=[1.0], l=[0.0], x0_max=[1.0], x0_min=[1.0])


def test_coefficients_validate_lengths():
    with pytest.raises(ValueError):
        LmmCoefficients((-1.0, 0.0), (1.0,))
    with pytest.raises(ValueError):
        LmmCoefficients((), ())


def test_euler_examples():
    zero = scalar_ivp(0.0)
    assert euler_step([2.5], 0.0, 0.1, zero, None)[0] == 2.5
    assert euler_step([1.0], 0.0, 0.1, scalar_ivp(1.0), None)[0] == pytest.approx(1.1, abs=1e-15)
    ivp, _ = spring_mass_damper()
    out = euler_step([0.0, 1.0], 0.0, 0.01, ivp, {"p_m": 1.0, "p_k": 40.0, "p_c": 13.0})
    np.testing.assert_allclose(out, [0.01, 0.87], atol=1e-15)


def test_rk4_examples():
    assert rk4_step([1.0], 0.0, 0.1, scalar_ivp(1.0), None)[0] == pytest.approx(
        1 + 0.1 + 0.01 / 2 + 0.001 / 6 + 0.0001 / 24, abs=1e-15)
    assert rk4_step([3.0], 0.0, 0.25, scalar_ivp(const=2.0), None)[0] == 3.5
    assert rk4_step([3.0], 0.0, 0.25, scalar_ivp(0.0), None)[0] == 3.0


def test_rk4_local_error_is_fifth_order():
    ivp = scalar_ivp(1.0)
    errs = [abs(rk4_step([1.0], 0.0, h, ivp, None)[0] - math.exp(h)) for h in (0.2, 0.1, 0.05)]
    for big, small in zip(errs, errs[1:]):
        assert 28 <= big / small <= 36


def test_lmm_step_reduces_to_euler():
    ivp = scalar_ivp(1.0)
    x, fx = np.array([1.3]), ivp.f(0.0, [1.3], None)
    assert lmm_step([x], [fx], EULER, 0.1)[0] == euler_step(x, 0.0, 0.1, ivp, None)[0]


def test_lmm_step_preserves_constants():
    out = lmm_step([[4.0], [4.0]], [[0.0], [0.0]], BALLISTIC_COEFFS, 0.05)
    assert out[0] == 4.0


def test_lmm_step_on_exponential():
    for h in (0.02, 0.01):
        xs = [[math.exp(i * h)] for i in range(3)]
        out = lmm_step(xs, xs, SPRING_COEFFS, h)[0]
        # the quoted coefficients leave a 1e-4 first-order residual
        assert abs(out - math.exp(3 * h)) < 1e-4 * h + 2 * h ** 3


def test_lmm_step_is_linear():
    rng = np.random.default_rng(0)
    xs, fs = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    ys, gs = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    left = lmm_step(xs + 2 * ys, fs + 2 * gs, SPRING_COEFFS, 0.1)
    right = lmm_step(xs, fs, SPRING_COEFFS, 0.1) + 2 * lmm_step(ys, gs, SPRING_COEFFS, 0.1)
    np.testing.assert_allclose(left, right, atol=1e-12)


def test_integrate_shape_and_prefix():
    ivp = scalar_ivp(1.0)
    traj = integrate(ivp, None, SPRING_COEFFS, 0.1, 5)
    assert traj.shape == (8, 1)
    assert traj[1, 0] == rk4_step([1.0], 0.0, 0.1, ivp, None)[0]


def test_consistency_orders():
    assert consistency_order(EULER) == 1
    assert consistency_order(BALLISTIC_COEFFS) == 1
    assert consistency_order(SPRING_COEFFS, tol=1e-3) == 2
    res = consistency_residuals(SPRING_COEFFS, 2)
    assert abs(res[0]) < 1e-12 and abs(res[1]) < 2e-4 and abs(res[2]) < 1e-3


def test_error_constant_of_euler():
    assert error_constant(EULER, 1) == pytest.approx(0.5)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_constrained_family_reaches_order_k_minus_one(k):
    rng = np.random.default_rng(k)
    for _ in range(5):
        coeffs = coefficients_for(k, 1, rng.uniform(-0.5, 0.5, size=k - 2))
        assert coeffs.alpha[0] == -0.5 and coeffs.beta[0] == 0
        assert consistency_order(coeffs, tol=1e-9) >= k - 1


def test_two_step_family_is_unique():
    assert coefficients_for(2, 1) == BALLISTIC_COEFFS


def test_zero_stability_examples():
    np.testing.assert_allclose(sorted(polynomial_roots(BALLISTIC_COEFFS.rho()).real), [-0.5, 1.0])
    assert zero_stable(BALLISTIC_COEFFS)
    assert not zero_stable(LmmCoefficients((-2.0,), (1.0,)))
    assert zero_stable(SPRING_COEFFS)
    # double unit root
    assert not zero_stable(LmmCoefficients((1.0, -2.0), (0.0, 1.0)))


def test_absolute_stability_examples():
    assert absolutely_stable(SPRING_COEFFS, 0.01243 * -8)
    assert absolutely_stable(SPRING_COEFFS, 0.01243 * -5)
    assert not absolutely_stable(SPRING_COEFFS, -5.0)
    assert absolutely_stable_all(SPRING_COEFFS, [])
    assert not absolutely_stable_all(SPRING_COEFFS, [-0.1, -5.0])


def test_jury_matches_roots():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(1000):
        a = rng.uniform(-1.5, 1.5, size=2)
        b = rng.uniform(-2, 2, size=2)
        hl = rng.uniform(-2, 0.5)
        coeffs = LmmCoefficients(a, b)
        mod = np.abs(np.roots(stability_polynomial(coeffs, hl)[::-1])).max()
        if abs(mod - 1) < 1e-9:
            continue
        assert jury_condition(coeffs, hl) == (mod < 1)
        checked += 1
    assert checked > 990


def test_jury_rejects_other_k():
    with pytest.raises(ValueError):
        jury_condition(SPRING_COEFFS, -0.1)
