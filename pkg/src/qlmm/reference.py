"""Published coefficient sets and the register layouts that go with them."""

from __future__ import annotations

import numpy as np

from .bitfloat import FloatFormat
from .lmm import IvpSpec, LmmCoefficients
from .stepper import Scheme

# 3-step, second order, coefficients quoted to four decimals
SPRING_COEFFS = LmmCoefficients((-0.5, -0.7427, 0.2427), (0.0, 0.8714, 1.8714))
SPRING_H = 0.01243
SPRING_MANTISSA = (25, 27)
SPRING_EXPONENT = (3, 4)
SPRING_BIAS = (10.0, 69.7)

# 2-step, first order; fully determined once alpha_0 = -1/2
BALLISTIC_COEFFS = LmmCoefficients((-0.5, -0.5), (0.0, 1.5))
BALLISTIC_H = 0.05
BALLISTIC_MANTISSA = (16, 18, 14)
BALLISTIC_EXPONENT = (4, 5, 4)
BALLISTIC_BIAS = (16.0, 663.0, 56.2)


def state_range(ivp: IvpSpec, bias) -> tuple[np.ndarray, np.ndarray]:
    """Bounds on the biased state ``y`` over the whole window."""
    bias = np.asarray(bias, dtype=float)
    lower = ivp.x0_min + bias + ivp.duration * ivp.l
    upper = ivp.x0_max + bias + ivp.duration * ivp.u
    return lower, upper


def headroom(a0: int) -> int:
    """Binades kept free below the state range.

    ``a0`` of them absorb the ``2**-a0`` head shift; one more covers the
    weighted-sum tail ``y[n+k] - 2**-a0 * y[n]``, which dips below half the
    smallest state when the state is falling.
    """
    return a0 + 1


def formats_for(ivp: IvpSpec, bias, mantissas, exponents, margins, a0: int) -> tuple:
    """One bracketing format per dimension with :func:`headroom` below the range."""
    lower, upper = state_range(ivp, bias)
    return tuple(
        FloatFormat.bracketing(M, E, lo, hi, A, headroom=headroom(a0))
        for M, E, A, lo, hi in zip(mantissas, exponents, margins, lower, upper)
    )


def spring_mass_scheme(ivp: IvpSpec) -> Scheme:
    fmts = formats_for(ivp, SPRING_BIAS, SPRING_MANTISSA, SPRING_EXPONENT, (1, 1), a0=1)
    return Scheme.for_ivp(SPRING_COEFFS, 1, SPRING_H, fmts, SPRING_BIAS, ivp)


def ballistic_scheme(ivp: IvpSpec) -> Scheme:
    fmts = formats_for(ivp, BALLISTIC_BIAS, BALLISTIC_MANTISSA, BALLISTIC_EXPONENT, (1, 1, 1), a0=1)
    return Scheme.for_ivp(BALLISTIC_COEFFS, 1, BALLISTIC_H, fmts, BALLISTIC_BIAS, ivp)
