"""Reference numerics for explicit linear multistep methods.

Everything here runs in float64; it is the unrounded baseline that the
bit-exact stepper is compared against.  Coefficients follow the normalized
explicit form

    x[n+k] + sum_i alpha[i] * x[n+i] = h * sum_j beta[j] * f[n+j],  i, j < k
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Any, Callable, Sequence

import numpy as np


class RootFindingError(RuntimeError):
    pass


SIMPLE_ROOT_SEPARATION = 1e-6


@dataclass(frozen=True)
class LmmCoefficients:
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        beta = tuple(float(b) for b in self.beta)
        if not alpha:
            raise ValueError("an LMM needs at least one step")
        if len(alpha) != len(beta):
            raise ValueError(f"alpha has {len(alpha)} entries, beta has {len(beta)}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def k(self) -> int:
        return len(self.alpha)

    def rho(self) -> np.ndarray:
        """First characteristic polynomial, ascending powers, leading 1."""
        return np.array(self.alpha + (1.0,))

    def sigma(self) -> np.ndarray:
        """Second characteristic polynomial (explicit: no r**k term)."""
        return np.array(self.beta + (0.0,))


EULER = LmmCoefficients((-1.0,), (1.0,))


@dataclass
class IvpSpec:
    """Initial value problem over a family of candidate parameter records.

    ``u``/``l`` bound the derivative over every candidate and the whole time
    window; ``x0_max``/``x0_min`` bound the initial state.
    """

    dimension: int
    deriv: Callable[[float, np.ndarray, Any], np.ndarray]
    initial: Callable[[Any], np.ndarray]
    t0: float
    tf: float
    u: np.ndarray
    l: np.ndarray
    x0_max: np.ndarray
    x0_min: np.ndarray
    time_independent: bool = True
    jacobian: Callable[[float, np.ndarray, Any], np.ndarray] | None = None
    name: str = "ivp"
    exact: Callable[[np.ndarray, Any], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.t0 < self.tf:
            raise ValueError(f"t0={self.t0} must be < tf={self.tf}")
        for attr in ("u", "l", "x0_max", "x0_min"):
            arr = np.asarray(getattr(self, attr), dtype=float)
            if arr.shape != (self.dimension,):
                raise ValueError(f"{attr} must have shape ({self.dimension},), got {arr.shape}")
            setattr(self, attr, arr)

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    def f(self, t, x, params) -> np.ndarray:
        return np.asarray(self.deriv(t, np.asarray(x, dtype=float), params), dtype=float)

    def jacobian_at(self, t, x, params, eps=1e-6) -> np.ndarray:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(t, x, params), dtype=float)
        x = np.asarray(x, dtype=float)
        J = np.empty((self.dimension, self.dimension))
        for i in range(self.dimension):
            dx = np.zeros(self.dimension)
            dx[i] = eps * max(1.0, abs(x[i]))
            J[:, i] = (self.f(t, x + dx, params) - self.f(t, x - dx, params)) / (2 * dx[i])
        return J


def euler_step(x, t, h, ivp: IvpSpec, params) -> np.ndarray:
    return np.asarray(x, dtype=float) + h * ivp.f(t, x, params)


def rk4_step(x, t, h, ivp: IvpSpec, params) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k1 = ivp.f(t, x, params)
    k2 = ivp.f(t + h / 2, x + h / 2 * k1, params)
    k3 = ivp.f(t + h / 2, x + h / 2 * k2, params)
    k4 = ivp.f(t + h, x + h * k3, params)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def lmm_step(history: Sequence, f_history: Sequence, coeffs: LmmCoefficients, h: float) -> np.ndarray:
    if len(history) != coeffs.k or len(f_history) != coeffs.k:
        raise ValueError(f"need {coeffs.k} history entries")
    out = 0.0
    for a, b, x, fx in zip(coeffs.alpha, coeffs.beta, history, f_history):
        out = out - a * np.asarray(x, dtype=float) + h * b * np.asarray(fx, dtype=float)
    return np.asarray(out, dtype=float)


def integrate(ivp: IvpSpec, params, coeffs: LmmCoefficients, h: float, n_steps: int) -> np.ndarray:
    """Exact-real LMM trajectory with an RK4 start-up; shape ``(n_steps + k, D)``."""
    k = coeffs.k
    xs = [np.asarray(ivp.initial(params), dtype=float)]
    for i in range(1, k):
        xs.append(rk4_step(xs[-1], ivp.t0 + (i - 1) * h, h, ivp, params))
    fs = [ivp.f(ivp.t0 + i * h, x, params) for i, x in enumerate(xs)]
    for n in range(n_steps):
        nxt = lmm_step(xs[n:n + k], fs[n:n + k], coeffs, h)
        xs.append(nxt)
        fs.append(ivp.f(ivp.t0 + (n + k) * h, nxt, params))
    return np.array(xs)


def consistency_residuals(coeffs: LmmCoefficients, m_max: int) -> list[float]:
    """``C_0 .. C_m_max`` of the truncation operator (unscaled by ``m!``)."""
    k = coeffs.k
    res = [1.0 + sum(coeffs.alpha)]
    for m in range(1, m_max + 1):
        c = float(k ** m)
        c += sum(i ** m * a for i, a in enumerate(coeffs.alpha))
        c -= m * sum(j ** (m - 1) * b for j, b in enumerate(coeffs.beta))
        res.append(c)
    return res


def consistency_order(coeffs: LmmCoefficients, tol: float = 1e-3) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    # an explicit k-step method has 2k coefficients, so order 2k is unreachable
    res = consistency_residuals(coeffs, 2 * coeffs.k)
    if abs(res[0]) > tol:
        return 0
    p = 0
    for m in range(1, len(res)):
        if abs(res[m]) > tol:
            break
        p = m
    return p


def error_constant(coeffs: LmmCoefficients, p: int) -> float:
    """Principal error constant ``C_{p+1} / (p+1)!``."""
    return consistency_residuals(coeffs, p + 1)[p + 1] / factorial(p + 1)


def polynomial_roots(ascending) -> np.ndarray:
    """Roots of a monic polynomial via the eigenvalues of its companion matrix."""
    c = np.asarray(ascending, dtype=complex)
    if c[-1] != 1:
        c = c / c[-1]
    n = len(c) - 1
    if n == 0:
        return np.empty(0, dtype=complex)
    companion = np.zeros((n, n), dtype=complex)
    companion[1:, :-1] = np.eye(n - 1)
    companion[:, -1] = -c[:-1]
    try:
        return np.linalg.eigvals(companion)
    except np.linalg.LinAlgError as exc:
        raise RootFindingError(str(exc)) from exc


def satisfies_root_condition(roots, tol: float = 1e-9) -> bool:
    """All roots inside the closed unit disk, at most one (simple) on its edge."""
    mod = np.abs(roots)
    if np.any(mod >= 1 + tol):
        return False
    on_circle = np.flatnonzero(np.abs(mod - 1) <= tol)
    if len(on_circle) > 1:
        return False
    for i in on_circle:
        others = np.delete(roots, i)
        if np.any(np.abs(others - roots[i]) < SIMPLE_ROOT_SEPARATION):
            return False
    return True


def zero_stable(coeffs: LmmCoefficients, tol: float = 1e-9) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return satisfies_root_condition(polynomial_roots(coeffs.rho()), tol)


def stability_polynomial(coeffs: LmmCoefficients, hlambda: complex) -> np.ndarray:
    return coeffs.rho().astype(complex) - hlambda * coeffs.sigma()


def absolutely_stable(coeffs: LmmCoefficients, hlambda: complex, tol: float = 1e-9) -> bool:
    if np.real(hlambda) > 0:
        raise ValueError(f"absolute stability needs Re(h*lambda) <= 0, got {hlambda}")
    return satisfies_root_condition(polynomial_roots(stability_polynomial(coeffs, hlambda)), tol)


def _root_condition_rows(roots: np.ndarray, tol: float) -> np.ndarray:
    mod = np.abs(roots)
    ok = ~np.any(mod >= 1 + tol, axis=-1)
    near = np.abs(mod - 1) <= tol
    for i in np.flatnonzero(ok & near.any(axis=-1)):
        ok[i] = satisfies_root_condition(roots[i], tol)
    return ok


def absolutely_stable_each(coeffs: LmmCoefficients, hlambdas, tol: float = 1e-9) -> np.ndarray:
    """Boolean mask: root condition of the stability polynomial at each ``h*lambda``."""
    hl = np.atleast_1d(np.asarray(hlambdas, dtype=complex))
    shape = hl.shape
    hl = hl.ravel()
    k = coeffs.k
    rho = coeffs.rho().astype(complex)
    sig = coeffs.sigma().astype(complex)
    polys = rho[None, :] - hl[:, None] * sig[None, :]
    companions = np.zeros((hl.size, k, k), dtype=complex)
    if k > 1:
        companions[:, 1:, :-1] = np.eye(k - 1)
    companions[:, :, -1] = -polys[:, :-1]
    try:
        roots = np.linalg.eigvals(companions)
    except np.linalg.LinAlgError as exc:
        raise RootFindingError(str(exc)) from exc
    return _root_condition_rows(roots, tol).reshape(shape)


def absolutely_stable_all(coeffs: LmmCoefficients, hlambdas, tol: float = 1e-9) -> bool:
    """Vectorized :func:`absolutely_stable` over a spectrum; True if all pass."""
    hl = np.atleast_1d(np.asarray(hlambdas, dtype=complex))
    if hl.size == 0:
        return zero_stable(coeffs, tol)
    return bool(absolutely_stable_each(coeffs, hl, tol).all())


def jury_condition(coeffs: LmmCoefficients, hlambda: float) -> bool:
    """Closed-form test that both roots of the 2-step stability quadratic lie
    strictly inside the unit circle (real ``hlambda`` only)."""
    if coeffs.k != 2:
        raise ValueError("the Jury inequalities here are for 2-step methods")
    if np.iscomplexobj(hlambda) and np.imag(hlambda) != 0:
        raise ValueError("Jury test needs a real h*lambda")
    hl = float(np.real(hlambda))
    a0 = coeffs.alpha[0] - hl * coeffs.beta[0]
    a1 = coeffs.alpha[1] - hl * coeffs.beta[1]
    return a0 < 1 and 1 + a1 + a0 > 0 and 1 - a1 + a0 > 0
