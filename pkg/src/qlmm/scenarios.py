"""Built-in initial value problems and their closed-form solutions."""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np

from .lmm import IvpSpec

GRAVITY = 9.8
_DPS = 40


@dataclass(frozen=True)
class Sweep:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"sweep count must be >= 1, got {self.count}")
        if self.stop < self.start:
            raise ValueError(f"sweep bounds out of order: {self.start} > {self.stop}")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.start)])
        return np.linspace(self.start, self.stop, self.count)


# --- spring-mass-damper -------------------------------------------------------

def _smd_matrix(p):
    return np.array([[0.0, 1.0], [-p["p_k"] / p["p_m"], -p["p_c"] / p["p_m"]]])


def _smd_deriv(t, x, p):
    return _smd_matrix(p) @ x


def _smd_exact(t, p):
    """Position and velocity of the damped oscillator with x(0)=0, v(0)=1."""
    x0, v0 = mpmath.mpf(0), mpmath.mpf(1)
    with mpmath.workdps(_DPS):
        m, k, c = (mpmath.mpf(p[key]) for key in ("p_m", "p_k", "p_c"))
        b, w2 = c / m, k / m
        disc = b * b - 4 * w2
        out = np.empty((len(t), 2))
        if disc == 0:
            lam = -b / 2
            for i, ti in enumerate(t):
                ti = mpmath.mpf(ti)
                e = mpmath.exp(lam * ti)
                out[i, 0] = float((x0 + (v0 - lam * x0) * ti) * e)
                out[i, 1] = float(((v0 - lam * x0) + lam * (x0 + (v0 - lam * x0) * ti)) * e)
            return out
        root = mpmath.sqrt(mpmath.mpc(disc))
        l1, l2 = (-b + root) / 2, (-b - root) / 2
        c1 = (v0 - l2 * x0) / (l1 - l2)
        c2 = (l1 * x0 - v0) / (l1 - l2)
        for i, ti in enumerate(t):
            e1, e2 = mpmath.exp(l1 * ti), mpmath.exp(l2 * ti)
            out[i, 0] = float(mpmath.re(c1 * e1 + c2 * e2))
            out[i, 1] = float(mpmath.re(l1 * c1 * e1 + l2 * c2 * e2))
    return out


def spring_mass_damper(sweep: Sweep | None = None, p_m=1.0, p_k=40.0, tf=1.4) -> tuple[IvpSpec, list[dict]]:
    sweep = sweep or Sweep("p_c", 3.0, 33.0, 16)
    if sweep.name != "p_c":
        raise ValueError(f"spring_mass_damper sweeps p_c, not {sweep.name}")
    candidates = [{"p_m": p_m, "p_k": p_k, "p_c": float(c)} for c in sweep.values()]
    ivp = IvpSpec(
        dimension=2,
        deriv=_smd_deriv,
        initial=lambda p: np.array([0.0, 1.0]),
        t0=0.0,
        tf=tf,
        u=np.zeros(2), l=np.zeros(2), x0_max=np.array([0.0, 1.0]), x0_min=np.array([0.0, 1.0]),
        jacobian=lambda t, x, p: _smd_matrix(p),
        name="spring_mass_damper",
        exact=lambda t, p: _smd_exact(np.atleast_1d(t), p),
    )
    attach_bounds(ivp, candidates)
    return ivp, candidates


def critical_damping(p_m=1.0, p_k=40.0) -> float:
    return 2.0 * float(np.sqrt(p_m * p_k))


# --- ballistic ----------------------------------------------------------------

def _launch(p):
    th = np.radians(p["theta_deg"])
    return p["p_v"] * np.cos(th), p["p_v"] * np.sin(th)


def _ballistic_deriv(t, x, p):
    vx, _ = _launch(p)
    return np.array([vx, x[2], -GRAVITY])


_BALLISTIC_JAC = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])


def _ballistic_exact(t, p):
    with mpmath.workdps(_DPS):
        th = mpmath.radians(mpmath.mpf(p["theta_deg"]))
        v = mpmath.mpf(p["p_v"])
        g = mpmath.mpf(GRAVITY)
        vx, vy = v * mpmath.cos(th), v * mpmath.sin(th)
        out = np.empty((len(t), 3))
        for i, ti in enumerate(t):
            ti = mpmath.mpf(ti)
            out[i] = [float(vx * ti), float(vy * ti - g * ti * ti / 2), float(vy - g * ti)]
    return out


def ballistic(sweep: Sweep | None = None, p_v=40.0, tf=7.5) -> tuple[IvpSpec, list[dict]]:
    sweep = sweep or Sweep("theta_deg", 31.0, 61.0, 16)
    if sweep.name != "theta_deg":
        raise ValueError(f"ballistic sweeps theta_deg, not {sweep.name}")
    candidates = [{"p_v": p_v, "theta_deg": float(th)} for th in sweep.values()]
    ivp = IvpSpec(
        dimension=3,
        deriv=_ballistic_deriv,
        initial=lambda p: np.array([0.0, 0.0, _launch(p)[1]]),
        t0=0.0,
        tf=tf,
        u=np.zeros(3), l=np.zeros(3), x0_max=np.zeros(3), x0_min=np.zeros(3),
        jacobian=lambda t, x, p: _BALLISTIC_JAC,
        name="ballistic",
        exact=lambda t, p: _ballistic_exact(np.atleast_1d(t), p),
    )
    attach_bounds(ivp, candidates)
    return ivp, candidates


def landing_range(p) -> float:
    vx, vy = _launch(p)
    return 2 * vx * vy / GRAVITY


# --- user-defined linear system -------------------------------------------------

def linear_system(matrix, x0, tf, t0=0.0, sweep: Sweep | None = None, scale_name="scale"):
    """``x' = s * A x`` with the sweep varying the scalar ``s`` (default 1)."""
    A = np.asarray(matrix, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if A.shape != (len(x0), len(x0)):
        raise ValueError(f"matrix shape {A.shape} does not match x0 of length {len(x0)}")
    values = sweep.values() if sweep is not None else np.array([1.0])
    candidates = [{scale_name: float(s)} for s in values]

    def exact(t, p):
        from scipy.linalg import expm
        return np.array([expm(p[scale_name] * A * (ti - t0)) @ x0 for ti in np.atleast_1d(t)])

    ivp = IvpSpec(
        dimension=len(x0),
        deriv=lambda t, x, p: p[scale_name] * (A @ x),
        initial=lambda p: x0.copy(),
        t0=t0, tf=tf,
        u=np.zeros(len(x0)), l=np.zeros(len(x0)), x0_max=x0, x0_min=x0,
        jacobian=lambda t, x, p: p[scale_name] * A,
        name="linear_system",
        exact=exact,
    )
    attach_bounds(ivp, candidates)
    return ivp, candidates


# --- bounds -----------------------------------------------------------------------

def _samples(ivp: IvpSpec, n: int) -> np.ndarray:
    return np.linspace(ivp.t0, ivp.tf, n)


def attach_bounds(ivp: IvpSpec, candidates, n_samples: int = 1401, pad: float = 0.01) -> None:
    """Fill ``u``, ``l``, ``x0_max``, ``x0_min`` from the exact solutions.

    ``u`` is kept >= 0 and ``l`` <= 0; both are widened by ``pad`` times the
    sampled spread so grid sampling cannot undercut the true extremum.
    """
    t = _samples(ivp, n_samples)
    fmin = np.full(ivp.dimension, np.inf)
    fmax = np.full(ivp.dimension, -np.inf)
    x0s = []
    for p in candidates:
        xs = ivp.exact(t, p)
        fs = np.array([ivp.f(ti, xi, p) for ti, xi in zip(t, xs)])
        fmin = np.minimum(fmin, fs.min(axis=0))
        fmax = np.maximum(fmax, fs.max(axis=0))
        x0s.append(ivp.initial(p))
    spread = fmax - fmin
    ivp.u = np.maximum(fmax, 0.0) + pad * spread
    ivp.l = np.minimum(fmin, 0.0) - pad * spread
    x0s = np.array(x0s)
    ivp.x0_max = x0s.max(axis=0)
    ivp.x0_min = x0s.min(axis=0)


def derivative_bound(ivp: IvpSpec, candidates, order: int, n_samples: int = 1401) -> np.ndarray:
    """Sampled ``max |x^(order)(t)|`` per dimension for affine time-independent IVPs.

    For ``x' = J x + c`` the m-th derivative is ``J^(m-1) f(x)``.
    """
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    t = _samples(ivp, n_samples)
    best = np.zeros(ivp.dimension)
    for p in candidates:
        xs = ivp.exact(t, p)
        J = ivp.jacobian_at(ivp.t0, xs[0], p)
        P = np.linalg.matrix_power(J, order - 1)
        d = np.array([P @ ivp.f(ti, xi, p) for ti, xi in zip(t, xs)])
        best = np.maximum(best, np.abs(d).max(axis=0))
    return best
