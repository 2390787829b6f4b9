"""Scheme synthesis: feasibility checks and a branch-and-bound search.

The integer variables (a0 and per-dimension A, M, E) are branched on; N and
h follow from them.  At each leaf the consistency conditions are solved
linearly for the coefficients, leaving ``k - 2`` free alphas that are tuned to
maximize the admissible step size.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .bitfloat import FloatFormat
from .lmm import (
    IvpSpec,
    LmmCoefficients,
    absolutely_stable_all,
    consistency_order,
    consistency_residuals,
    error_constant,
    polynomial_roots,
    stability_polynomial,
    zero_stable,
)
from .reference import formats_for, headroom, state_range
from .stepper import CostModel, Scheme, step_count

GOLDEN = (math.sqrt(5) - 1) / 2
BIAS_SLACK = 0.1
# keeps every derived bound strictly on the feasible side of its constraint
SAFETY = 1 - 1e-9


class Infeasible(Exception):
    pass


class BudgetExceeded(Exception):
    pass


# --- problem definition ------------------------------------------------------------

_CAP_RE = re.compile(r"^min_depth_under_qubit_cap\((\d+)\)$")


@dataclass(frozen=True)
class Objective:
    kind: str = "min_qubits"
    cap: int | None = None

    KINDS = ("min_qubits", "min_depth", "min_depth_under_qubit_cap")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown objective {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "min_depth_under_qubit_cap" and (self.cap is None or self.cap < 0):
            raise ValueError("min_depth_under_qubit_cap needs a non-negative qubit cap")

    @classmethod
    def parse(cls, text: str) -> "Objective":
        match = _CAP_RE.match(text.strip())
        if match:
            return cls("min_depth_under_qubit_cap", int(match.group(1)))
        return cls(text.strip())

    def __str__(self):
        return f"{self.kind}({self.cap})" if self.cap is not None else self.kind

    def key(self, qubits: int, depth: int) -> tuple[int, int] | None:
        """Lexicographic sort key, or None if the cap rules the point out."""
        if self.kind == "min_qubits":
            return (qubits, depth)
        if self.kind == "min_depth_under_qubit_cap" and qubits > self.cap:
            return None
        return (depth, qubits)


@dataclass(frozen=True)
class VariableBox:
    """Inclusive ranges; integer ranges apply to every dimension."""

    mantissa: tuple = (4, 32)
    exponent: tuple = (1, 8)
    margin: tuple = (1, 3)
    a0: tuple = (1, 3)
    steps: tuple = (1, 100_000)
    h: tuple = (1e-6, math.inf)

    def __post_init__(self):
        for name in ("mantissa", "exponent", "margin", "a0", "steps"):
            lo, hi = getattr(self, name)
            if int(lo) != lo or int(hi) != hi:
                raise ValueError(f"{name} range must be integral, got {(lo, hi)}")
            object.__setattr__(self, name, (int(lo), int(hi)))
        object.__setattr__(self, "h", (float(self.h[0]), float(self.h[1])))

    @property
    def is_empty(self) -> bool:
        ranges = (self.mantissa, self.exponent, self.margin, self.a0, self.steps, self.h)
        return any(lo > hi for lo, hi in ranges)

    def values(self, name: str) -> range:
        lo, hi = getattr(self, name)
        return range(lo, hi + 1)


@dataclass
class OptimizationProblem:
    ivp: IvpSpec
    candidates: list
    epsilon: float
    deriv_bound: Mapping[int, Sequence[float]] | Sequence[float]
    objective: Objective = field(default_factory=Objective)
    k_range: tuple = (2, 3)
    box: VariableBox = field(default_factory=VariableBox)
    cost_model: CostModel = field(default_factory=CostModel)
    h_cap: float | None = None
    spectrum: np.ndarray | None = None
    node_limit: int = 1_000_000
    consistency_tol: float = 1e-3
    stability_tol: float = 1e-9

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.h_cap is not None and not self.h_cap > 0:
            raise ValueError(f"h cap must be positive, got {self.h_cap}")
        if not self.candidates:
            raise ValueError("need at least one candidate")
        if isinstance(self.objective, str):
            self.objective = Objective.parse(self.objective)
        self.k_range = tuple(sorted(set(int(k) for k in self.k_range)))

    def derivative_bound(self, order: int) -> np.ndarray:
        db = self.deriv_bound
        if isinstance(db, Mapping):
            key = order if order in db else str(order)
            if key not in db:
                raise KeyError(f"no derivative bound supplied for order {order}")
            db = db[key]
        out = np.asarray(db, dtype=float)
        if out.shape != (self.ivp.dimension,):
            raise ValueError(f"derivative bound must have {self.ivp.dimension} entries")
        return out

    @cached_property
    def test_spectrum(self) -> np.ndarray:
        """Jacobian eigenvalues at each candidate's initial state."""
        if self.spectrum is not None:
            return np.unique(np.asarray(self.spectrum, dtype=complex))
        eigs = []
        for p in self.candidates:
            J = self.ivp.jacobian_at(self.ivp.t0, self.ivp.initial(p), p)
            eigs.extend(np.linalg.eigvals(J))
        eigs = np.asarray(eigs, dtype=complex)
        # growth modes have no absolute-stability region to land in
        return np.unique(np.round(eigs[eigs.real <= 0], 12))

    @cached_property
    def bias(self) -> np.ndarray:
        return default_bias(self.ivp)


def default_bias(ivp: IvpSpec, slack: float = BIAS_SLACK) -> np.ndarray:
    """Smallest shift keeping ``x + v`` non-negative, plus ``slack`` of the range."""
    lo = ivp.x0_min + ivp.duration * ivp.l
    hi = ivp.x0_max + ivp.duration * ivp.u
    v = np.maximum(0.0, -lo) + slack * (hi - lo)
    # a constant state with no room below would sit exactly at zero
    v[v + lo <= 0] += 1.0
    return v


# --- feasibility -----------------------------------------------------------------------

@dataclass
class ConstraintResult:
    passed: bool
    residual: float | list
    detail: str = ""

    def to_dict(self) -> dict:
        return {"passed": bool(self.passed), "residual": self.residual, "detail": self.detail}


@dataclass
class FeasibilityReport:
    entries: dict

    NAMES = ("dyadic_alpha0", "consistency", "zero_stability", "absolute_stability",
             "overflow", "underflow", "error_budget", "margin")

    @property
    def feasible(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def failed(self) -> list[str]:
        return [name for name, e in self.entries.items() if not e.passed]

    def to_dict(self) -> dict:
        return {"feasible": self.feasible,
                "constraints": {name: e.to_dict() for name, e in self.entries.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _max_root_modulus(coeffs: LmmCoefficients, hlambdas) -> float:
    hl = np.atleast_1d(np.asarray(hlambdas, dtype=complex))
    if hl.size == 0:
        hl = np.zeros(1, dtype=complex)
    return float(max(np.abs(polynomial_roots(stability_polynomial(coeffs, z))).max() for z in hl))


def truncation_error(coeffs: LmmCoefficients, h: float, problem: OptimizationProblem,
                     order: int | None = None) -> np.ndarray:
    """Accumulated method error ``|C_{p+1}| h^p (tf - t0) |x^(p+1)|`` per dimension."""
    p = consistency_order(coeffs, problem.consistency_tol) if order is None else order
    if p < 1:
        return np.full(problem.ivp.dimension, math.inf)
    c = abs(error_constant(coeffs, p))
    return c * h ** p * problem.ivp.duration * problem.derivative_bound(p + 1)


def roundoff_error(scheme: Scheme, problem: OptimizationProblem) -> np.ndarray:
    _, upper = state_range(problem.ivp, scheme.bias)
    return upper * 2.0 ** -np.asarray(scheme.mantissas, dtype=float)


def check_feasible(scheme: Scheme, problem: OptimizationProblem) -> FeasibilityReport:
    ivp, coeffs, tol = problem.ivp, scheme.coeffs, problem.stability_tol
    if scheme.dimension != ivp.dimension:
        raise ValueError(f"scheme has {scheme.dimension} dimensions, problem has {ivp.dimension}")
    e = {}

    a0 = scheme.a0
    target = -Fraction(1, 2 ** a0) if a0 >= 1 else None
    if target is None:
        e["dyadic_alpha0"] = ConstraintResult(False, math.nan, f"a0={a0} must be >= 1")
    else:
        gap = Fraction(coeffs.alpha[0]) - target
        e["dyadic_alpha0"] = ConstraintResult(gap == 0, float(gap), f"alpha_0 vs -2**-{a0}")

    res = consistency_residuals(coeffs, 1)
    p = consistency_order(coeffs, problem.consistency_tol)
    e["consistency"] = ConstraintResult(
        p >= 1, problem.consistency_tol - max(abs(r) for r in res), f"order {p}")

    rho_mod = float(np.abs(polynomial_roots(coeffs.rho())).max())
    e["zero_stability"] = ConstraintResult(zero_stable(coeffs, tol), 1 + tol - rho_mod,
                                           f"max |root| {rho_mod:.12g}")

    hl = scheme.h * problem.test_spectrum
    stable = absolutely_stable_all(coeffs, hl, tol)
    mod = _max_root_modulus(coeffs, hl)
    e["absolute_stability"] = ConstraintResult(
        stable, 1 + tol - mod, f"{hl.size} test points, max |root| {mod:.12g}")

    lower, upper = state_range(ivp, scheme.bias)
    over = [float(f.w_upper) - float(u) for f, u in zip(scheme.formats, upper)]
    e["overflow"] = ConstraintResult(all(r > 0 for r in over), over)
    # measured after the 2**-a0 head shift, the smallest value a register must hold
    under = [float(lo) * 2.0 ** -a0 - float(f.w_lower) for f, lo in zip(scheme.formats, lower)]
    e["underflow"] = ConstraintResult(all(r > 0 for r in under), under, f"after 2**-{a0} shift")

    tau = truncation_error(coeffs, scheme.h, problem, p)
    err = problem.epsilon - (roundoff_error(scheme, problem) + tau)
    e["error_budget"] = ConstraintResult(bool(np.all(err >= 0)), [float(r) for r in err])

    c = -coeffs.alpha[0]
    margin = [(c * (2 ** f.margin_bits + 1) - 1) * float(lo) - scheme.h * scheme.k * float(u)
              for f, lo, u in zip(scheme.formats, lower, ivp.u)]
    e["margin"] = ConstraintResult(all(r > 0 for r in margin), margin)
    return FeasibilityReport(e)


def objective_key(scheme: Scheme, problem: OptimizationProblem):
    m = problem.cost_model
    q = m.qubits(scheme.k, scheme.mantissas, scheme.exponents, scheme.margins, scheme.n_steps)
    d = m.depth(scheme.mantissas, scheme.exponents, scheme.margins, scheme.n_steps)
    return problem.objective.key(q, d)


def objective_value(scheme: Scheme, problem: OptimizationProblem) -> int | None:
    key = objective_key(scheme, problem)
    return None if key is None else key[0]


# --- coefficient family -----------------------------------------------------------------

def coefficients_for(k: int, a0: int, free: Sequence[float] = ()) -> LmmCoefficients:
    """Solve the consistency conditions ``C_0 .. C_{k-1} = 0`` for ``alpha_1`` and
    ``beta_1 .. beta_{k-1}``, with ``alpha_0 = -2**-a0`` and ``beta_0 = 0``.

    ``free`` holds ``alpha_2 .. alpha_{k-1}``.
    """
    if k < 2:
        raise ValueError("need k >= 2")
    free = [float(x) for x in free]
    if len(free) != k - 2:
        raise ValueError(f"k={k} has {k - 2} free alphas, got {len(free)}")
    alpha = [-(2.0 ** -a0), 0.0] + free
    # unknowns: alpha_1, beta_1 .. beta_{k-1}
    A = np.zeros((k, k))
    rhs = np.zeros(k)
    A[0, 0] = 1.0
    rhs[0] = -1.0 - alpha[0] - sum(free)
    for m in range(1, k):
        A[m, 0] = 1.0
        for j in range(1, k):
            A[m, j] = -m * j ** (m - 1)
        rhs[m] = -(k ** m) - sum(i ** m * alpha[i] for i in range(k) if i != 1)
    sol = np.linalg.solve(A, rhs)
    alpha[1] = float(sol[0])
    beta = [0.0] + [float(b) for b in sol[1:]]
    return LmmCoefficients(alpha, beta)


def stability_limit(coeffs: LmmCoefficients, spectrum, tol: float = 1e-9, rel: float = 1e-10) -> float:
    """Largest ``h`` such that every ``h' <= h`` is absolutely stable on ``spectrum``.

    Doubles ``h`` until the first failure, then bisects.  Returns inf if
    no failure appears up to 1e4 / min |lambda|, and 0 for a zero-unstable method.
    """
    if not zero_stable(coeffs, tol):
        return 0.0
    lam = np.asarray(spectrum, dtype=complex)
    lam = lam[np.abs(lam) > 0]
    if lam.size == 0:
        return math.inf
    mags = np.abs(lam)
    h, h_max = 1e-4 / mags.max(), 1e4 / mags.min()
    ok_prev, fail = 0.0, None
    while h <= h_max:
        if absolutely_stable_all(coeffs, h * lam, tol):
            ok_prev, h = h, 2 * h
        else:
            fail = h
            break
    if fail is None:
        return math.inf
    lo, hi = ok_prev, fail
    while hi - lo > rel * hi:
        mid = (lo + hi) / 2
        if absolutely_stable_all(coeffs, mid * lam, tol):
            lo = mid
        else:
            hi = mid
    return lo


# stability limits depend only on coefficients and spectrum, so they are shared
# across problems that differ in budget or objective
_STABILITY_CACHE: dict = {}


class _Family:
    """Step-size model for one (k, a0): h as a function of the free alphas."""

    TABLE_SIZE = 97
    REFINE_ITERS = 24

    def __init__(self, problem: OptimizationProblem, k: int, a0: int):
        self.problem = problem
        self.k = k
        self.a0 = a0
        self._spectrum_key = self.problem.test_spectrum.tobytes()
        self._best = {}
        self.table = self._build_table()

    def coeffs(self, free) -> LmmCoefficients:
        return coefficients_for(self.k, self.a0, free)

    def h_stab(self, free) -> float:
        key = (self.k, self.a0, tuple(float(x) for x in free), self._spectrum_key,
               self.problem.stability_tol)
        if key not in _STABILITY_CACHE:
            _STABILITY_CACHE[key] = stability_limit(self.coeffs(key[2]), self.problem.test_spectrum,
                                                    self.problem.stability_tol)
        return _STABILITY_CACHE[key]

    def h_err(self, free, budget: np.ndarray) -> float:
        """Largest h whose method error fits ``budget`` in every dimension."""
        co = self.coeffs(free)
        p = consistency_order(co, self.problem.consistency_tol)
        if p < 1:
            return 0.0
        c = abs(error_constant(co, p)) * self.problem.ivp.duration
        bound = self.problem.derivative_bound(p + 1)
        h = math.inf
        for b, dmax in zip(budget, bound):
            if b < 0:
                return 0.0
            if c * dmax > 0:
                h = min(h, (b / (c * dmax)) ** (1.0 / p))
        return h * SAFETY

    def score(self, free, budget) -> float:
        return min(self.h_stab(free), self.h_err(free, budget))

    def _build_table(self):
        if self.k == 2:
            return [()]
        if self.k == 3:
            lim = comb(3, 2)
            pts = np.linspace(-lim, lim, self.TABLE_SIZE)
            return [(float(s),) for s in pts if zero_stable(self.coeffs((s,)))]
        # multi-start points for k >= 4, fixed seed for reproducibility
        rng = np.random.default_rng(self.k * 1000 + self.a0)
        lims = np.array([comb(self.k, i) for i in range(2, self.k)], dtype=float)
        pts = rng.uniform(-lims, lims, size=(256, self.k - 2))
        return [tuple(map(float, x)) for x in pts if zero_stable(self.coeffs(x))][:24]

    def best(self, budget) -> tuple[float, tuple]:
        """``(h, free)`` maximizing ``min(h_stab, h_err)``; cached on the budget."""
        key = tuple(float(b) for b in budget)
        if key not in self._best:
            self._best[key] = self._search(np.asarray(budget, dtype=float))
        return self._best[key]

    def _search(self, budget):
        if not self.table:
            return 0.0, None
        scores = [self.score(x, budget) for x in self.table]
        i = int(np.argmax(scores))
        if scores[i] == math.inf:
            # any point works; prefer the tightest spurious roots
            radii = [_spurious_radius(self.coeffs(x)) for x in self.table]
            j = int(np.argmin(radii))
            return math.inf, self.table[j]
        if self.k == 2 or scores[i] <= 0:
            return scores[i], self.table[i] if scores[i] > 0 else None
        if self.k == 3:
            s, h = self._golden(i, budget)
            return (h, (s,)) if h >= scores[i] else (scores[i], self.table[i])
        return self._local(i, scores, budget)

    def _golden(self, i, budget):
        pts = [x[0] for x in self.table]
        a = pts[max(i - 1, 0)]
        b = pts[min(i + 1, len(pts) - 1)]
        f = lambda s: self.score((s,), budget)
        c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(self.REFINE_ITERS):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = f(d)
        return (c, fc) if fc >= fd else (d, fd)

    def _local(self, i, scores, budget):
        from scipy.optimize import minimize

        order = np.argsort(scores)[::-1][:4]
        best_h, best_x = scores[i], self.table[i]
        for j in order:
            res = minimize(lambda x: -self.score(tuple(x), budget), np.array(self.table[j]),
                           method="Nelder-Mead", options={"maxfev": 200, "xatol": 1e-6})
            x = tuple(map(float, res.x))
            h = self.score(x, budget)
            if h > best_h:
                best_h, best_x = h, x
        return best_h, best_x


def _spurious_radius(coeffs: LmmCoefficients) -> float:
    roots = polynomial_roots(coeffs.rho())
    roots = roots[np.abs(roots - 1) > 1e-9]
    return float(np.abs(roots).max()) if roots.size else 0.0


# --- branch and bound ----------------------------------------------------------------------

@dataclass
class Solution:
    scheme: Scheme
    qubits: int
    depth: int
    key: tuple

    @property
    def objective(self) -> int:
        return self.key[0]


class _Search:
    def __init__(self, problem: OptimizationProblem, k: int):
        if k < 2:
            raise ValueError(f"k must be >= 2, got {k}")
        self.p = problem
        self.k = k
        self.D = problem.ivp.dimension
        self.box = problem.box
        self.lower, self.upper = state_range(problem.ivp, problem.bias)
        self.families = {}
        self.nodes = 0
        self.best: Solution | None = None

    def family(self, a0) -> _Family:
        if a0 not in self.families:
            self.families[a0] = _Family(self.p, self.k, a0)
        return self.families[a0]

    # step-size pieces that do not depend on the free alphas

    def h_margin(self, a0: int, margins) -> float:
        c = 2.0 ** -a0
        h = math.inf
        for A, lo, u in zip(margins, self.lower, self.p.ivp.u):
            coef = (c * (2 ** A + 1) - 1) * lo
            if coef <= 0:
                return 0.0
            if u > 0:
                h = min(h, coef / (self.k * u))
        return h * SAFETY

    def budget(self, mantissas) -> np.ndarray:
        return self.p.epsilon - self.upper * 2.0 ** -np.asarray(mantissas, dtype=float)

    def h_limit(self, a0, mantissas, margins) -> tuple[float, tuple | None]:
        h_core, free = self.family(a0).best(self.budget(mantissas))
        h = min(h_core, self.h_margin(a0, margins), self.box.h[1])
        if self.p.h_cap is not None:
            h = min(h, self.p.h_cap)
        return h, free

    def steps_for(self, h: float) -> tuple[int, float] | None:
        """(N, h) after applying the box, or None if out of range."""
        lo, hi = self.box.steps
        T = self.p.ivp.duration
        if h == math.inf:
            h = T / max(lo, 1)
        if not h > 0 or h < self.box.h[0]:
            return None
        n = step_count(T, h)
        if n > hi:
            return None
        if n < lo:
            n, h = lo, T / lo
            if h < self.box.h[0]:
                return None
        return n, h

    # bounds

    def e_floor(self, a0: int) -> list[int]:
        """Smallest exponent width that can bracket each dimension (widest mantissa)."""
        out = []
        for lo, hi in zip(self.lower, self.upper):
            for E in self.box.values("exponent"):
                try:
                    FloatFormat.bracketing(self.box.mantissa[1], E, lo, hi, 1, headroom=headroom(a0))
                except ValueError:
                    continue
                out.append(E)
                break
            else:
                out.append(None)
        return out

    def bound(self, a0, assigned) -> tuple | None:
        """Lexicographic lower bound on the objective key below a partial assignment."""
        Ms, Es, As = [], [], []
        Ms_hi, As_hi = [], []
        ef = self._efloor[a0]
        for d in range(self.D):
            A, M, E = assigned[d]
            As.append(self.box.margin[0] if A is None else A)
            As_hi.append(self.box.margin[1] if A is None else A)
            Ms.append(self.box.mantissa[0] if M is None else M)
            Ms_hi.append(self.box.mantissa[1] if M is None else M)
            Es.append(ef[d] if E is None else E)
        h_ub, _ = self.h_limit(a0, Ms_hi, As_hi)
        ns = self.steps_for(h_ub)
        if ns is None:
            return None
        n_lb = ns[0]
        m = self.p.cost_model
        q = m.qubits(self.k, Ms, Es, As, n_lb)
        dep = m.depth(Ms, Es, As, n_lb)
        obj = self.p.objective
        if obj.kind == "min_depth_under_qubit_cap" and q > obj.cap:
            return None
        return (q, dep) if obj.kind == "min_qubits" else (dep, q)

    # leaves

    def leaf(self, a0, assigned) -> Solution | None:
        As = [a[0] for a in assigned]
        Ms = [a[1] for a in assigned]
        Es = [a[2] for a in assigned]
        try:
            fmts = formats_for(self.p.ivp, self.p.bias, Ms, Es, As, a0)
        except ValueError:
            return None
        h, free = self.h_limit(a0, Ms, As)
        if free is None or not h > 0:
            return None
        ns = self.steps_for(h)
        if ns is None:
            return None
        n, h = ns
        coeffs = self.family(a0).coeffs(free)
        scheme = Scheme(coeffs, a0, h, n, fmts, tuple(self.p.bias))
        if not check_feasible(scheme, self.p).feasible:
            return None
        m = self.p.cost_model
        q = m.qubits(self.k, Ms, Es, As, n)
        dep = m.depth(Ms, Es, As, n)
        key = self.p.objective.key(q, dep)
        if key is None:
            return None
        return Solution(scheme, q, dep, key)

    def offer(self, sol: Solution | None) -> None:
        if sol is not None and (self.best is None or sol.key < self.best.key):
            self.best = sol

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.p.node_limit:
            raise BudgetExceeded(f"node limit {self.p.node_limit} reached")

    # traversal

    def branch_and_bound(self) -> Solution:
        if self.box.is_empty:
            raise Infeasible("variable box is empty")
        self._efloor = {}
        for a0 in self.box.values("a0"):
            self._efloor[a0] = self.e_floor(a0)
            if None in self._efloor[a0]:
                continue
            self._descend(a0, [[None, None, None] for _ in range(self.D)], 0)
        if self.best is None:
            raise Infeasible(f"no feasible {self.k}-step scheme in the variable box")
        return self.best

    # per dimension the branching order is A, then M, then E
    _SLOTS = (("margin", 0), ("mantissa", 1), ("exponent", 2))

    def _descend(self, a0, assigned, depth):
        self.tick()
        lb = self.bound(a0, assigned)
        if lb is None or (self.best is not None and lb >= self.best.key):
            return
        if depth == 3 * self.D:
            self.offer(self.leaf(a0, [tuple(a) for a in assigned]))
            return
        d, slot = divmod(depth, 3)
        name, idx = self._SLOTS[slot]
        values = self.box.values(name)
        if name == "exponent":
            values = range(max(values.start, self._efloor[a0][d]), values.stop)
        for v in values:
            assigned[d][idx] = v
            self._descend(a0, assigned, depth + 1)
        assigned[d][idx] = None

    def exhaustive(self) -> Solution:
        """Plain enumeration of the integer box, for checking the pruned search."""
        if self.box.is_empty:
            raise Infeasible("variable box is empty")
        import itertools

        per_dim = list(itertools.product(self.box.values("margin"), self.box.values("mantissa"),
                                         self.box.values("exponent")))
        for a0 in self.box.values("a0"):
            for combo in itertools.product(per_dim, repeat=self.D):
                self.tick()
                self.offer(self.leaf(a0, list(combo)))
        if self.best is None:
            raise Infeasible(f"no feasible {self.k}-step scheme in the variable box")
        return self.best


def solve(problem: OptimizationProblem, k: int) -> Solution:
    if k not in problem.k_range:
        raise ValueError(f"k={k} is outside k_range {problem.k_range}")
    return _Search(problem, k).branch_and_bound()


def solve_for_k(problem: OptimizationProblem, k: int) -> Scheme:
    return solve(problem, k).scheme


def brute_force(problem: OptimizationProblem, k: int) -> Solution:
    return _Search(problem, k).exhaustive()


def solve_all(problem: OptimizationProblem) -> dict:
    """Per-k results: a :class:`Solution` or the exception that stopped it."""
    out = {}
    for k in problem.k_range:
        try:
            out[k] = solve(problem, k)
        except (Infeasible, BudgetExceeded) as exc:
            out[k] = exc
    return out


def pick_best(results: dict) -> tuple[int, Solution]:
    best = None
    for k in sorted(results):
        sol = results[k]
        if isinstance(sol, Solution) and (best is None or sol.key < best[1].key):
            best = (k, sol)
    if best is None:
        raise Infeasible("no k in range admits a feasible scheme")
    return best


def select_best(problem: OptimizationProblem) -> tuple[int, Scheme]:
    k, sol = pick_best(solve_all(problem))
    return k, sol.scheme
