"""Multistep integration in bit-exact arithmetic plus resource models.

A scheme stores the biased state ``y = x + v`` in one unsigned float register
per dimension.  Each step multiplies the oldest register by ``-alpha_0`` via
an exponent shift, forms the remaining weighted sum in fresh workspace, and
adds the two with the margined in-place adder.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bitfloat import (
    AncillaLedger,
    FloatFormat,
    MarginError,
    SoftValue,
    add_margined,
    encode,
    scale_pow2,
    weighted_sum,
)
from .lmm import IvpSpec, LmmCoefficients, consistency_order, zero_stable

# derivative registers live in workspace with their own wide exponent
DERIV_EXPONENT_BITS = 11
DERIV_EXPONENT_OFFSET = -1024


def step_count(duration: float, h: float) -> int:
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    return int(math.floor(duration / h * (1 + 1e-12)))


@dataclass(frozen=True)
class CostModel:
    """Linear qubit and depth model.

    Per dimension ``R_c`` charges ``rc_margin*A + rc_log*floor(log2 A) + rc_const``.
    ``R_u`` charges ``ru_mantissa*M + ru_exponent*E`` per dimension for each of the
    ``k - 1`` derivative registers, plus ``ru_const``.  Per-step depth is
    ``depth_mantissa*sum(M) + depth_exponent*sum(E) + depth_rc*R_c + depth_const``.
    """

    rc_margin: int = 1
    rc_log: int = 1
    rc_const: int = 3
    ru_mantissa: int = 2
    ru_exponent: int = 2
    ru_const: int = 0
    depth_mantissa: int = 1
    depth_exponent: int = 1
    depth_rc: int = 1
    depth_const: int = 10

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"cost coefficient {f.name} must be non-negative")

    @classmethod
    def from_dict(cls, data: dict | None) -> "CostModel":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown cost model keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def rc(self, margins: Sequence[int]) -> int:
        return sum(self.rc_margin * A + self.rc_log * (A.bit_length() - 1) + self.rc_const
                   for A in margins)

    def ru(self, mantissas: Sequence[int], exponents: Sequence[int], k: int) -> int:
        per_register = sum(self.ru_mantissa * M + self.ru_exponent * E
                           for M, E in zip(mantissas, exponents))
        return (k - 1) * per_register + self.ru_const

    def step_depth(self, mantissas, exponents, rc: int) -> int:
        return (self.depth_mantissa * sum(mantissas) + self.depth_exponent * sum(exponents)
                + self.depth_rc * rc + self.depth_const)

    def qubits(self, k, mantissas, exponents, margins, n_steps) -> int:
        return (k * sum(M + E for M, E in zip(mantissas, exponents))
                + n_steps * self.rc(margins) + self.ru(mantissas, exponents, k))

    def depth(self, mantissas, exponents, margins, n_steps) -> int:
        return n_steps * self.step_depth(mantissas, exponents, self.rc(margins))


@dataclass(frozen=True)
class Scheme:
    coeffs: LmmCoefficients
    a0: int
    h: float
    n_steps: int
    formats: tuple
    bias: tuple

    def __post_init__(self):
        object.__setattr__(self, "formats", tuple(self.formats))
        object.__setattr__(self, "bias", tuple(float(v) for v in self.bias))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if len(self.formats) != len(self.bias):
            raise ValueError(f"{len(self.formats)} formats for {len(self.bias)} bias entries")
        if self.h <= 0:
            raise ValueError(f"step size must be positive, got {self.h}")
        if self.n_steps < 0:
            raise ValueError(f"step count must be non-negative, got {self.n_steps}")
        if any(v < 0 for v in self.bias):
            raise ValueError("bias entries must be non-negative")

    @classmethod
    def for_ivp(cls, coeffs, a0, h, formats, bias, ivp: IvpSpec) -> "Scheme":
        return cls(coeffs, a0, h, step_count(ivp.duration, h), tuple(formats), tuple(bias))

    @property
    def k(self) -> int:
        return self.coeffs.k

    @property
    def dimension(self) -> int:
        return len(self.formats)

    @property
    def mantissas(self):
        return [f.mantissa_bits for f in self.formats]

    @property
    def exponents(self):
        return [f.exponent_bits for f in self.formats]

    @property
    def margins(self):
        return [f.margin_bits for f in self.formats]

    @property
    def stored_bias(self) -> tuple:
        """Bias as actually held in each register (truncated into the format)."""
        out = []
        for v, fmt in zip(self.bias, self.formats):
            out.append(Fraction(0) if v == 0 else encode(v, fmt).value)
        return tuple(out)

    def violations(self) -> list[str]:
        """Structural QLMM requirements this scheme breaks (empty if none)."""
        problems = []
        if self.k < 2:
            problems.append("k must be >= 2 (a 1-step scheme cannot uncompute f_n)")
        if self.a0 < 1 or self.coeffs.alpha[0] != -(2.0 ** -self.a0):
            problems.append(f"alpha_0={self.coeffs.alpha[0]} is not -2**-{self.a0}")
        if self.coeffs.beta[0] != 0:
            problems.append(f"beta_0={self.coeffs.beta[0]} must be 0")
        if consistency_order(self.coeffs) < 1:
            problems.append("scheme is not consistent")
        if not zero_stable(self.coeffs):
            problems.append("scheme is not zero-stable")
        return problems

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": list(self.coeffs.alpha),
            "beta": list(self.coeffs.beta),
            "a0": self.a0,
            "h": self.h,
            "N": self.n_steps,
            "formats": [
                {"M": f.mantissa_bits, "E": f.exponent_bits, "A": f.margin_bits,
                 "offset": f.exponent_offset}
                for f in self.formats
            ],
            "bias": list(self.bias),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scheme":
        coeffs = LmmCoefficients(data["alpha"], data["beta"])
        if "k" in data and data["k"] != coeffs.k:
            raise ValueError(f"k={data['k']} disagrees with {coeffs.k} coefficients")
        formats = tuple(FloatFormat(f["M"], f["E"], f["offset"], f["A"]) for f in data["formats"])
        return cls(coeffs, int(data["a0"]), float(data["h"]), int(data["N"]), formats,
                   tuple(data["bias"]))


@dataclass
class RunRecord:
    trajectory: list
    decoded: np.ndarray
    times: np.ndarray
    ledger: AncillaLedger
    modeled_depth: int
    stored_bias: tuple = field(default=())

    def __len__(self):
        return len(self.trajectory)

    def y(self, n: int, d: int) -> Fraction:
        return self.trajectory[n][d].value

    def csv_rows(self, candidate: int):
        for n, (t, row) in enumerate(zip(self.times, self.trajectory)):
            for d, sv in enumerate(row):
                yield [candidate, n, repr(float(t)), d, sv.mantissa, sv.exponent_field,
                       repr(float(self.decoded[n, d]))]


CSV_HEADER = ["candidate", "n", "t", "dim", "mantissa", "exponent_field", "decoded_x"]


def write_csv(path, records: Sequence[RunRecord], candidates: Sequence[int] | None = None) -> None:
    candidates = range(len(records)) if candidates is None else candidates
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for c, rec in zip(candidates, records):
            writer.writerows(rec.csv_rows(c))


def derivative_format(fmt: FloatFormat) -> FloatFormat:
    return FloatFormat(fmt.mantissa_bits, DERIV_EXPONENT_BITS, DERIV_EXPONENT_OFFSET, fmt.margin_bits)


class _Registers:
    """Decoded state and derivative registers for one trajectory."""

    def __init__(self, scheme: Scheme, ivp: IvpSpec, params):
        self.scheme = scheme
        self.ivp = ivp
        self.params = params
        self.bias = scheme.stored_bias
        self.dfmts = [derivative_format(f) for f in scheme.formats]

    def unbias(self, y: Sequence[SoftValue]) -> np.ndarray:
        return np.array([float(v.value - b) for v, b in zip(y, self.bias)])

    def derivative(self, t: float, y: Sequence[SoftValue]):
        """``f`` at the decoded state as (sign, magnitude register or None) pairs."""
        fx = self.ivp.f(t, self.unbias(y), self.params)
        out = []
        for val, fmt in zip(fx, self.dfmts):
            if val == 0:
                out.append((0, None))
            else:
                out.append((1 if val > 0 else -1, encode(abs(float(val)), fmt)))
        return out


def _axpy(y: SoftValue, terms, ledger) -> SoftValue:
    """``y + sum(c * s * |f|)`` over (coefficient, (sign, register)) terms."""
    coeffs, values = [1], [y]
    for c, (sign, reg) in terms:
        if sign and c:
            coeffs.append(Fraction(c) * sign)
            values.append(reg)
    return weighted_sum(coeffs, values, ledger, out_format=y.format)


def _rk4_soft(regs: _Registers, y, t, h, ledger):
    D = len(y)
    h = Fraction(h)
    k1 = regs.derivative(t, y)
    y2 = [_axpy(y[d], [(h / 2, k1[d])], ledger) for d in range(D)]
    k2 = regs.derivative(t + float(h) / 2, y2)
    y3 = [_axpy(y[d], [(h / 2, k2[d])], ledger) for d in range(D)]
    k3 = regs.derivative(t + float(h) / 2, y3)
    y4 = [_axpy(y[d], [(h, k3[d])], ledger) for d in range(D)]
    k4 = regs.derivative(t + float(h), y4)
    return [
        _axpy(y[d], [(h / 6, k1[d]), (h / 3, k2[d]), (h / 3, k3[d]), (h / 6, k4[d])], ledger)
        for d in range(D)
    ]


def init_prefix(scheme: Scheme, ivp: IvpSpec, params, ledger: AncillaLedger | None = None):
    """``y_0 .. y_{k-1}``: the biased initial state, then RK4 in register arithmetic."""
    ledger = AncillaLedger() if ledger is None else ledger
    regs = _Registers(scheme, ivp, params)
    x0 = np.asarray(ivp.initial(params), dtype=float)
    if len(x0) != scheme.dimension:
        raise ValueError(f"IVP has dimension {len(x0)}, scheme has {scheme.dimension}")
    y = [encode(Fraction(float(x)) + b, fmt) for x, b, fmt in zip(x0, regs.bias, scheme.formats)]
    prefix = [y]
    for i in range(1, scheme.k):
        t = ivp.t0 + (i - 1) * scheme.h
        prefix.append(_rk4_soft(regs, prefix[-1], t, scheme.h, ledger))
    return prefix


def qlmm_step(window, scheme: Scheme, ivp: IvpSpec, params, ledger: AncillaLedger, n: int = 0,
              derivs=None):
    """Advance ``y_n .. y_{n+k-1}`` to ``y_{n+k}``.

    ``derivs`` optionally supplies the already-evaluated derivative registers
    for the window entries (index-aligned; entry 0 is never used).
    """
    k = scheme.k
    if len(window) != k:
        raise ValueError(f"window must hold {k} states, got {len(window)}")
    regs = _Registers(scheme, ivp, params)
    if derivs is None:
        derivs = [None] + [regs.derivative(ivp.t0 + (n + j) * scheme.h, window[j])
                           for j in range(1, k)]
    alpha, beta = scheme.coeffs.alpha, scheme.coeffs.beta
    h = Fraction(scheme.h)
    out = []
    for d, fmt in enumerate(scheme.formats):
        head = scale_pow2(window[0][d], -scheme.a0)
        coeffs, values = [], []
        for i in range(1, k):
            if alpha[i]:
                coeffs.append(-Fraction(alpha[i]))
                values.append(window[i][d])
        for j in range(1, k):
            sign, reg = derivs[j][d]
            if beta[j] and sign:
                coeffs.append(h * Fraction(beta[j]) * sign)
                values.append(reg)
        tail = weighted_sum(coeffs, values, ledger, out_format=fmt)
        try:
            out.append(add_margined(head, tail, ledger))
        except MarginError as exc:
            raise MarginError(f"step {n}, dim {d}: {exc}") from exc
    return out


def run(scheme: Scheme, ivp: IvpSpec, params, cost_model: CostModel | None = None) -> RunRecord:
    """Full trajectory ``y_0 .. y_{N+k-1}`` in register arithmetic."""
    cost_model = cost_model or CostModel()
    ledger = AncillaLedger()
    traj = init_prefix(scheme, ivp, params, ledger)
    regs = _Registers(scheme, ivp, params)
    k = scheme.k
    derivs = [None] + [regs.derivative(ivp.t0 + j * scheme.h, traj[j]) for j in range(1, k)]
    for n in range(scheme.n_steps):
        try:
            nxt = qlmm_step(traj[n:n + k], scheme, ivp, params, ledger, n, derivs[n:n + k])
        except MarginError as exc:
            exc.step = n
            raise
        traj.append(nxt)
        derivs.append(regs.derivative(ivp.t0 + (n + k) * scheme.h, nxt))
    decoded = np.array([regs.unbias(y) for y in traj])
    times = ivp.t0 + scheme.h * np.arange(len(traj))
    return RunRecord(traj, decoded, times, ledger, depth_estimate(scheme, cost_model),
                     regs.bias)


def resource_estimate(scheme: Scheme, model: CostModel | None = None) -> int:
    model = model or CostModel()
    return model.qubits(scheme.k, scheme.mantissas, scheme.exponents, scheme.margins,
                        scheme.n_steps)


def depth_estimate(scheme: Scheme, model: CostModel | None = None) -> int:
    model = model or CostModel()
    return model.depth(scheme.mantissas, scheme.exponents, scheme.margins, scheme.n_steps)
