"""Bit-exact unsigned floating point with a margined in-place adder.

Values are strictly positive and stored as a normalized mantissa with an
explicit leading bit plus an unsigned exponent field::

    value = mantissa * 2 ** (exponent_field + exponent_offset - (M - 1))

All arithmetic truncates toward zero.  Exact values are carried as
:class:`fractions.Fraction` so results can be compared bit for bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real


class UnderflowError(ArithmeticError):
    """Value below the smallest representable magnitude (or zero)."""


class MarginError(ArithmeticError):
    """Addend too large for the margin register of the in-place adder."""


class NegativeResultError(ArithmeticError):
    """A stored quantity went negative; the bias no longer covers the state."""


def floor_log2(x: Fraction) -> int:
    """Exact ``floor(log2(x))`` for a positive rational."""
    if x <= 0:
        raise ValueError("floor_log2 requires a positive value")
    n, d = x.numerator, x.denominator
    p = n.bit_length() - d.bit_length()
    # 2**p <= n/d  <=>  n << -p >= d (p<0)  or  n >= d << p (p>=0)
    if p >= 0:
        if n < (d << p):
            p -= 1
    elif (n << -p) < d:
        p -= 1
    return p


def truncate(x: Fraction, bits: int) -> Fraction:
    """Truncate ``x`` toward zero to ``bits`` significant bits (sign kept)."""
    if x == 0:
        return Fraction(0)
    mag = -x if x < 0 else x
    shift = bits - 1 - floor_log2(mag)
    if shift >= 0:
        q = Fraction((mag.numerator << shift) // mag.denominator, 1 << shift)
    else:
        q = Fraction(mag.numerator // (mag.denominator << -shift) << -shift)
    return -q if x < 0 else q


def _exact(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, SoftValue):
        return value.value
    if isinstance(value, Real):
        return Fraction(value)
    raise TypeError(f"cannot convert {type(value).__name__} to an exact value")


@dataclass(frozen=True)
class FloatFormat:
    mantissa_bits: int
    exponent_bits: int
    exponent_offset: int = 0
    margin_bits: int = 1

    def __post_init__(self):
        if self.mantissa_bits < 2:
            raise ValueError(f"mantissa_bits must be >= 2, got {self.mantissa_bits}")
        if self.exponent_bits < 1:
            raise ValueError(f"exponent_bits must be >= 1, got {self.exponent_bits}")
        if self.margin_bits < 1:
            # a zero-width margin cannot hold any addend of the in-place sum
            raise ValueError(f"margin_bits must be >= 1, got {self.margin_bits}")

    @property
    def max_exponent_field(self) -> int:
        return (1 << self.exponent_bits) - 1

    @property
    def w_lower(self) -> Fraction:
        return Fraction(2) ** self.exponent_offset

    @property
    def w_upper(self) -> Fraction:
        M = self.mantissa_bits
        return ((1 << M) - 1) * Fraction(2) ** (
            self.max_exponent_field + self.exponent_offset - (M - 1)
        )

    @property
    def ancilla_cost(self) -> int:
        """Non-uncomputable qubits left behind by one margined addition."""
        A = self.margin_bits
        return A + (A.bit_length() - 1) + 3

    @property
    def tag(self) -> str:
        return (
            f"M{self.mantissa_bits}E{self.exponent_bits}"
            f"A{self.margin_bits}off{self.exponent_offset}"
        )

    def ulp(self, exponent_field: int) -> Fraction:
        return Fraction(2) ** (exponent_field + self.exponent_offset - (self.mantissa_bits - 1))

    def with_mantissa(self, mantissa_bits: int) -> "FloatFormat":
        return FloatFormat(mantissa_bits, self.exponent_bits, self.exponent_offset, self.margin_bits)

    @classmethod
    def bracketing(cls, mantissa_bits, exponent_bits, lower, upper, margin_bits=1, headroom=0):
        """Format whose open range ``(w_lower, w_upper)`` contains ``[lower, upper]``.

        The offset is the largest one that keeps ``w_lower < lower * 2**-headroom``;
        ``headroom`` leaves room for values scaled down by a power of two.
        Raises ``ValueError`` if ``exponent_bits`` is too narrow for the span.
        """
        lower, upper = Fraction(lower), Fraction(upper)
        if lower <= 0 or upper < lower:
            raise ValueError(f"invalid range [{float(lower)}, {float(upper)}]")
        lower = lower / (1 << headroom)
        offset = floor_log2(lower)
        if Fraction(2) ** offset == lower:
            offset -= 1
        fmt = cls(mantissa_bits, exponent_bits, offset, margin_bits)
        if not fmt.w_upper > upper:
            raise ValueError(
                f"{exponent_bits} exponent bits cannot span [{float(lower)}, {float(upper)}]"
            )
        return fmt


_TEXT_RE = re.compile(r"^m:(\d+) e:(\d+) @M(\d+)E(\d+)A(\d+)off(-?\d+)$")


@dataclass(frozen=True)
class SoftValue:
    mantissa: int
    exponent_field: int
    format: FloatFormat

    def __post_init__(self):
        M = self.format.mantissa_bits
        if not (1 << (M - 1)) <= self.mantissa < (1 << M):
            raise ValueError(f"mantissa {self.mantissa} not normalized for M={M}")
        if not 0 <= self.exponent_field <= self.format.max_exponent_field:
            raise ValueError(
                f"exponent field {self.exponent_field} outside [0, {self.format.max_exponent_field}]"
            )

    @property
    def value(self) -> Fraction:
        return self.mantissa * self.format.ulp(self.exponent_field)

    def __float__(self) -> float:
        return float(self.value)

    def to_text(self) -> str:
        f = self.format
        return (
            f"m:{self.mantissa} e:{self.exponent_field} "
            f"@M{f.mantissa_bits}E{f.exponent_bits}A{f.margin_bits}off{f.exponent_offset}"
        )

    @classmethod
    def from_text(cls, text: str) -> "SoftValue":
        match = _TEXT_RE.match(text.strip())
        if match is None:
            raise ValueError(f"malformed SoftValue text: {text!r}")
        m, e, M, E, A, off = (int(g) for g in match.groups())
        return cls(m, e, FloatFormat(M, E, off, A))

    def __repr__(self):
        return f"SoftValue({self.to_text()!r} = {float(self.value)!r})"


@dataclass
class AncillaLedger:
    """Running qubit tally for one trajectory.  Not thread-safe."""

    consumed: int = 0
    reusable_peak: int = 0

    def consume(self, n: int) -> None:
        if n < 0:
            raise ValueError("ancilla consumption cannot be negative")
        self.consumed += n

    def reserve(self, n: int) -> None:
        self.reusable_peak = max(self.reusable_peak, n)

    def copy(self) -> "AncillaLedger":
        return AncillaLedger(self.consumed, self.reusable_peak)


def encode(value, fmt: FloatFormat) -> SoftValue:
    """Largest representable value not exceeding ``value``."""
    x = _exact(value)
    if x < 0:
        raise NegativeResultError(f"cannot encode negative value {float(x)}")
    if x == 0:
        raise UnderflowError("zero is not representable")
    p = floor_log2(x)
    e = p - fmt.exponent_offset
    if e > fmt.max_exponent_field:
        raise OverflowError(f"{float(x)} exceeds w_upper={float(fmt.w_upper)} of {fmt.tag}")
    if e < 0:
        raise UnderflowError(f"{float(x)} below w_lower={float(fmt.w_lower)} of {fmt.tag}")
    shift = fmt.mantissa_bits - 1 - p
    if shift >= 0:
        m = (x.numerator << shift) // x.denominator
    else:
        m = x.numerator // (x.denominator << -shift)
    return SoftValue(m, e, fmt)


def decode(x: SoftValue) -> Fraction:
    return x.value


def scale_pow2(x: SoftValue, n: int) -> SoftValue:
    """Multiply by ``2**n`` by adjusting the exponent field only."""
    e = x.exponent_field + n
    if e > x.format.max_exponent_field:
        raise OverflowError(f"exponent field {e} exceeds {x.format.max_exponent_field}")
    if e < 0:
        raise UnderflowError(f"exponent field {e} below 0")
    return SoftValue(x.mantissa, e, x.format)


def add_margined(a: SoftValue, b: SoftValue, ledger: AncillaLedger) -> SoftValue:
    """In-place sum ``a + b`` written back into ``a``'s register.

    ``a`` carries ``margin_bits`` extra low-order bits, so ``b`` may exceed
    it by at most that many binades.  The exact sum is truncated to the
    format; ``ledger.consumed`` grows by ``A + floor(log2 A) + 3``.
    """
    fmt = a.format
    if b.format != fmt:
        raise ValueError(f"format mismatch: {fmt.tag} vs {b.format.tag}")
    gap = b.exponent_field - a.exponent_field
    if gap > fmt.margin_bits:
        raise MarginError(
            f"addend exceeds margin: exponent gap {gap} > A={fmt.margin_bits}"
        )
    base = min(a.exponent_field, b.exponent_field)
    total = (a.mantissa << (a.exponent_field - base)) + (b.mantissa << (b.exponent_field - base))
    drop = total.bit_length() - fmt.mantissa_bits
    e = base + drop
    if e > fmt.max_exponent_field:
        raise OverflowError(f"sum exceeds w_upper={float(fmt.w_upper)} of {fmt.tag}")
    ledger.consume(fmt.ancilla_cost)
    return SoftValue(total >> drop, e, fmt)


def default_workspace(fmt: FloatFormat) -> int:
    # one product register and one accumulator, each M + E wide
    return 2 * (fmt.mantissa_bits + fmt.exponent_bits)


def weighted_sum(coeffs, values, ledger: AncillaLedger, out_format: FloatFormat | None = None,
                 workspace: int | None = None) -> SoftValue:
    """Truncating dot product ``sum(c_i * v_i)`` into a fresh register.

    Each product and each partial sum is truncated toward zero to the output
    mantissa width; intermediates may be negative, the result may not.  The
    workspace is uncomputed afterwards, so only ``ledger.reusable_peak`` moves.
    """
    coeffs = list(coeffs)
    values = list(values)
    if len(coeffs) != len(values):
        raise ValueError(f"{len(coeffs)} coefficients for {len(values)} values")
    if not values:
        raise ValueError("weighted_sum needs at least one term")
    fmt = out_format if out_format is not None else values[0].format
    M = fmt.mantissa_bits
    acc = None
    for c, v in zip(coeffs, values):
        term = truncate(_exact(c) * v.value, M)
        acc = term if acc is None else truncate(acc + term, M)
    ledger.reserve(default_workspace(fmt) if workspace is None else workspace)
    if acc < 0:
        raise NegativeResultError(f"weighted sum is negative ({float(acc)})")
    if acc == 0:
        raise UnderflowError("weighted sum is exactly zero")
    return encode(acc, fmt)
