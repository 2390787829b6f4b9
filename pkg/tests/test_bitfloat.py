import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlmm.bitfloat import (
    AncillaLedger,
    FloatFormat,
    MarginError,
    NegativeResultError,
    SoftValue,
    UnderflowError,
    add_margined,
    decode,
    default_workspace,
    encode,
    floor_log2,
    scale_pow2,
    truncate,
    weighted_sum,
)

SMALL = FloatFormat(4, 3, 0, 1)


def oracle_floor(x: Fraction, M: int) -> Fraction:
    """Largest M-significant-bit value <= x (x > 0), computed independently."""
    e = 0
    while Fraction(2) ** (e + 1) <= x:
        e += 1
    while Fraction(2) ** e > x:
        e -= 1
    q = Fraction(2) ** (e - M + 1)
    return math.floor(x / q) * q


def all_values(fmt):
    for e in range(fmt.max_exponent_field + 1):
        for m in range(1 << (fmt.mantissa_bits - 1), 1 << fmt.mantissa_bits):
            yield SoftValue(m, e, fmt)


def test_floor_log2_matches_float_for_dyadics():
    for p in range(-40, 40):
        assert floor_log2(Fraction(2) ** p) == p
        assert floor_log2(Fraction(2) ** p * Fraction(3, 2)) == p


def test_format_bounds():
    fmt = FloatFormat(4, 3, -2, 1)
    assert fmt.w_lower == Fraction(1, 4)
    # 15 * 2**(7 - 2 - 3)
    assert fmt.w_upper == 60
    assert fmt.tag == "M4E3A1off-2"


@pytest.mark.parametrize("kwargs", [dict(mantissa_bits=1, exponent_bits=3),
                                    dict(mantissa_bits=4, exponent_bits=0),
                                    dict(mantissa_bits=4, exponent_bits=3, margin_bits=0)])
def test_format_rejects_degenerate_widths(kwargs):
    with pytest.raises(ValueError):
        FloatFormat(**kwargs)


@pytest.mark.parametrize("A, cost", [(1, 4), (2, 6), (3, 7), (4, 9), (7, 12), (8, 14)])
def test_ancilla_cost_closed_form(A, cost):
    assert FloatFormat(8, 3, 0, A).ancilla_cost == cost


def test_softvalue_rejects_unnormalized():
    with pytest.raises(ValueError):
        SoftValue(7, 0, SMALL)
    with pytest.raises(ValueError):
        SoftValue(8, 8, SMALL)


def test_round_trip_every_small_value():
    for v in all_values(SMALL):
        assert encode(decode(v), SMALL) == v
        assert SoftValue.from_text(v.to_text()) == v


@given(st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(10 ** 6)))
def test_encode_truncates_toward_zero(x):
    fmt = FloatFormat(12, 5, -10, 1)
    v = encode(x, fmt)
    assert v.value <= x < v.value + fmt.ulp(v.exponent_field)
    assert v.value == oracle_floor(x, 12)


def test_encode_range_errors():
    with pytest.raises(NegativeResultError):
        encode(-1, SMALL)
    with pytest.raises(UnderflowError):
        encode(0, SMALL)
    with pytest.raises(UnderflowError):
        encode(Fraction(1, 2), SMALL)
    with pytest.raises(OverflowError):
        encode(SMALL.w_upper * 2, SMALL)
    assert encode(SMALL.w_upper, SMALL).value == SMALL.w_upper


def test_text_form_rejects_garbage():
    with pytest.raises(ValueError):
        SoftValue.from_text("m:8 e:0")


def test_scale_pow2_only_moves_exponent():
    v = SoftValue(11, 3, SMALL)
    w = scale_pow2(v, -2)
    assert w.mantissa == 11 and w.value == v.value / 4
    with pytest.raises(UnderflowError):
        scale_pow2(v, -4)
    with pytest.raises(OverflowError):
        scale_pow2(v, 5)


@pytest.mark.parametrize("A", [1, 2])
def test_add_exhaustive_small_format(A):
    fmt = FloatFormat(4, 3, 0, A)
    ledger = AncillaLedger()
    adds = 0
    for a, b in itertools.product(all_values(fmt), repeat=2):
        gap = b.exponent_field - a.exponent_field
        exact = a.value + b.value
        if gap > A:
            with pytest.raises(MarginError):
                add_margined(a, b, ledger)
            continue
        if exact >= fmt.w_upper + fmt.ulp(fmt.max_exponent_field):
            with pytest.raises(OverflowError):
                add_margined(a, b, ledger)
            continue
        out = add_margined(a, b, ledger)
        adds += 1
        assert out.value == oracle_floor(exact, 4)
    assert ledger.consumed == adds * fmt.ancilla_cost


def test_margin_error_leaves_ledger_untouched():
    ledger = AncillaLedger()
    with pytest.raises(MarginError):
        add_margined(SoftValue(8, 0, SMALL), SoftValue(8, 2, SMALL), ledger)
    assert ledger.consumed == 0


def test_add_requires_matching_formats():
    with pytest.raises(ValueError):
        add_margined(SoftValue(8, 0, SMALL), SoftValue(8, 0, FloatFormat(4, 3, 1, 1)), AncillaLedger())


def test_weighted_sum_truncates_each_partial():
    fmt = FloatFormat(6, 4, -4, 1)
    rng = random.Random(3)
    for _ in range(300):
        n = rng.randint(1, 4)
        vals = [encode(Fraction(rng.randint(4, 4000), 64), fmt) for _ in range(n)]
        coeffs = [Fraction(rng.randint(-40, 40), 16) for _ in range(n)]
        acc = None
        for c, v in zip(coeffs, vals):
            term = truncate(c * v.value, 6)
            acc = term if acc is None else truncate(acc + term, 6)
        ledger = AncillaLedger()
        if acc <= 0:
            with pytest.raises((NegativeResultError, UnderflowError)):
                weighted_sum(coeffs, vals, ledger)
            continue
        try:
            out = weighted_sum(coeffs, vals, ledger)
        except UnderflowError:
            assert acc < fmt.w_lower
            continue
        assert out.value == acc
        assert ledger.consumed == 0
        assert ledger.reusable_peak == default_workspace(fmt)


def test_truncate_is_symmetric():
    x = Fraction(1234567, 1000)
    assert truncate(-x, 8) == -truncate(x, 8)
    assert truncate(Fraction(0), 5) == 0


def test_bracketing_leaves_headroom():
    fmt = FloatFormat.bracketing(10, 4, 9.25, 11.5, headroom=2)
    assert fmt.w_lower < Fraction(9.25) / 4
    assert fmt.w_upper > Fraction(11.5)
    with pytest.raises(ValueError):
        FloatFormat.bracketing(10, 1, 1.0, 1000.0)


@settings(max_examples=200)
@given(st.integers(8, 15), st.integers(0, 7), st.integers(8, 15), st.integers(0, 7))
def test_add_commutes(ma, ea, mb, eb):
    a, b = SoftValue(ma, ea, SMALL), SoftValue(mb, eb, SMALL)
    if abs(ea - eb) > 1:
        return
    try:
        left = add_margined(a, b, AncillaLedger())
    except OverflowError:
        return
    assert left == add_margined(b, a, AncillaLedger())


def test_encode_examples():
    one = encode(1.0, FloatFormat(3, 3, -3, 1))
    assert (one.mantissa, one.exponent_field, one.value) == (4, 3, 1)
    v = encode(0.3, FloatFormat(8, 4, -8, 1))
    assert v.mantissa == 153 and v.value == Fraction(153, 512)
    fmt = FloatFormat(27, 4, 3, 1)
    w = encode(69.7, fmt)
    assert abs(w.value - Fraction(69.7)) / Fraction(69.7) < Fraction(1, 2 ** 26)


def test_scale_examples():
    fmt = FloatFormat(8, 4, -4, 1)
    x = encode(10, fmt)
    assert scale_pow2(x, 0) == x
    assert scale_pow2(x, -1).value == 5
    assert scale_pow2(encode(3.25, fmt), 3).value == 26


def test_add_examples():
    fmt = FloatFormat(3, 3, -2, 1)
    a = encode(Fraction(3, 2), fmt)
    twice = add_margined(a, a, AncillaLedger())
    assert twice.mantissa == a.mantissa and twice.exponent_field == a.exponent_field + 1
    assert add_margined(encode(1, fmt), a, AncillaLedger()).value == Fraction(5, 2)


def test_weighted_sum_examples():
    fmt = FloatFormat(12, 4, -4, 1)
    one = encode(1, fmt)
    x = encode(Fraction(37, 8), fmt)
    assert weighted_sum([1], [x], AncillaLedger()) == x
    assert weighted_sum([Fraction(0.7427), Fraction(0.5)], [one, one], AncillaLedger()).value \
        == oracle_floor(Fraction(0.7427) + Fraction(1, 2), 12)
    assert weighted_sum([2, -1], [x, x], AncillaLedger()).value == x.value
