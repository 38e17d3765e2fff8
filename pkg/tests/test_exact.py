from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from staircase_flow.exact import (DEFAULT_Q, AmbiguousComparisonError, QNum, QuadraticQ, RationalQ, RealQ,
                                  decimal_str, fraction_str, parse_fraction)

rationals = st.fractions(min_value=-50, max_value=50, max_denominator=1000)


def test_default_q_is_inverse_sqrt2():
    assert abs(float(DEFAULT_Q) - 2 ** -0.5) < 1e-15
    assert DEFAULT_Q.to_json() == {"mode": "quadratic", "alpha": 0, "beta": 1, "gamma": 2, "d": 2}


def test_quadratic_rejects_square_radicand():
    with pytest.raises(ValueError):
        QuadraticQ(0, 1, 2, 4)


@settings(max_examples=300, deadline=None)
@given(rationals, rationals)
def test_sign_matches_high_precision(a, b):
    exact = DEFAULT_Q.sign(a, b)
    with mpmath.workdps(60):
        v = mpmath.mpf(a.numerator) / a.denominator + mpmath.mpf(b.numerator) / b.denominator / mpmath.sqrt(2)
    assert exact == (0 if v == 0 else (1 if v > 0 else -1))


@settings(max_examples=300, deadline=None)
@given(rationals, rationals)
def test_floor_brackets_value(a, b):
    f = DEFAULT_Q.floor(a, b)
    assert DEFAULT_Q.sign(a - f, b) >= 0
    assert DEFAULT_Q.sign(a - f - 1, b) < 0


@given(st.integers(min_value=0, max_value=10 ** 6))
def test_floor_multiple_against_isqrt(m):
    import math
    assert DEFAULT_Q.floor_multiple(m) == math.isqrt(m * m // 2)


@settings(max_examples=200, deadline=None)
@given(rationals, rationals, rationals, rationals)
def test_qnum_field_laws(a, b, c, d):
    x, y = DEFAULT_Q.num(a, b), DEFAULT_Q.num(c, d)
    assert (x + y) - y == x
    assert x - x == DEFAULT_Q.zero
    assert (x < y) == (float(x) < float(y)) or abs(float(x) - float(y)) < 1e-9
    assert (x == y) == (a == c and b == d)


def test_qnum_orders_residues_of_large_multiples():
    # residues of large multiples have big coefficients; the float view must still be accurate
    n = 43200
    r = DEFAULT_Q.num(-DEFAULT_Q.floor_multiple(n), n)
    with mpmath.workdps(50):
        expect = mpmath.frac(n / mpmath.sqrt(2))
    assert abs(float(r) - float(expect)) < 1e-15


def test_real_mode_agrees_with_quadratic():
    real = RealQ("0.70710678118654752440084436210484903928483593768847", bits=160)
    for a, b in [(Fraction(1), Fraction(-1)), (Fraction(-3, 7), Fraction(1)), (Fraction(5), Fraction(-7))]:
        assert real.sign(a, b) == DEFAULT_Q.sign(a, b)


def test_real_mode_refuses_to_guess():
    text = "0.7071067811865475244008443621"
    real = RealQ(text, bits=64)
    # q - text vanishes at working precision: the sign is not decidable
    with pytest.raises(AmbiguousComparisonError):
        real.sign(-Fraction(text), 1)


def test_real_mode_flags_rational_input():
    with pytest.warns(RuntimeWarning):
        r = RealQ("0.5", bits=64)
    assert r.suspect_rational


def test_rational_mode_is_exact():
    q = RationalQ(Fraction(1, 2))
    assert q.sign(-1, 2) == 0
    assert q.floor_multiple(3) == 1


def test_fraction_strings_round_trip():
    for v in [Fraction(3, 7), Fraction(-5, 2), Fraction(4)]:
        assert parse_fraction(fraction_str(v)) == v
    assert parse_fraction(" 0.125 ") == Fraction(1, 8)
    with pytest.raises(ValueError):
        parse_fraction("1/0x")


def test_decimal_str_has_18_significant_digits():
    assert decimal_str(Fraction(1, 3)) == "3.33333333333333333e-01"
    assert decimal_str(0) == "0.00000000000000000e+00"
    assert decimal_str(Fraction(-2)) == "-2.00000000000000000e+00"
    assert decimal_str(DEFAULT_Q.q) == "7.07106781186547524e-01"
    assert decimal_str(Fraction(999999999999999999999, 10 ** 21)) == "1.00000000000000000e+00"


@given(rationals, rationals)
def test_exact_str_is_lossless(a, b):
    from staircase_flow.config import parse_qnum
    x = DEFAULT_Q.num(a, b)
    assert parse_qnum(x.exact_str(), DEFAULT_Q, "x") == x


def test_qnum_is_hashable_and_equal_by_value():
    x = QNum(Fraction(1), Fraction(2), DEFAULT_Q)
    assert len({x, DEFAULT_Q.num(1, 2)}) == 1
