"""Exact arithmetic for the roof value ``q`` and the module ``Q + Q*q``.

Every time and height that occurs in the suspension flow is an element
``a + b*q`` with rational ``a`` and ``b``: a roof crossing costs either 1 or
``q``.  Because ``1`` and ``q`` are rationally independent, such an element is
determined by the pair ``(a, b)``, so equality and hashing are exact.  Only
order comparisons need to know the value of ``q``; they are delegated to a
:class:`QValue`, which decides signs either exactly (quadratic irrationals)
or with certified high-precision floating point (arbitrary reals).
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction
from numbers import Rational
from typing import Union

import mpmath

__all__ = [
    "AmbiguousComparisonError",
    "QValue",
    "QuadraticQ",
    "RealQ",
    "RationalQ",
    "QNum",
    "RationalLike",
    "as_fraction",
    "parse_fraction",
    "fraction_str",
    "decimal_str",
    "DEFAULT_Q",
]

RationalLike = Union[int, Fraction]


class AmbiguousComparisonError(ArithmeticError):
    """Raised when a high-precision comparison cannot be certified."""


def as_fraction(value) -> Fraction:
    """Convert ``value`` to a :class:`~fractions.Fraction` without rounding.

    Strings are parsed with :func:`parse_fraction`; floats are rejected
    because they would silently import binary rounding error into exact
    computations.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        return parse_fraction(value)
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def parse_fraction(text: str) -> Fraction:
    """Parse ``"p/q"``, ``"p"`` or a finite decimal string exactly."""
    text = text.strip()
    if not text:
        raise ValueError("empty rational string")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not an exact rational: {text!r}") from exc


def fraction_str(value: Fraction) -> str:
    """Render a rational as ``"p/q"`` (or ``"p"`` for integers)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def decimal_str(value, digits: int = 18) -> str:
    """Format a real number with ``digits`` significant digits.

    Accepts Fractions, ints, floats, mpmath numbers and :class:`QNum`.  The
    output is fixed scientific notation so that it is byte-stable across
    platforms.
    """
    if isinstance(value, QNum):
        value = value.to_mpf(digits + 10)
    with mpmath.workdps(digits + 10):
        if isinstance(value, Fraction):
            x = mpmath.mpf(value.numerator) / value.denominator
        else:
            x = mpmath.mpf(value)
        if x == 0:
            return "0." + "0" * (digits - 1) + "e+00"
        sign = "-" if x < 0 else ""
        x = abs(x)
        exponent = int(mpmath.floor(mpmath.log10(x)))
        mantissa = x / mpmath.mpf(10) ** exponent
        scaled = int(mpmath.nint(mantissa * mpmath.mpf(10) ** (digits - 1)))
        if scaled >= 10 ** digits:
            scaled //= 10
            exponent += 1
        elif scaled < 10 ** (digits - 1):
            scaled *= 10
            exponent -= 1
        text = str(scaled)
        return f"{sign}{text[0]}.{text[1:]}e{exponent:+03d}"


class QValue:
    """Abstract roof value ``q`` in ``(0, 1)``.

    Subclasses implement :meth:`sign`, which returns the sign of
    ``a + b*q`` for rationals ``a`` and ``b``.  Everything else is built on
    top of that single primitive.
    """

    mode: str = "abstract"

    def sign(self, a: Fraction, b: Fraction) -> int:  # pragma: no cover - interface
        raise NotImplementedError

    def __float__(self) -> float:  # pragma: no cover - interface
        raise NotImplementedError

    def to_mpf(self, dps: int = 30):  # pragma: no cover - interface
        raise NotImplementedError

    def to_json(self) -> dict:  # pragma: no cover - interface
        raise NotImplementedError

    # -- derived helpers -------------------------------------------------
    def floor(self, a, b) -> int:
        """Return ``floor(a + b*q)`` exactly."""
        a = as_fraction(a)
        b = as_fraction(b)
        guess = math.floor(float(a) + float(b) * float(self))
        # Correct the float guess; it is off by at most one or two units.
        while self.sign(a - guess, b) < 0:
            guess -= 1
        while self.sign(a - guess - 1, b) >= 0:
            guess += 1
        return guess

    def floor_multiple(self, m: int) -> int:
        """Return ``floor(m*q)`` for an integer ``m``."""
        return self.floor(0, m)

    def num(self, a=0, b=0) -> "QNum":
        """Build the element ``a + b*q``."""
        return QNum(as_fraction(a), as_fraction(b), self)

    @property
    def one(self) -> "QNum":
        return QNum(Fraction(1), Fraction(0), self)

    @property
    def q(self) -> "QNum":
        return QNum(Fraction(0), Fraction(1), self)

    @property
    def zero(self) -> "QNum":
        return QNum(Fraction(0), Fraction(0), self)


class QuadraticQ(QValue):
    """Quadratic irrational ``q = (alpha + beta*sqrt(d)) / gamma``.

    Parameters
    ----------
    alpha, beta, gamma, d : int
        Integer data.  ``d`` must be a positive non-square, ``beta`` and
        ``gamma`` non-zero, and the resulting value must lie in ``(0, 1)``.

    Notes
    -----
    The sign of ``x + y*sqrt(d)`` for rationals ``x, y`` is decided by
    comparing ``x**2`` with ``d*y**2`` when the two terms have opposite
    signs.  A float fast path with a safety margin handles the common case.
    """

    mode = "quadratic"

    def __init__(self, alpha: int, beta: int, gamma: int, d: int):
        for name, value in (("alpha", alpha), ("beta", beta), ("gamma", gamma), ("d", d)):
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if d <= 1 or math.isqrt(d) ** 2 == d:
            raise ValueError(f"d={d} must be a positive non-square integer")
        if beta == 0:
            raise ValueError("beta must be non-zero for q to be irrational")
        if gamma == 0:
            raise ValueError("gamma must be non-zero")
        self.alpha, self.beta, self.gamma, self.d = alpha, beta, gamma, d
        self._float = (alpha + beta * math.sqrt(d)) / gamma
        # Exact range check 0 < q < 1.
        if self.sign(Fraction(0), Fraction(1)) <= 0 or self.sign(Fraction(-1), Fraction(1)) >= 0:
            raise ValueError(f"q={self._float!r} is not in the open interval (0, 1)")

    @classmethod
    def inverse_sqrt2(cls) -> "QuadraticQ":
        """The default roof value ``1/sqrt(2) = sqrt(2)/2``."""
        return cls(0, 1, 2, 2)

    def _sign_surd(self, x: Fraction, y: Fraction) -> int:
        """Sign of ``x + y*sqrt(d)``."""
        if y == 0:
            return (x > 0) - (x < 0)
        if x == 0:
            return (y > 0) - (y < 0)
        if (x > 0) == (y > 0):
            return 1 if x > 0 else -1
        lhs = x * x
        rhs = y * y * self.d
        if lhs == rhs:  # impossible for non-square d, kept for safety
            return 0
        if x > 0:
            return 1 if lhs > rhs else -1
        return 1 if rhs > lhs else -1

    def sign(self, a, b) -> int:
        if b == 0:
            return (a > 0) - (a < 0)
        try:
            fa, fb = float(a), float(b)
        except OverflowError:
            pass
        else:
            approx = fa + fb * self._float
            margin = 1e-12 * (abs(fa) + abs(fb) + 1.0)
            if approx > margin:
                return 1
            if approx < -margin:
                return -1
        a = as_fraction(a)
        b = as_fraction(b)
        # a + b*q = (a*gamma + b*alpha + b*beta*sqrt(d)) / gamma
        s = self._sign_surd(a * self.gamma + b * self.alpha, b * self.beta)
        return s if self.gamma > 0 else -s

    def floor(self, a, b) -> int:
        """Exact ``floor(a + b*q)`` using an integer square root."""
        a = as_fraction(a)
        b = as_fraction(b)
        # a + b*q = (P + Q*sqrt(d)) / R with integers and R > 0.
        x = a * self.gamma + b * self.alpha
        y = b * self.beta
        den = x.denominator * y.denominator // math.gcd(x.denominator, y.denominator)
        P = x.numerator * (den // x.denominator)
        Q = y.numerator * (den // y.denominator)
        R = den * self.gamma
        if R < 0:
            P, Q, R = -P, -Q, -R
        if Q == 0:
            return P // R
        root = math.isqrt(Q * Q * self.d)  # floor(|Q|*sqrt(d)); never exact
        floor_s = root if Q > 0 else -root - 1
        return (P + floor_s) // R

    def __float__(self) -> float:
        return self._float

    def to_mpf(self, dps: int = 30):
        with mpmath.workdps(dps + 5):
            return (self.alpha + self.beta * mpmath.sqrt(self.d)) / self.gamma

    def to_json(self) -> dict:
        return {"mode": "quadratic", "alpha": self.alpha, "beta": self.beta,
                "gamma": self.gamma, "d": self.d}

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuadraticQ):
            return NotImplemented
        return (self.alpha, self.beta, self.gamma, self.d) == (other.alpha, other.beta, other.gamma, other.d)

    def __hash__(self) -> int:
        return hash(("quadratic", self.alpha, self.beta, self.gamma, self.d))

    def __repr__(self) -> str:
        return f"QuadraticQ(alpha={self.alpha}, beta={self.beta}, gamma={self.gamma}, d={self.d})"


class RealQ(QValue):
    """Roof value given as a high-precision real number.

    Comparisons are evaluated with ``bits`` bits of working precision and a
    certified error bound; a comparison that falls inside the bound raises
    :class:`AmbiguousComparisonError` instead of guessing.

    Parameters
    ----------
    value : str or mpmath number
        Decimal string such as ``"0.70710678118654752440084436210484903928"``.
    bits : int
        Working precision, at least 64.
    """

    mode = "real"

    def __init__(self, value, bits: int = 128):
        if bits < 64:
            raise ValueError("real mode requires at least 64 bits of precision")
        self.bits = int(bits)
        self._text = str(value)
        with mpmath.workprec(self.bits):
            self._value = mpmath.mpf(value)
        if not (0 < self._value < 1):
            raise ValueError(f"q={self._text} is not in the open interval (0, 1)")
        self._float = float(self._value)
        self.suspect_rational = self._looks_rational()
        if self.suspect_rational:
            warnings.warn(
                f"q={self._text} looks rational at {self.bits} bits; "
                "rational independence of (1, q) may fail",
                RuntimeWarning,
                stacklevel=2,
            )

    def _looks_rational(self) -> bool:
        """Continued-fraction heuristic for rationality.

        A number is flagged when its expansion terminates, or produces an
        enormous partial quotient, long before the available precision is
        used up.
        """
        with mpmath.workprec(self.bits):
            x = self._value
            den_prev, den = 0, 1
            limit = mpmath.mpf(2) ** (self.bits // 2)
            for _ in range(self.bits):
                a = int(mpmath.floor(x))
                den_prev, den = den, a * den + den_prev
                frac = x - a
                if den > 2 ** (self.bits // 4):
                    return False
                if frac == 0 or 1 / frac > limit:
                    return True
                x = 1 / frac
        return False

    def sign(self, a, b) -> int:
        a = as_fraction(a) if not isinstance(a, mpmath.mpf) else a
        b = as_fraction(b) if not isinstance(b, mpmath.mpf) else b
        if b == 0:
            return (a > 0) - (a < 0)
        with mpmath.workprec(self.bits + 16):
            am = mpmath.mpf(a.numerator) / a.denominator if isinstance(a, Fraction) else a
            bm = mpmath.mpf(b.numerator) / b.denominator if isinstance(b, Fraction) else b
            val = am + bm * self._value
            # |q_true - q| <= 2**-bits; rounding of the evaluation adds a few ulps.
            bound = (abs(bm) + abs(am) + 1) * mpmath.mpf(2) ** (-self.bits + 4)
            if val > bound:
                return 1
            if val < -bound:
                return -1
        raise AmbiguousComparisonError(
            f"cannot decide the sign of {a} + {b}*q at {self.bits} bits"
        )

    def floor(self, a, b) -> int:
        a = as_fraction(a)
        b = as_fraction(b)
        extra = abs(a.numerator).bit_length() + abs(b.numerator).bit_length() + 16
        with mpmath.workprec(self.bits + extra):
            val = (mpmath.mpf(a.numerator) / a.denominator
                   + mpmath.mpf(b.numerator) / b.denominator * self._value)
            guess = int(mpmath.floor(val))
        # Certify the guess with sign tests; ambiguity propagates as an error.
        while self.sign(a - guess, b) < 0:
            guess -= 1
        while self.sign(a - guess - 1, b) >= 0:
            guess += 1
        return guess

    def __float__(self) -> float:
        return self._float

    def to_mpf(self, dps: int = 30):
        return +self._value

    def to_json(self) -> dict:
        return {"mode": "real", "value": self._text, "bits": self.bits}

    def __eq__(self, other) -> bool:
        if not isinstance(other, RealQ):
            return NotImplemented
        return self._value == other._value and self.bits == other.bits

    def __hash__(self) -> int:
        return hash(("real", self._text, self.bits))

    def __repr__(self) -> str:
        return f"RealQ({self._text!r}, bits={self.bits})"


class RationalQ(QValue):
    """Rational ``q`` in ``(0, 1)``, for boundary tests of the rotation tools.

    Signs and floors are exact.  Because ``1`` and ``q`` are then rationally
    dependent, :class:`QNum` equality (which compares coefficient pairs) is
    not value equality; the flow engine rejects this mode.
    """

    mode = "rational"

    def __init__(self, value):
        self.value = as_fraction(value)
        if not 0 < self.value < 1:
            raise ValueError(f"q={self.value} is not in the open interval (0, 1)")

    def sign(self, a, b) -> int:
        v = as_fraction(a) + as_fraction(b) * self.value
        return (v > 0) - (v < 0)

    def floor(self, a, b) -> int:
        return math.floor(as_fraction(a) + as_fraction(b) * self.value)

    def __float__(self) -> float:
        return float(self.value)

    def to_mpf(self, dps: int = 30):
        with mpmath.workdps(dps + 5):
            return mpmath.mpf(self.value.numerator) / self.value.denominator

    def to_json(self) -> dict:
        return {"mode": "rational", "value": fraction_str(self.value)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalQ):
            return NotImplemented
        return self.value == other.value

    def __hash__(self) -> int:
        return hash(("rational", self.value))

    def __repr__(self) -> str:
        return f"RationalQ({fraction_str(self.value)!r})"


class QNum:
    """Element ``a + b*q`` of the module ``Q + Q*q``.

    Equality and hashing use the exact pair ``(a, b)``.  Order comparisons
    consult the attached :class:`QValue`.  Plain rationals mix freely with
    ``QNum`` values.
    """

    __slots__ = ("a", "b", "field")

    def __init__(self, a: Fraction, b: Fraction, field: QValue):
        self.a = a
        self.b = b
        self.field = field

    def _coerce(self, other):
        if isinstance(other, QNum):
            return other.a, other.b
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return Fraction(other), Fraction(0)
        return None

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return QNum(self.a + pair[0], self.b + pair[1], self.field)

    __radd__ = __add__

    def __sub__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return QNum(self.a - pair[0], self.b - pair[1], self.field)

    def __rsub__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return QNum(pair[0] - self.a, pair[1] - self.b, self.field)

    def __neg__(self):
        return QNum(-self.a, -self.b, self.field)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return QNum(self.a * other, self.b * other, self.field)
        return NotImplemented

    __rmul__ = __mul__

    def sign(self) -> int:
        return self.field.sign(self.a, self.b)

    def _cmp(self, other) -> int:
        pair = self._coerce(other)
        if pair is None:
            raise TypeError(f"cannot compare QNum with {type(other).__name__}")
        return self.field.sign(self.a - pair[0], self.b - pair[1])

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return self.a == pair[0] and self.b == pair[1]

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b))

    def __float__(self) -> float:
        a, bq = float(self.a), float(self.b) * float(self.field)
        value = a + bq
        # the double sum has absolute error about (|a| + |b q|) * 2**-52; accept
        # it when cancellation costs at most 4 of the 53 bits
        if abs(a) + abs(bq) <= 16.0 * abs(value):
            return value
        size = max(abs(self.a.numerator), abs(self.b.numerator), abs(self.a.denominator),
                   abs(self.b.denominator), 1).bit_length()
        return float(self.to_mpf(20 + size // 3))

    def to_mpf(self, dps: int = 30):
        with mpmath.workdps(dps + 5):
            q = self.field.to_mpf(dps + 5)
            return (mpmath.mpf(self.a.numerator) / self.a.denominator
                    + mpmath.mpf(self.b.numerator) / self.b.denominator * q)

    def floor(self) -> int:
        return self.field.floor(self.a, self.b)

    def is_rational(self) -> bool:
        return self.b == 0

    def to_json(self):
        """``"p/q"`` for rational values, ``{"a": .., "b": ..}`` otherwise."""
        if self.b == 0:
            return fraction_str(self.a)
        return {"a": fraction_str(self.a), "b": fraction_str(self.b)}

    def exact_str(self) -> str:
        """Lossless text form ``a+b*q`` (or ``a-c*q``) with rational coefficients."""
        sign = "-" if self.b < 0 else "+"
        return f"{fraction_str(self.a)}{sign}{fraction_str(abs(self.b))}*q"

    def __repr__(self) -> str:
        return f"QNum({fraction_str(self.a)} + {fraction_str(self.b)}*q)"


DEFAULT_Q = QuadraticQ.inverse_sqrt2()
