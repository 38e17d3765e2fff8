"""Rotation by ``q`` on the circle and its first return map to ``[0, q)``.

The heights reached by the time-``q`` map of the suspension flow are the
values ``n*q mod 1``.  Spacer pieces only see heights below ``q``, so the
relevant objects are the indices ``a_n`` with ``a_n*q mod 1 < q``, the
return map ``g`` of the rotation to ``[0, q)`` and a pair of recursively
defined index sequences ``(m_i, k_i)``.

All comparisons are exact: a residue ``n*q mod 1`` is the module element
``n*q - floor(n*q)`` and its order relations are decided by the
:class:`~staircase_flow.exact.QValue` of ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import mpmath

from .exact import QNum, QValue, RationalQ, as_fraction
from .suspension import N0

__all__ = [
    "as_field",
    "residue",
    "under_q_sequence",
    "ReturnSequences",
    "return_sequences",
    "FirstReturnMap",
    "first_return_rotation",
    "rotation_returns",
    "OrbitComparison",
    "compare_with_orbit",
    "IdentityVerdict",
    "check_k_equals_a_even",
    "gap_lengths",
]


def as_field(q) -> QValue:
    """Accept a :class:`QValue` or an exact rational (wrapped as :class:`RationalQ`)."""
    if isinstance(q, QValue):
        return q
    return RationalQ(as_fraction(q))


def residue(q: QValue, n: int) -> QNum:
    """The element ``n*q mod 1 = n*q - floor(n*q)``."""
    return q.num(-q.floor_multiple(n), n)


def _first_exceeding(x: QNum) -> int:
    """Smallest integer ``p`` with ``(p - 1)*x < 1 < p*x``.

    Raises
    ------
    ValueError
        If ``1/x`` is an integer, so that no integer satisfies both strict
        inequalities.
    """
    if x.sign() <= 0:
        raise ValueError("the residue must be positive")
    # float guess from a high-precision evaluation, then exact correction
    digits = 30 + len(str(abs(x.b.numerator)))
    with mpmath.workdps(digits):
        guess = int(mpmath.floor(1 / x.to_mpf(digits))) + 1
    guess = max(guess, 1)
    field_ = x.field

    def times_minus_one(p: int) -> int:
        return field_.sign(p * x.a - 1, p * x.b)

    while guess > 1 and times_minus_one(guess - 1) > 0:
        guess -= 1
    while times_minus_one(guess) <= 0:
        if times_minus_one(guess) == 0:
            raise ValueError("1/x is an integer; the strict inequalities have no solution")
        guess += 1
    if guess > 1 and times_minus_one(guess - 1) == 0:
        raise ValueError("1/x is an integer; the strict inequalities have no solution")
    return guess


# ---------------------------------------------------------------------------
# index sequences
# ---------------------------------------------------------------------------
def under_q_sequence(q, N: int) -> List[int]:
    """First ``N`` positive integers ``n`` with ``n*q mod 1 < q`` (strict).

    The condition ``n*q - floor(n*q) < q`` is tested exactly as
    ``(n - 1)*q < floor(n*q)``; ``n = 1`` never qualifies since
    ``q mod 1 = q``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    field_ = as_field(q)
    out: List[int] = []
    n = 1
    while len(out) < N:
        if field_.sign(-field_.floor_multiple(n), n - 1) < 0:
            out.append(n)
        n += 1
    return out


@dataclass(frozen=True)
class ReturnSequences:
    """The alternating sequences ``m_i`` and ``k_i``.

    Attributes
    ----------
    m, k : list of int
        ``m_1 < k_1 < m_2 < k_2 < ...``.
    m_factor, k_factor : list of int
        The minimal multipliers ``m'_i`` and ``k'_i`` (``m'_1 = m_1``).
    m_residue, k_residue : list of QNum
        ``m_i*q mod 1`` and ``k_i*q mod 1``.
    """

    m: List[int]
    k: List[int]
    m_factor: List[int]
    k_factor: List[int]
    m_residue: List[QNum]
    k_residue: List[QNum]


def return_sequences(q, depth: int) -> ReturnSequences:
    """Build ``(m_i, k_i)`` for ``i = 1..depth``.

    ``m_1`` is the smallest integer with ``(m_1 - 1)q < 1 < m_1 q``.  Each
    later term multiplies the previous one by the smallest ``p`` with
    ``(p - 1)x < 1 < p x``, where ``x`` is the residue of the previous term,
    and the terms alternate between the ``m`` and ``k`` lists.

    Raises
    ------
    ValueError
        If a strict inequality cannot be met (rational ``q``).
    AssertionError
        If a computed residue is not below ``q``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    field_ = as_field(q)
    seq = ReturnSequences([], [], [], [], [], [])
    cur = 1
    x = field_.q
    for _ in range(2 * depth):
        p = _first_exceeding(x)
        cur *= p
        x = residue(field_, cur)
        assert x < field_.q, f"residue of {cur} is not below q"
        if len(seq.m) == len(seq.k):
            seq.m.append(cur)
            seq.m_factor.append(p)
            seq.m_residue.append(x)
        else:
            seq.k.append(cur)
            seq.k_factor.append(p)
            seq.k_residue.append(x)
    return seq


# ---------------------------------------------------------------------------
# first return map
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class FirstReturnMap:
    """First return map ``g`` of ``x -> x + q mod 1`` to ``[0, q)``.

    ``g`` exchanges ``[0, c)`` and ``[c, q)``: points left of the exchange
    point ``c = 1 - (N0 - 1)q`` return after ``N0`` steps and move right by
    ``alpha = N0*q - 1``; the others return after ``N0 - 1`` steps and move
    left by ``q - alpha``.  Equivalently ``g`` is the rotation by ``alpha``
    of the circle of length ``q``.

    Attributes
    ----------
    q : QValue
    N0 : int
        Smallest integer with ``(N0 - 1)q < 1 <= N0 q``.
    exchange_point : QNum
        ``c``.
    alpha : QNum
        Rotation amount on ``[0, q)``.
    return_times : tuple of int
        ``(N0, N0 - 1)`` for ``[0, c)`` and ``[c, q)``.
    """

    q: QValue
    N0: int
    exchange_point: QNum
    alpha: QNum
    return_times: Tuple[int, int]

    @property
    def rotation_number(self) -> float:
        """``alpha / q`` as a float."""
        return float(self.alpha) / float(self.q)

    def return_time(self, x: QNum) -> int:
        self._check(x)
        return self.return_times[0] if x < self.exchange_point else self.return_times[1]

    def __call__(self, x: QNum) -> QNum:
        self._check(x)
        if x < self.exchange_point:
            return x + self.alpha
        return x + self.alpha - self.q.q

    def iterate(self, x: QNum, n: int) -> List[QNum]:
        """``[x, g(x), ..., g^n(x)]``."""
        out = [x]
        for _ in range(n):
            x = self(x)
            out.append(x)
        return out

    def _check(self, x: QNum):
        if x.sign() < 0 or not x < self.q.q:
            raise ValueError(f"{x!r} is outside [0, q)")


def first_return_rotation(q) -> FirstReturnMap:
    """Exact description of the first return map to ``[0, q)``."""
    field_ = as_field(q)
    n0 = N0(field_)
    c = field_.num(1, -(n0 - 1))
    alpha = field_.num(-1, n0)
    return FirstReturnMap(field_, n0, c, alpha, (n0, n0 - 1))


def rotation_returns(q, x0: QNum, steps: int) -> List[Tuple[int, QNum]]:
    """Simulate ``steps`` rotations from ``x0`` and list the visits to ``[0, q)``.

    Returns ``(n, x_n)`` for every ``1 <= n <= steps`` with ``x_n < q``.
    This is the brute-force oracle for :class:`FirstReturnMap`.
    """
    field_ = as_field(q)
    one = field_.one
    qq = field_.q
    x = x0
    out = []
    for n in range(1, steps + 1):
        x = x + qq
        if x >= one:
            x = x - one
        if x < qq:
            out.append((n, x))
    return out


@dataclass(frozen=True)
class OrbitComparison:
    """Result of comparing ``g`` with a simulated rotation orbit."""

    steps: int
    returns: int
    mismatches: int
    first_mismatch: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def compare_with_orbit(g: FirstReturnMap, x0: QNum, steps: int) -> OrbitComparison:
    """Check ``g`` point by point (position and return time) against the orbit of ``x0``."""
    visits = rotation_returns(g.q, x0, steps)
    x = x0
    last = 0
    bad = 0
    first = None
    for idx, (n, y) in enumerate(visits):
        expected_time = g.return_time(x)
        x = g(x)
        if y != x or n - last != expected_time:
            bad += 1
            if first is None:
                first = idx
            x = y  # resynchronise so one error is not counted repeatedly
        last = n
    return OrbitComparison(steps, len(visits), bad, first)


@dataclass(frozen=True)
class IdentityVerdict:
    """Outcome of testing ``k_i = a_{2i}`` for ``i = 1..depth``."""

    holds: bool
    first_mismatch: Optional[int]
    pairs: List[Tuple[int, int, int]] = field(default_factory=list)

    def summary(self) -> str:
        if self.holds:
            return f"k_i = a_2i holds for i = 1..{len(self.pairs)}"
        i, k, a = self.pairs[self.first_mismatch - 1]
        return f"k_i = a_2i fails first at i = {i}: k_{i} = {k}, a_{2 * i} = {a}"


def check_k_equals_a_even(q, depth: int) -> IdentityVerdict:
    """Compare ``k_i`` from :func:`return_sequences` with ``a_{2i}`` from :func:`under_q_sequence`.

    Only indices with ``2i`` small enough to enumerate (``a_{2i}`` up to a
    few million) are compared.
    """
    seq = return_sequences(q, depth)
    ks = [k for k in seq.k if k <= 5_000_000]
    a = under_q_sequence(q, 2 * len(ks)) if ks else []
    pairs = [(i + 1, k, a[2 * i + 1]) for i, k in enumerate(ks)]
    first = next((i for i, k, ai in pairs if k != ai), None)
    return IdentityVerdict(first is None, first, pairs)


def gap_lengths(points: Sequence[QNum], length: QNum) -> List[QNum]:
    """Exact gaps between sorted points of the circle ``[0, length)``, wrap-around included."""
    if not points:
        return []
    pts = sorted(points)
    gaps = [b - a for a, b in zip(pts, pts[1:])]
    gaps.append(length - pts[-1] + pts[0])
    return gaps
