"""Independent brute-force oracles for the test suite.

Nothing here imports the package: each oracle rebuilds its answer from the
definitions with plain lists, Fractions and integer arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, List

SQRT2 = math.sqrt(2.0)


def heights_by_recurrence(r: Callable[[int], int], s: Callable[[int, int], int], N: int) -> List[int]:
    """``[h_0, ..., h_N]`` from ``h_n = r_n h_{n-1} + sum_i s_{n,i}``."""
    h = [1]
    for n in range(1, N + 1):
        h.append(r(n) * h[-1] + sum(s(n, i) for i in range(1, r(n) + 1)))
    return h


def cut_and_stack(r: Callable[[int], int], s: Callable[[int, int], int], N: int):
    """Literal cutting and stacking up to stage ``N``.

    Returns ``(levels, width)`` where ``levels`` is the bottom-to-top list
    of ``(x_left, kind)`` with kind ``'N'`` or ``'S'``.  Spacers are taken
    left to right from the frontier in stacking order.
    """
    column = [(Fraction(0), "N")]
    width = Fraction(1)
    frontier = Fraction(1)
    for n in range(1, N + 1):
        rn = r(n)
        w = width / rn
        new = []
        for i in range(1, rn + 1):
            new.extend((x + (i - 1) * w, kind) for x, kind in column)
            for _ in range(s(n, i)):
                new.append((frontier, "S"))
                frontier += w
        column, width = new, w
    return column, width


def spacer_runs(kind_word: str) -> List[int]:
    """Maximal runs of ``'S'`` in a kind word, bottom to top."""
    runs, cur = [], 0
    for ch in kind_word:
        if ch == "S":
            cur += 1
        elif cur:
            runs.append(cur)
            cur = 0
    if cur:
        runs.append(cur)
    return runs


def T_by_levels(levels, width: Fraction, x: Fraction) -> Fraction:
    """Move ``x`` one level up in an explicit column (``x`` not in the top level)."""
    for k, (left, _) in enumerate(levels[:-1]):
        if left <= x < left + width:
            return x + levels[k + 1][0] - left
    raise ValueError("x is in the top level or outside the column")


def under_inv_sqrt2(N: int) -> List[int]:
    """First ``N`` integers ``n`` with ``n/sqrt(2) mod 1 < 1/sqrt(2)`` (exact integer test).

    ``n q - floor(n q) < q`` iff ``(n - 1) q < floor(n q)`` iff
    ``(n - 1)^2 < 2 floor(n q)^2`` (both sides non-negative).
    """
    out, n = [], 1
    while len(out) < N:
        f = math.isqrt(n * n // 2)
        if (n - 1) ** 2 < 2 * f * f:
            out.append(n)
        n += 1
    return out


def rotation_orbit_float(q: float, N: int) -> List[float]:
    """Float orbit ``n*q mod 1`` for ``n = 1..N``."""
    return [(n * q) % 1.0 for n in range(1, N + 1)]


def star_discrepancy_brute(points) -> float:
    """Star discrepancy by direct counting at every candidate endpoint (quadratic time)."""
    N = len(points)
    worst = 0.0
    for c in list(points) + [1.0]:
        below = sum(1 for p in points if p < c)
        upto = sum(1 for p in points if p <= c)
        worst = max(worst, abs(below / N - c), abs(upto / N - c))
    return worst
