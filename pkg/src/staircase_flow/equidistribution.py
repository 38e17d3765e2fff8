"""Equidistribution statistics for ``{n*q mod 1}`` and for flowed heights.

Two kinds of tools live here:

* classical statistics of the rotation orbit (star discrepancy, Weyl sums,
  frequencies along index subsequences);
* height sets of flowed ensembles, filtered by a base region and a vertical
  window, and the ratios comparing window counts with full-range counts.

Heights are exact :class:`~staircase_flow.exact.QNum` values, so
"distinct" means exactly distinct.  Windows are closed-open ``[lo, hi)``,
which makes counts over adjacent windows add up exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import mpmath
import numpy as np

from .exact import QNum, QValue, as_fraction
from .rotation import as_field, under_q_sequence
from .suspension import SegmentEnsemble, SuspensionFlow
from .trajectory import PhiQEnsemble

__all__ = [
    "star_discrepancy",
    "rotation_points",
    "weyl_sum",
    "DiscrepancyReport",
    "discrepancy_report",
    "LogBoundFit",
    "fit_log_bound",
    "NONSPACER",
    "SPACER",
    "HeightSet",
    "height_set",
    "phi_q_height_set",
    "H_ratio",
    "Hbar_ratio",
    "phi_q_ratio",
    "window_target",
    "subsequence_equidist",
    "block_height_indices",
    "ratio_rows",
]

NONSPACER = "nonspacer"
SPACER = "spacer"

_FIXED_BITS = 128

Cylinder = Tuple[int, int]
Base = Union[str, Cylinder]


# ---------------------------------------------------------------------------
# rotation statistics
# ---------------------------------------------------------------------------
def star_discrepancy(points: Sequence[float]) -> float:
    """Star discrepancy of points in ``[0, 1)`` by the sorted-points formula.

    ``D* = max_i max(i/N - x_(i), x_(i) - (i-1)/N)`` with ``x_(1) <= ... <= x_(N)``.
    """
    x = np.sort(np.asarray(points, dtype=float))
    N = x.size
    if N == 0:
        raise ValueError("at least one point is needed")
    if x[0] < 0 or x[-1] >= 1:
        raise ValueError("points must lie in [0, 1)")
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - x), np.max(x - (i - 1) / N)))


def rotation_points(q, N: int, start: int = 1) -> np.ndarray:
    """``n*q mod 1`` for ``n = start, ..., start + N - 1`` (floats).

    ``q`` is held as a 128-bit fixed-point integer and each residue is
    reduced with integer arithmetic, so the values are correct to double
    precision for any ``n`` below about ``2**70``.
    """
    field_ = as_field(q)
    scale = 1 << _FIXED_BITS
    with mpmath.workdps(50):
        fixed = int(mpmath.floor(field_.to_mpf(45) * scale))
    mask = scale - 1
    shift = _FIXED_BITS - 53
    out = np.empty(N, dtype=float)
    for k in range(N):
        n = start + k
        r = (n * fixed) & mask
        if r <= n or scale - r <= n:
            # within truncation error of an integer: decide exactly
            out[k] = float(field_.num(-field_.floor_multiple(n), n))
        else:
            out[k] = (r >> shift) / 2.0 ** 53
    return out


def weyl_sum(q, N: int, h: int) -> float:
    """``|(1/N) * sum_{n=1..N} exp(2*pi*i*h*n*q)|``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    x = rotation_points(q, N)
    return float(abs(np.exp(2j * np.pi * h * x).mean()))


@dataclass(frozen=True)
class DiscrepancyReport:
    """Summary statistics of the first ``N`` points of a rotation orbit.

    Attributes
    ----------
    N : int
    D_star : float
        Star discrepancy, in ``[0, 1]``.
    window_counts : dict
        ``(lo, hi) -> count`` for the requested windows.
    weyl : list of float
        ``|weyl_sum(q, N, h)|`` for ``h = 1..H``.
    """

    N: int
    D_star: float
    window_counts: Dict[Tuple[float, float], int]
    weyl: List[float]


def discrepancy_report(q, N: int, windows: Sequence[Tuple[float, float]] = ((0.0, 0.5),),
                       harmonics: int = 3) -> DiscrepancyReport:
    """Discrepancy, window counts and Weyl magnitudes of ``{n*q mod 1}``, ``n = 1..N``."""
    x = rotation_points(q, N)
    counts = {(float(lo), float(hi)): int(np.count_nonzero((x >= lo) & (x < hi)))
              for lo, hi in windows}
    weyl = [float(abs(np.exp(2j * np.pi * h * x).mean())) for h in range(1, harmonics + 1)]
    return DiscrepancyReport(N, star_discrepancy(x), counts, weyl)


@dataclass(frozen=True)
class LogBoundFit:
    """Fit of ``D*_N <= C log N / N`` on small ``N``, checked on larger ``N``."""

    C: float
    fit_N: List[int]
    check_N: List[int]
    check_values: List[float]
    slack: float

    @property
    def ok(self) -> bool:
        return all(d <= self.slack * self.C * math.log(n) / n
                   for n, d in zip(self.check_N, self.check_values))


def fit_log_bound(q, fit_N: Sequence[int] = (50, 100, 200, 400),
                  check_N: Sequence[int] = (2000, 5000, 10000), slack: float = 2.0) -> LogBoundFit:
    """Fit ``C`` as the largest ``D*_N * N / log N`` over ``fit_N``."""
    C = max(star_discrepancy(rotation_points(q, n)) * n / math.log(n) for n in fit_N)
    vals = [star_discrepancy(rotation_points(q, n)) for n in check_N]
    return LogBoundFit(C, list(fit_N), list(check_N), vals, slack)


# ---------------------------------------------------------------------------
# height sets
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class HeightSet:
    """Distinct exact heights over a base region inside a vertical window.

    Attributes
    ----------
    heights : tuple of QNum
        Sorted distinct heights.
    base : str or (stage, level)
        ``"nonspacer"``, ``"spacer"`` or a cylinder level.
    spacer : bool
        Whether the base is spacer (roof ``q``) or not (roof 1).
    window : (QNum, QNum)
        Closed-open window ``[lo, hi)``.
    """

    heights: Tuple[QNum, ...]
    base: Base
    spacer: bool
    window: Tuple[QNum, QNum]

    def __len__(self) -> int:
        return len(self.heights)

    @property
    def count(self) -> int:
        return len(self.heights)


def _as_qnum(field_: QValue, v) -> QNum:
    if isinstance(v, QNum):
        return v
    return field_.num(as_fraction(v), 0)


def _full_window(flow: SuspensionFlow, spacer: bool) -> Tuple[QNum, QNum]:
    return flow.zero, (flow.q if spacer else flow.one)


def _resolve_window(flow: SuspensionFlow, spacer: bool, window) -> Tuple[QNum, QNum]:
    if window is None:
        return _full_window(flow, spacer)
    lo, hi = (_as_qnum(flow.field, w) for w in window)
    top = flow.q if spacer else flow.one
    if lo.sign() < 0 or hi > top or hi < lo:
        raise ValueError(f"window [{lo!r}, {hi!r}) is not inside [0, {'q' if spacer else '1'}]")
    return lo, hi


def _base_kind(flow: SuspensionFlow, base: Base) -> bool:
    if base == NONSPACER:
        return False
    if base == SPACER:
        return True
    c, K = base
    return flow.tower.is_spacer(c, K)


def _segment_in_base(flow: SuspensionFlow, seg, base: Base) -> bool:
    if base == NONSPACER:
        return not seg.spacer
    if base == SPACER:
        return seg.spacer
    c, Kc = base
    tower = flow.tower
    if seg.stage >= c:
        return tower.ancestor(seg.stage, seg.level, c) == Kc
    if tower.ancestor(c, Kc, seg.stage) != seg.level:
        return False
    lo = tower.x_left(c, Kc)
    hi = lo + tower.width(c)
    return max(lo, seg.x_lo) < min(hi, seg.x_hi)


def _in_window(y: QNum, window: Tuple[QNum, QNum]) -> bool:
    lo, hi = window
    return lo <= y and y < hi


def height_set(flow: SuspensionFlow, ens: SegmentEnsemble, base: Base = NONSPACER,
               window=None) -> HeightSet:
    """Distinct heights of the segments of ``ens`` lying over ``base``, inside ``window``.

    Parameters
    ----------
    flow : SuspensionFlow
    ens : SegmentEnsemble
    base : ``"nonspacer"``, ``"spacer"`` or (stage, level)
        A cylinder base keeps segments whose projection meets that level.
    window : pair, optional
        ``[lo, hi)``; rationals or QNum.  Defaults to the full range
        ``[0, 1)`` or ``[0, q)``.
    """
    spacer = _base_kind(flow, base)
    win = _resolve_window(flow, spacer, window)
    hs = set()
    for seg in ens:
        if _segment_in_base(flow, seg, base):
            y = seg.y
            if _in_window(y, win):
                hs.add(y)
    return HeightSet(tuple(sorted(hs)), base, spacer, win)


def phi_q_height_set(pe: PhiQEnsemble, base: Base = NONSPACER, window=None,
                     union: bool = False) -> HeightSet:
    """Height set of a :class:`PhiQEnsemble` at its current step.

    ``union=True`` uses every height reached at any step so far (only for
    the whole regions and the cylinders tracked by ``pe``).
    """
    flow = pe.flow
    spacer = _base_kind(flow, base)
    win = _resolve_window(flow, spacer, window)
    cyl = None if base in (NONSPACER, SPACER) else tuple(base)
    if union:
        a_vals = pe.seen_heights(spacer, cyl)
    else:
        a_vals = pe.current_heights(spacer, cyl)
    hs = [pe.height_value(int(a)) for a in a_vals]
    hs = [y for y in hs if _in_window(y, win)]
    return HeightSet(tuple(sorted(hs)), base, spacer, win)


def _ratio(num: HeightSet, den: HeightSet) -> float:
    if den.count == 0:
        raise ValueError("no heights yet")
    return num.count / den.count


def H_ratio(flow: SuspensionFlow, ens: SegmentEnsemble, base: str, window) -> float:
    """``card(H in window) / card(H in full range)`` over a whole region.

    The target for a window ``[a, b)`` is ``b - a`` (non-spacer) or
    ``(b - a)/q`` (spacer).

    Raises
    ------
    ValueError
        "no heights yet" if the full-range set is empty.
    """
    if base not in (NONSPACER, SPACER):
        raise ValueError("H_ratio takes a whole region; use Hbar_ratio for cylinders")
    return _ratio(height_set(flow, ens, base, window), height_set(flow, ens, base, None))


def Hbar_ratio(flow: SuspensionFlow, ens: SegmentEnsemble, cylinder: Base, window) -> float:
    """As :func:`H_ratio` with the base restricted to one cylinder level.

    A spacer cylinder is normalised by the spacer height set over that
    cylinder.
    """
    return _ratio(height_set(flow, ens, cylinder, window), height_set(flow, ens, cylinder, None))


def phi_q_ratio(pe: PhiQEnsemble, base: Base, window, union: bool = False) -> float:
    """Window ratio for a :class:`PhiQEnsemble` (whole region or tracked cylinder)."""
    return _ratio(phi_q_height_set(pe, base, window, union), phi_q_height_set(pe, base, None, union))


def window_target(flow: SuspensionFlow, spacer: bool, window) -> float:
    """Limit of the window ratio: the window length, divided by ``q`` over spacers."""
    lo, hi = _resolve_window(flow, spacer, window)
    width = float(hi - lo)
    return width / float(flow.field) if spacer else width


# ---------------------------------------------------------------------------
# subsequences
# ---------------------------------------------------------------------------
def subsequence_equidist(q, indices: Iterable[int], N: int, window) -> float:
    """Fraction of the first ``N`` indices ``n`` with ``n*q mod 1`` in ``[lo, hi)``.

    Membership is decided exactly.  ``window`` bounds are rationals or
    :class:`QNum` values of the same field.
    """
    field_ = as_field(q)
    lo, hi = (_as_qnum(field_, w) for w in window)
    count = 0
    taken = 0
    prev = None
    for n in indices:
        if taken == N:
            break
        if prev is not None and n <= prev:
            raise ValueError("indices must be strictly increasing")
        prev = n
        y = field_.num(-field_.floor_multiple(n), n)
        if lo <= y and y < hi:
            count += 1
        taken += 1
    if taken < N:
        raise ValueError(f"only {taken} indices supplied, {N} requested")
    return count / N


def block_height_indices(spec, q, n: int, count: int, depth: int = 7) -> List[int]:
    """Indices ``a_{r_1 * n_j}``, ``j = 0..count-1``, whose residues are the heights of size-``n`` spacer blocks.

    ``n_j = F(n) + j * stride`` comes from :func:`staircase.block_formulas`
    and ``a`` is :func:`rotation.under_q_sequence`.
    """
    from .staircase import block_formulas

    formulas, _ = block_formulas(spec, depth)
    if n not in formulas:
        raise ValueError(f"no spacer block of size {n} by stage {depth}")
    f = formulas[n]
    r1 = spec.r(1)
    idx = [r1 * (f.F_of_n + j * f.stride) for j in range(count)]
    a = under_q_sequence(q, max(idx))
    return [a[i - 1] for i in idx]


def ratio_rows(label: str, base: Base, ratios: Sequence[Tuple[object, Tuple, int, float, float]]):
    """CSV rows ``(t, base, window, count, ratio, target, error)``.

    ``ratios`` holds ``(t, window, count, ratio, target)`` tuples.
    """
    rows = []
    base_s = base if isinstance(base, str) else f"I({base[0]},{base[1]})"
    for t, window, count, ratio, target in ratios:
        rows.append({
            "label": label,
            "t": t,
            "base": base_s,
            "window": f"[{window[0]},{window[1]})",
            "count": count,
            "ratio": ratio,
            "target": target,
            "error": abs(ratio - target),
        })
    return rows
