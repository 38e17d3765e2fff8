"""Mixing instrumentation for the suspension flow.

Sets and measures
-----------------
A :class:`Rectangle` is ``[x_lo, x_hi) x [y_lo, y_hi)`` in flow-space
coordinates (base in units where the non-spacer interval is ``[0, 1)``,
height below the roof).  Lebesgue measure is called *raw*; dividing by the
total area ``1 + (b - 1)q`` gives the flow-invariant probability.  Ratios
are reported in two normalisations:

* ``ratio_area``: overlap against the product of probabilities (its limit
  for a mixing flow is 1);
* ``ratio_base``: overlap against the product of base-normalised lengths
  (lengths divided by ``b``) and plain heights, as in the statements about
  ``lambda(I) * mu(R)``.

Exact sweeps
------------
A rectangle is the union over ``s`` in ``[y_lo, y_hi)`` of its base flowed
from height 0 by ``s``.  Flowing the base to a time ``t`` and then sweeping
every segment upward for the rectangle's height, splitting at roof
crossings, yields ``phi_t(R) cap R'`` as a finite union of rectangle pieces
with exact corners.  Sweeping those pieces again gives triple
intersections.
"""

from __future__ import annotations

import math
import statistics
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exact import QNum, as_fraction
from .rank_one import RefinementExhaustedError, height
from .suspension import HeightLedger, Segment, SegmentEnsemble, SuspensionFlow, m0

__all__ = [
    "CriterionNotMetError",
    "Rectangle",
    "RectPiece",
    "PartialPartition",
    "partial_partition",
    "ProjectionOverlap",
    "projection_overlap",
    "rect_correlation",
    "correlation_ratios",
    "UlcigraiVerdict",
    "ulcigrai_check",
    "set_measure",
    "pieces_of",
    "intersect_after",
    "pieces_measure",
    "correlation",
    "CorrelationCurve",
    "correlation_curve",
    "grid",
    "triple_correlation",
    "monte_carlo_overlap",
]


class CriterionNotMetError(RuntimeError):
    """The mixing criterion fails somewhere on the requested grid."""


def _q(flow: SuspensionFlow, v) -> QNum:
    if isinstance(v, QNum):
        return v
    return flow.time(as_fraction(v), 0)


# ---------------------------------------------------------------------------
# rectangles
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Rectangle:
    """``[x_lo, x_hi) x [y_lo, y_hi)``; ``x_hi = None`` extends to the right end of the base.

    Attributes
    ----------
    x_lo, x_hi : Fraction
    y_lo, y_hi : QNum
    label : str
    """

    x_lo: Fraction
    x_hi: Optional[Fraction]
    y_lo: QNum
    y_hi: QNum
    label: str = ""

    @classmethod
    def make(cls, flow: SuspensionFlow, x_lo, x_hi, y_lo, y_hi, label: str = "") -> "Rectangle":
        """Build and validate a rectangle from rationals or QNum heights."""
        r = cls(as_fraction(x_lo), None if x_hi is None else as_fraction(x_hi),
                _q(flow, y_lo), _q(flow, y_hi), label)
        r.validate(flow)
        return r

    @classmethod
    def from_level(cls, flow: SuspensionFlow, n: int, K: int, y_lo, y_hi,
                   label: str = "") -> "Rectangle":
        """Rectangle over the stage-``n`` level ``K``."""
        x = flow.tower.x_left(n, K)
        return cls.make(flow, x, x + flow.tower.width(n), y_lo, y_hi, label or f"I({n})_{K}")

    @classmethod
    def full_surface(cls, flow: SuspensionFlow) -> Tuple["Rectangle", "Rectangle"]:
        """The whole flow space as a non-spacer and a spacer rectangle."""
        return (cls(Fraction(0), Fraction(1), flow.zero, flow.one, "non-spacer"),
                cls(Fraction(1), None, flow.zero, flow.q, "spacer"))

    @property
    def region(self) -> str:
        """``"non-spacer"``, ``"spacer"`` or ``"straddling"``."""
        if self.x_hi is not None and self.x_hi <= 1:
            return "non-spacer"
        if self.x_lo >= 1:
            return "spacer"
        return "straddling"

    def validate(self, flow: SuspensionFlow) -> None:
        if self.x_hi is not None and not self.x_lo < self.x_hi:
            raise ValueError("empty base")
        if self.x_lo < 0:
            raise ValueError("base starts left of 0")
        if self.y_lo.sign() < 0 or self.y_hi < self.y_lo:
            raise ValueError("window must satisfy 0 <= y_lo <= y_hi")
        top = flow.one if self.region == "non-spacer" else flow.q
        if self.y_hi > top:
            raise ValueError(f"window exceeds the roof over a {self.region} base")

    def split(self) -> Tuple["Rectangle", ...]:
        """Exact split of a straddling rectangle at ``x = 1`` (same window)."""
        if self.region != "straddling":
            return (self,)
        return (Rectangle(self.x_lo, Fraction(1), self.y_lo, self.y_hi, self.label + "/ns"),
                Rectangle(Fraction(1), self.x_hi, self.y_lo, self.y_hi, self.label + "/s"))

    def base_width(self, flow: SuspensionFlow):
        """Exact base length, or a float when the base runs to the right end."""
        if self.x_hi is None:
            return flow.base_limit() - float(self.x_lo)
        return self.x_hi - self.x_lo

    @property
    def window_height(self) -> QNum:
        return self.y_hi - self.y_lo

    def measure(self, flow: SuspensionFlow) -> float:
        """Raw (Lebesgue) measure as a float."""
        return float(self.base_width(flow)) * float(self.window_height)

    def measure_exact(self) -> QNum:
        if self.x_hi is None:
            raise ValueError("the measure of an unbounded base is not exact")
        return self.window_height * (self.x_hi - self.x_lo)

    def contains_x(self, x: Fraction) -> bool:
        return self.x_lo <= x and (self.x_hi is None or x < self.x_hi)

    def clip(self, x_lo: Fraction, x_hi: Fraction) -> Optional[Tuple[Fraction, Fraction]]:
        lo = max(x_lo, self.x_lo)
        hi = x_hi if self.x_hi is None else min(x_hi, self.x_hi)
        return (lo, hi) if lo < hi else None


def set_measure(flow: SuspensionFlow, rects: Sequence[Rectangle]) -> float:
    """Raw measure of a union of pairwise disjoint rectangles."""
    return sum(r.measure(flow) for r in rects)


# ---------------------------------------------------------------------------
# partial partitions
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PartialPartition:
    """All levels of stage ``m`` as a partial partition of the base.

    Attributes
    ----------
    m : int
    members : list of int
        Level indices (all ``h_m`` of them).
    mesh : float
        Common normalised level width ``1/(P_m b)``.
    mass : float
        Normalised mass ``h_m/(P_m b)``.
    """

    m: int
    members: List[int]
    mesh: float
    mass: float


def partial_partition(flow: SuspensionFlow, delta: float, max_stage: int = 40) -> PartialPartition:
    """Smallest ``m >= m0`` with normalised width ``< delta`` and mass ``> 1 - delta``.

    Raises
    ------
    RefinementExhaustedError
        If no stage up to ``max_stage`` qualifies.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    b = flow.base_limit()
    tower = flow.tower
    m = m0(flow.spec, flow.field)
    while m <= max_stage:
        P = tower.product(m)
        h = height(flow.spec, m)
        width = 1.0 / (P * b)
        mass = h / (P * b)
        if width < delta and mass > 1 - delta:
            return PartialPartition(m, list(range(h)), width, mass)
        m += 1
    raise RefinementExhaustedError(f"no stage up to {max_stage} has mass > {1 - delta} and mesh < {delta}")


# ---------------------------------------------------------------------------
# single-time overlaps
# ---------------------------------------------------------------------------
def _clip_length(ens: SegmentEnsemble, rects: Sequence[Rectangle], use_height: bool = True) -> Fraction:
    total = Fraction(0)
    for seg in ens:
        y = seg.y
        for r in rects:
            if use_height and not (r.y_lo <= y and y < r.y_hi):
                continue
            c = r.clip(seg.x_lo, seg.x_hi)
            if c is not None:
                total += c[1] - c[0]
    return total


@dataclass(frozen=True)
class ProjectionOverlap:
    """Length of ``phi_t(I)`` lying over a base interval, with normalised ratios.

    ``ratio_area`` tends to 1 for a mixing flow; ``ratio_base`` is the
    ratio against ``lambda(I) lambda(B)`` with base-normalised lengths.
    """

    t: QNum
    overlap: Fraction
    ratio_area: float
    ratio_base: float

    @property
    def error_area(self) -> float:
        return abs(self.ratio_area - 1.0)

    @property
    def error_base(self) -> float:
        return abs(self.ratio_base - 1.0)


def projection_overlap(flow: SuspensionFlow, level: Tuple[int, int], base: Tuple, t,
                       ens: Optional[SegmentEnsemble] = None) -> ProjectionOverlap:
    """Exact ``lambda(phi_t(I) cap pi^{-1}(B))`` for a level ``I`` and base interval ``B``.

    ``B`` must lie entirely on one side of ``x = 1`` so that the roof over
    it is constant.  Passing an already flowed ``ens`` skips the flow.
    """
    t = _q(flow, t)
    x_lo, x_hi = as_fraction(base[0]), as_fraction(base[1])
    if x_lo < 1 < x_hi:
        raise ValueError("the base interval must not straddle x = 1")
    src = flow.level_ensemble(*level)
    if ens is None:
        ens = flow.flow_segments(src, t)
    elif ens.t != t:
        raise ValueError("ensemble time differs from t")
    rect = Rectangle(x_lo, x_hi, flow.zero, flow.zero)
    ov = _clip_length(ens, [rect], use_height=False)
    lam = src.total_length()
    w = x_hi - x_lo
    roof = 1.0 if x_hi <= 1 else float(flow.field)
    ratio_area = float(ov / (lam * w)) * flow.area() / roof
    ratio_base = float(ov / (lam * w)) * flow.base_limit()
    return ProjectionOverlap(t, ov, ratio_area, ratio_base)


def rect_correlation(flow: SuspensionFlow, level: Tuple[int, int], R: Sequence[Rectangle] | Rectangle,
                     t, ens: Optional[SegmentEnsemble] = None) -> Fraction:
    """Exact ``lambda(I cap phi_{-t}(R))``, computed by flowing ``I`` forward by ``t``."""
    rects = [R] if isinstance(R, Rectangle) else list(R)
    t = _q(flow, t)
    if ens is None:
        ens = flow.flow_segments(flow.level_ensemble(*level), t)
    elif ens.t != t:
        raise ValueError("ensemble time differs from t")
    return _clip_length(ens, rects)


def correlation_ratios(flow: SuspensionFlow, overlap, lam_I, R: Sequence[Rectangle] | Rectangle):
    """``(ratio_area, ratio_base)`` of ``lambda(I cap phi_{-t}R)`` against ``lambda(I) mu(R)``."""
    rects = [R] if isinstance(R, Rectangle) else list(R)
    mu = set_measure(flow, rects)
    base = float(overlap) / (float(lam_I) * mu)
    return base * flow.area(), base * flow.base_limit()


# ---------------------------------------------------------------------------
# Ulcigrai-type criterion
# ---------------------------------------------------------------------------
@dataclass
class UlcigraiVerdict:
    """Outcome of :func:`ulcigrai_check`.

    Attributes
    ----------
    partition : PartialPartition
    t_grid : list of QNum
    margins_area, margins_base : list of float
        ``min over members of ratio - (1 - eps)`` at each grid time.
    mean_area, mean_base : list of float
        Mean ratio over members at each grid time.
    t0 : QNum or None
        Least grid time from which every later grid time passes (area normalisation).
    worst : (level, t, ratio)
        Worst member over the whole grid.
    """

    partition: PartialPartition
    eps: float
    t_grid: List[QNum]
    margins_area: List[float]
    margins_base: List[float]
    mean_area: List[float]
    mean_base: List[float]
    t0: Optional[QNum]
    t0_base: Optional[QNum]
    worst: Tuple[int, QNum, float]

    @property
    def passed(self) -> bool:
        return self.t0 is not None


def _first_passing(t_grid, margins) -> Optional[QNum]:
    t0 = None
    for t, mg in reversed(list(zip(t_grid, margins))):
        if mg < 0:
            break
        t0 = t
    return t0


def ulcigrai_check(flow: SuspensionFlow, R: Sequence[Rectangle] | Rectangle, eps: float, delta: float,
                   t_grid: Sequence, strict: bool = True) -> UlcigraiVerdict:
    """Test ``lambda(I cap phi_{-t}R) >= (1 - eps) mu(R) lambda(I)`` on a partial partition.

    Every level of the stage chosen by :func:`partial_partition` is flowed
    through the (sorted) grid.  The area-normalised inequality decides the
    verdict; the base-normalised one is reported alongside.

    Raises
    ------
    CriterionNotMetError
        With ``strict=True``, if no grid time starts a passing tail.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    rects = [R] if isinstance(R, Rectangle) else list(R)
    eta = partial_partition(flow, delta)
    times = sorted((_q(flow, t) for t in t_grid))
    lam = flow.tower.width(eta.m)
    ratios_a = np.empty((len(eta.members), len(times)))
    ratios_b = np.empty_like(ratios_a)
    for row, K in enumerate(eta.members):
        ens = flow.level_ensemble(eta.m, K)
        for col, t in enumerate(times):
            ens = flow.flow_segments(ens, t - ens.t)
            ov = _clip_length(ens, rects)
            ratios_a[row, col], ratios_b[row, col] = correlation_ratios(flow, ov, lam, rects)
    target = 1.0 - eps
    margins_a = list(ratios_a.min(axis=0) - target)
    margins_b = list(ratios_b.min(axis=0) - target)
    flat = int(np.argmin(ratios_a))
    r, c = divmod(flat, len(times))
    worst = (eta.members[r], times[c], float(ratios_a[r, c]))
    verdict = UlcigraiVerdict(eta, eps, times, margins_a, margins_b,
                              list(ratios_a.mean(axis=0)), list(ratios_b.mean(axis=0)),
                              _first_passing(times, margins_a), _first_passing(times, margins_b), worst)
    if strict and not verdict.passed:
        raise CriterionNotMetError(
            f"criterion not met on grid: worst level {worst[0]} of stage {eta.m} at t={float(worst[1]):g} "
            f"has ratio {worst[2]:.4f} < {target:.4f}")
    return verdict


# ---------------------------------------------------------------------------
# exact sweeps
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RectPiece:
    """Rectangle ``[x_lo, x_hi) x [y_lo, y_hi)`` inside one level.

    The bottom edge sits at height ``y_lo`` at time ``y_lo + i + j*q``.
    """

    stage: int
    level: int
    x_lo: Fraction
    x_hi: Fraction
    i: int
    j: int
    y_lo: QNum
    y_hi: QNum
    spacer: bool

    @property
    def start_time(self) -> QNum:
        return self.y_lo + self.i + self.y_lo.field.num(0, self.j)

    def measure(self) -> QNum:
        return (self.y_hi - self.y_lo) * (self.x_hi - self.x_lo)


def pieces_of(flow: SuspensionFlow, rect: Rectangle) -> List[RectPiece]:
    """Split a bounded rectangle along the levels that carry its base."""
    if rect.x_hi is None:
        raise ValueError("source rectangles need a bounded base")
    out = []
    for part in rect.split():
        ens = flow.interval_ensemble(part.x_lo, part.x_hi)
        for s in ens:
            out.append(RectPiece(s.stage, s.level, s.x_lo, s.x_hi, 0, 0, part.y_lo, part.y_hi,
                                 s.spacer))
    return out


def _sweep(flow: SuspensionFlow, work: List[Tuple[Segment, QNum, QNum]],
           targets: Sequence[Rectangle]) -> List[RectPiece]:
    """Sweep segments upward and collect the parts lying in ``targets``.

    ``work`` holds ``(segment, time, duration)``; the segment's height at
    ``time`` is its ledger height.  Roof crossings are delegated to the
    flow engine, batched by common crossing time.
    """
    out: List[RectPiece] = []
    while work:
        groups: Dict[Tuple[QNum, QNum], List[Tuple[Segment, QNum]]] = defaultdict(list)
        for seg, t, d in work:
            i, j = seg.ledger.i, seg.ledger.j
            y = seg.ledger.y
            roof = flow.q if seg.spacer else flow.one
            to_roof = roof - y
            stay = d if d < to_roof else to_roof
            top = y + stay
            for r in targets:
                c = r.clip(seg.x_lo, seg.x_hi)
                if c is None:
                    continue
                lo = y if y > r.y_lo else r.y_lo
                hi = top if top < r.y_hi else r.y_hi
                if lo < hi:
                    out.append(RectPiece(seg.stage, seg.level, c[0], c[1], i, j, lo, hi, seg.spacer))
            if to_roof < d:
                groups[(t, to_roof)].append((seg, d - to_roof))
        work = []
        for (t, dt), items in groups.items():
            segs = tuple(Segment(s.stage, s.level, s.x_lo, s.x_hi, s.ledger, s.spacer, idx)
                         for idx, (s, _) in enumerate(items))
            moved = flow.flow_segments(SegmentEnsemble(t, segs), dt)
            for s in moved:
                work.append((s, moved.t, items[s.origin][1]))
    return out


def intersect_after(flow: SuspensionFlow, pieces: Sequence[RectPiece], t,
                    targets: Sequence[Rectangle]) -> List[RectPiece]:
    """Pieces of ``phi_t(union of pieces) cap union of targets``."""
    t = _q(flow, t)
    by_start: Dict[QNum, List[RectPiece]] = defaultdict(list)
    for p in pieces:
        by_start[p.start_time].append(p)
    work = []
    for t_a in sorted(by_start, key=float):
        group = by_start[t_a]
        segs = tuple(Segment(p.stage, p.level, p.x_lo, p.x_hi, HeightLedger(t_a, p.i, p.j), p.spacer, idx)
                     for idx, p in enumerate(group))
        moved = flow.flow_segments(SegmentEnsemble(t_a, segs), t)
        for s in moved:
            p = group[s.origin]
            work.append((s, moved.t, p.y_hi - p.y_lo))
    return _sweep(flow, work, targets)


def pieces_measure(pieces: Iterable[RectPiece]) -> QNum:
    total = None
    for p in pieces:
        total = p.measure() if total is None else total + p.measure()
    return total


def correlation(flow: SuspensionFlow, A: Sequence[Rectangle], B: Sequence[Rectangle], t) -> QNum:
    """Exact raw ``mu(phi_t(A) cap B) = mu(A cap phi_{-t}(B))``."""
    pieces = [p for r in A for p in pieces_of(flow, r)]
    got = pieces_measure(intersect_after(flow, pieces, t, list(B)))
    return got if got is not None else flow.zero


def triple_correlation(flow: SuspensionFlow, A1: Sequence[Rectangle], A2: Sequence[Rectangle],
                       A3: Sequence[Rectangle], t1, t2) -> Tuple[QNum, float]:
    """Exact ``mu(A1 cap phi_{-t1}A2 cap phi_{-t1-t2}A3)`` and its area-normalised ratio.

    The ratio compares the probability of the triple intersection with the
    product of the three probabilities.
    """
    pieces = [p for r in A1 for p in pieces_of(flow, r)]
    step1 = intersect_after(flow, pieces, t1, list(A2))
    step2 = intersect_after(flow, step1, t2, list(A3))
    ov = pieces_measure(step2)
    ov = ov if ov is not None else flow.zero
    area = flow.area()
    prod = set_measure(flow, A1) * set_measure(flow, A2) * set_measure(flow, A3)
    return ov, float(ov) * area * area / prod


# ---------------------------------------------------------------------------
# correlation curves
# ---------------------------------------------------------------------------
def grid(T, points: int = 9) -> List[Fraction]:
    """``points`` equally spaced rational times covering ``[T, 2T]``."""
    T = as_fraction(T)
    if points < 2:
        return [T]
    return [T + T * Fraction(k, points - 1) for k in range(points)]


@dataclass
class CorrelationCurve:
    """Exact overlaps ``mu(phi_t(A) cap B)`` on a time grid with their ratios.

    ``ratio_area`` compares probabilities (limit 1); ``ratio_base`` divides
    by ``mu(A) mu(B)`` with base-normalised lengths.
    """

    t: List[QNum]
    overlap: List[QNum]
    ratio_area: List[float]
    ratio_base: List[float]

    def errors(self) -> List[float]:
        return [abs(r - 1.0) for r in self.ratio_area]

    def median_error(self) -> float:
        return statistics.median(self.errors())

    def rows(self, label: str = "") -> List[dict]:
        return [{"label": label, "t": t, "overlap": ov, "ratio_area": ra, "ratio_base": rb,
                 "target": 1.0, "margin": abs(ra - 1.0)}
                for t, ov, ra, rb in zip(self.t, self.overlap, self.ratio_area, self.ratio_base)]


def correlation_curve(flow: SuspensionFlow, A: Sequence[Rectangle], B: Sequence[Rectangle],
                      t_grid: Sequence) -> CorrelationCurve:
    """Overlaps of ``phi_t(A)`` with ``B`` along a grid (source flowed incrementally)."""
    A = list(A)
    B = list(B)
    times = sorted((_q(flow, t) for t in t_grid))
    mu = set_measure(flow, A) * set_measure(flow, B)
    area = flow.area()
    b = flow.base_limit()
    pieces = [p for r in A for p in pieces_of(flow, r)]
    # all source pieces start at time y_lo with i = j = 0; flow each start group once per step
    by_start: Dict[QNum, List[RectPiece]] = defaultdict(list)
    for p in pieces:
        by_start[p.start_time].append(p)
    state = {}
    for t_a, group in by_start.items():
        segs = tuple(Segment(p.stage, p.level, p.x_lo, p.x_hi, HeightLedger(t_a, 0, 0), p.spacer, idx)
                     for idx, p in enumerate(group))
        state[t_a] = SegmentEnsemble(t_a, segs)
    overlaps, ra, rb = [], [], []
    for t in times:
        work = []
        for t_a, group in by_start.items():
            ens = state[t_a]
            ens = flow.flow_segments(ens, t_a + t - ens.t)
            state[t_a] = ens
            for s in ens:
                p = group[s.origin]
                work.append((s, ens.t, p.y_hi - p.y_lo))
        got = pieces_measure(_sweep(flow, work, B))
        ov = got if got is not None else flow.zero
        overlaps.append(ov)
        ra.append(float(ov) * area / mu)
        rb.append(float(ov) * b / mu)
    return CorrelationCurve(times, overlaps, ra, rb)


# ---------------------------------------------------------------------------
# Monte Carlo cross-check
# ---------------------------------------------------------------------------
def monte_carlo_overlap(flow: SuspensionFlow, level: Tuple[int, int], R: Sequence[Rectangle] | Rectangle,
                        t, samples: int, seed: int = 0, denominator: int = 2 ** 40) -> Tuple[float, float]:
    """Estimate ``lambda(I cap phi_{-t}R)`` by flowing random points of ``I``.

    Returns ``(estimate, standard_error)``.  Sample points are exact
    rationals with the given denominator.
    """
    rects = [R] if isinstance(R, Rectangle) else list(R)
    rng = np.random.default_rng(seed)
    t = _q(flow, t)
    x0 = flow.tower.x_left(*level)
    w = flow.tower.width(level[0])
    hits = 0
    for u in rng.integers(0, denominator, size=samples):
        x = x0 + w * Fraction(int(u), denominator)
        pt = flow.flow_point(x, dt=t)
        y = pt.ledger.y
        for r in rects:
            if r.contains_x(pt.x) and r.y_lo <= y and y < r.y_hi:
                hits += 1
                break
    p = hits / samples
    lam = float(w)
    return lam * p, lam * math.sqrt(max(p * (1 - p), 1e-300) / samples)
