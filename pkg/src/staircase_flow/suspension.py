"""Suspension flow over a rank-one map under a two-valued roof.

The roof is ``1`` over the non-spacer region ``[0, 1)`` and ``q`` over the
spacer region (coordinates in units where ``J = [0, 1)``).  A point of the
flow space is a base point ``x`` together with a height ``0 <= y < f(x)``.
Rather than storing ``y`` the engine stores a :class:`HeightLedger`: the
flow time ``t`` and the numbers ``i`` and ``j`` of roof crossings under ``1``
and under ``q``, so that ``y = t - i - j*q`` exactly.

Exact segment flow
------------------
A :class:`Segment` is a horizontal interval inside one level of some stage.
All of its points share the level and the height, so the whole segment
climbs the column together.  The arrival time at level ``K'`` is
``tau(K') = (i + N1) + (j + N2)*q``, where ``N1`` and ``N2`` count the
non-spacer and spacer levels passed, both available from prefix counts of
the tower.  The engine therefore jumps directly to the last level reached
before the target time (galloping search on ``tau``).  Only when a segment
must leave the top level of its stage is it cut along the next stage's
subcolumns, which is where the segment count grows.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Optional, Tuple

from .exact import DEFAULT_Q, QNum, QValue, as_fraction, decimal_str, fraction_str
from .rank_one import (
    BudgetExceededError,
    RankOneSpec,
    RefinementExhaustedError,
    apply_T,
    height,
    normalize_A,
)

__all__ = [
    "HeightLedger",
    "Segment",
    "SegmentEnsemble",
    "FlowPoint",
    "PolygonPoint",
    "SingularOrbitError",
    "SuspensionFlow",
    "DEFAULT_SEGMENT_BUDGET",
    "DEFAULT_FLOW_DEPTH",
    "N0",
    "m0",
]

DEFAULT_SEGMENT_BUDGET = 1_000_000
# The right end of a flowed segment follows the tops of successive columns,
# reaching stage n after about the time needed to climb the last spacer
# stacks (n^2 q / 2 for the classical staircase), so flows need far deeper
# stages than materialised columns do.  The tower decoder makes depth cheap.
DEFAULT_FLOW_DEPTH = 64


class SingularOrbitError(ArithmeticError):
    """A flowed point crossed the roof exactly at a discontinuity of ``T``."""


def _qnum(field_: QValue, value) -> QNum:
    if isinstance(value, QNum):
        return value
    return QNum(as_fraction(value), Fraction(0), field_)


@dataclass(frozen=True)
class HeightLedger:
    """Flow time and roof-crossing counts; the height is ``t - i - j*q``."""

    t: QNum
    i: int = 0
    j: int = 0

    @property
    def y(self) -> QNum:
        return QNum(self.t.a - self.i, self.t.b - self.j, self.t.field)


@dataclass(frozen=True)
class Segment:
    """Horizontal interval ``[x_lo, x_hi)`` inside level ``level`` of stage ``stage``.

    ``origin`` records which source interval the segment came from.
    """

    stage: int
    level: int
    x_lo: Fraction
    x_hi: Fraction
    ledger: HeightLedger
    spacer: bool
    origin: int = 0

    @property
    def length(self) -> Fraction:
        return self.x_hi - self.x_lo

    @property
    def y(self) -> QNum:
        return self.ledger.y


@dataclass(frozen=True)
class SegmentEnsemble:
    """Segments flowed together to a common time ``t``."""

    t: QNum
    segments: Tuple[Segment, ...]
    origin: str = ""

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def total_length(self) -> Fraction:
        return sum((s.length for s in self.segments), Fraction(0))

    def rows(self) -> Iterator[dict]:
        """Rows for CSV export, with exact ``p/q`` columns."""
        for s in self.segments:
            y = s.y
            yield {
                "origin": s.origin,
                "stage": s.stage,
                "level": s.level,
                "kind": "spacer" if s.spacer else "non-spacer",
                "x_left": decimal_str(s.x_lo),
                "width": decimal_str(s.length),
                "i": s.ledger.i,
                "j": s.ledger.j,
                "y": decimal_str(y),
                "x_left_exact": fraction_str(s.x_lo),
                "width_exact": fraction_str(s.length),
                "y_exact": y.exact_str(),
            }


@dataclass(frozen=True)
class FlowPoint:
    """Result of :meth:`SuspensionFlow.flow_point`.

    ``singular`` lists ``(crossing time, x)`` for every roof crossing that
    happened exactly at a discontinuity of ``T``.
    """

    x: Fraction
    ledger: HeightLedger
    stage: int
    level: int
    singular: Tuple[Tuple[QNum, Fraction], ...] = ()

    @property
    def y(self) -> QNum:
        return self.ledger.y


@dataclass(frozen=True)
class PolygonPoint:
    """Point of the L-shaped polygon: ``[0,1) x [0,1)`` joined with ``[1,b) x [0,q)``."""

    x: Fraction
    y: QNum


def N0(q) -> int:
    """Smallest integer ``N`` with ``(N - 1)*q < 1 <= N*q``.

    ``q`` may be a :class:`QValue` or an exact rational in ``(0, 1)``.
    """
    if isinstance(q, QValue):
        # N = floor(1/q) + 1 unless 1/q is an integer; q irrational here
        n = 1
        while q.sign(-1, n) < 0:  # n*q < 1
            n += 1
        return n
    qf = as_fraction(q)
    if not 0 < qf < 1:
        raise ValueError("q must lie in (0, 1)")
    n = 1
    while n * qf < 1:
        n += 1
    return n


def m0(spec: RankOneSpec, q) -> int:
    """Smallest stage ``m`` with ``h_m >= 4 * r_1 * N0(q)``."""
    target = 4 * spec.r(1) * N0(q)
    m = 1
    while height(spec, m) < target:
        m += 1
    return m


class SuspensionFlow:
    """The flow under the roof ``1`` (non-spacer) / ``q`` (spacer).

    Parameters
    ----------
    spec : RankOneSpec
        The base transformation.
    q : QValue
        Roof over spacers; defaults to ``1/sqrt(2)``.
    depth_budget : int
        Deepest stage the engine may refine to.
    segment_budget : int
        Maximum number of segments in one ensemble.
    """

    def __init__(self, spec: RankOneSpec, q: QValue = DEFAULT_Q,
                 depth_budget: int = DEFAULT_FLOW_DEPTH,
                 segment_budget: int = DEFAULT_SEGMENT_BUDGET):
        if not 0 < float(q) < 1:
            raise ValueError("q must lie in (0, 1)")
        if getattr(q, "mode", None) == "rational":
            raise ValueError("the flow needs an irrational q (quadratic or real mode)")
        self.spec = spec
        self.field = q
        self.tower = spec.tower()
        self.depth_budget = depth_budget
        self.segment_budget = segment_budget
        self.one = QNum(Fraction(1), Fraction(0), q)
        self.q = QNum(Fraction(0), Fraction(1), q)
        self.zero = QNum(Fraction(0), Fraction(0), q)
        self._b_limit: Optional[float] = None

    # -- basic geometry ------------------------------------------------------
    def time(self, a=0, b=0) -> QNum:
        """The exact time ``a + b*q``."""
        return QNum(as_fraction(a), as_fraction(b), self.field)

    def _support_stage(self, x: Fraction) -> int:
        if x < 0:
            raise ValueError(f"x={x} is negative")
        front = self.tower.frontier(self.depth_budget)
        if x >= front:
            raise ValueError(f"x={x} lies outside the stage-{self.depth_budget} support")
        return self.tower.support_stage(x)

    def roof_at(self, x) -> QNum:
        """Roof value over ``x``: ``1`` on ``[0, 1)`` and ``q`` on spacers."""
        x = as_fraction(x)
        self._support_stage(x)
        return self.one if x < 1 else self.q

    def base_limit(self) -> float:
        """Limit ``b`` of the stage supports (float; used for normalisation only)."""
        if self._b_limit is None:
            self._b_limit = float(normalize_A(self.spec, tol=1e-15).b)
        return self._b_limit

    def area(self) -> float:
        """Area ``1 + (b - 1)*q`` of the flow space in units where ``J = [0, 1)``."""
        return 1.0 + (self.base_limit() - 1.0) * float(self.field)

    # -- ensembles -------------------------------------------------------------
    def level_ensemble(self, n: int, K: int, origin: int = 0, label: str = "") -> SegmentEnsemble:
        """The stage-``n`` level ``K`` at height 0 and time 0."""
        x = self.tower.x_left(n, K)
        seg = Segment(n, K, x, x + self.tower.width(n), HeightLedger(self.zero),
                      self.tower.is_spacer(n, K), origin)
        return SegmentEnsemble(self.zero, (seg,), label or f"I({n})_{K}")

    def interval_ensemble(self, x_lo, x_hi, stage: Optional[int] = None,
                          origin: int = 0, label: str = "") -> SegmentEnsemble:
        """An arbitrary base interval at height 0, cut along the levels of ``stage``.

        The interval must lie in the stage support; it is split at level
        boundaries so that every piece sits inside one level.
        """
        x_lo, x_hi = as_fraction(x_lo), as_fraction(x_hi)
        if not x_lo < x_hi:
            raise ValueError("empty interval")
        if stage is None:
            stage = max(self._support_stage(x_hi - Fraction(1, 10 ** 30)), self._support_stage(x_lo), 1)
        P = self.tower.product(stage)
        w = Fraction(1, P)
        segs = []
        x = x_lo
        while x < x_hi:
            K = self.tower.locate(stage, x)
            if K is None:
                raise ValueError(f"x={x} lies outside the stage-{stage} support")
            right = min(self.tower.x_left(stage, K) + w, x_hi)
            segs.append(Segment(stage, K, x, right, HeightLedger(self.zero),
                                self.tower.is_spacer(stage, K), origin))
            x = right
        return SegmentEnsemble(self.zero, tuple(segs), label or f"[{x_lo},{x_hi})")

    # -- the engine ------------------------------------------------------------
    def _arrival_le(self, i: int, j: int, target: QNum) -> bool:
        """Whether ``i + j*q <= target``."""
        return self.field.sign(i - target.a, j - target.b) <= 0

    def _advance(self, n: int, K: int, lo: Fraction, hi: Fraction, i: int, j: int,
                 target: QNum, out: list, singular: Optional[list]):
        """Flow one piece (offsets ``lo..hi`` inside level ``K``) to time ``target``.

        Appends ``(n, K, lo, hi, i, j)`` tuples to ``out``.  ``singular`` is a
        list for point flows (``lo == hi``) and ``None`` for segments.
        """
        tower = self.tower
        stack = [(n, K, lo, hi, i, j)]
        while stack:
            n, K, lo, hi, i, j = stack.pop()
            top = tower.height(n) - 1
            if singular is not None and lo == 0:
                n, K, i, j, leave = self._climb_checked(n, K, i, j, target, singular)
            else:
                nb = tower.n_below(n, K)

                def reached(K2):
                    N1 = tower.n_below(n, K2) - nb
                    return self._arrival_le(i + N1, j + (K2 - K) - N1, target)

                good, step = K, 1
                while good + step <= top and reached(good + step):
                    good += step
                    step *= 2
                bad = min(good + step, top + 1)
                while bad - good > 1:
                    mid = (good + bad) // 2
                    if reached(mid):
                        good = mid
                    else:
                        bad = mid
                N1 = tower.n_below(n, good) - nb
                i, j = i + N1, j + (good - K) - N1
                K = good
                leave = K == top and self._arrival_le(*self._leave_counts(n, K, i, j), target)
            if not leave:
                out.append((n, K, lo, hi, i, j))
                continue
            # the piece crosses the roof of the top level: cut along stage n+1
            if n + 1 > self.depth_budget:
                raise RefinementExhaustedError(
                    f"a segment reached the top of stage {n} and the depth budget is {self.depth_budget}")
            r = self.spec.r(n + 1)
            h_n = tower.height(n)
            tower.ensure(n + 1)
            starts = tower.starts[n + 1]
            w = Fraction(1, tower.product(n + 1))
            children = []
            if singular is not None:
                p = int(lo / w)
                if lo == p * w and p > 0:
                    singular.append((self.time(*self._leave_counts(n, K, i, j)),
                                     tower.x_left(n, K) + lo))
                children.append((n + 1, starts[p] + h_n - 1, lo - p * w, hi - p * w, i, j))
            else:
                for p in range(int(lo / w), r):
                    if p * w >= hi:
                        break
                    a, b = max(lo, p * w), min(hi, (p + 1) * w)
                    children.append((n + 1, starts[p] + h_n - 1, a - p * w, b - p * w, i, j))
            stack.extend(reversed(children))

    def _leave_counts(self, n, K, i, j):
        """Crossing counts after leaving level ``K`` through its roof."""
        if self.tower.is_spacer(n, K):
            return i, j + 1
        return i + 1, j

    def _climb_checked(self, n, K, i, j, target, singular):
        """Level-by-level climb for a point at the left end of its level.

        Each crossing is tested for a discontinuity of ``T`` by comparing
        the image of the point with the image of its left limit.
        """
        tower = self.tower
        top = tower.height(n) - 1
        while True:
            ni, nj = self._leave_counts(n, K, i, j)
            if not self._arrival_le(ni, nj, target):
                return n, K, i, j, False
            x = tower.x_left(n, K)
            if x > 0:
                try:
                    right = apply_T(self.spec, x, self.depth_budget)
                    left = apply_T(self.spec, x, self.depth_budget, side="left")
                except RefinementExhaustedError:
                    right = left = None
                if right is None or left != right:
                    singular.append((self.time(ni, nj), x))
            if K == top:
                return n, K, i, j, True
            i, j, K = ni, nj, K + 1

    def _emit(self, pieces, origin_of, t: QNum) -> List[Segment]:
        tower = self.tower
        out = []
        ledger_cache = {}
        for (n, K, lo, hi, i, j), origin in zip(pieces, origin_of):
            x0 = tower.x_left(n, K)
            key = (i, j)
            if key not in ledger_cache:
                ledger_cache[key] = HeightLedger(t, i, j)
            out.append(Segment(n, K, x0 + lo, x0 + hi, ledger_cache[key], tower.is_spacer(n, K), origin))
        return out

    def flow_segments(self, ens: SegmentEnsemble, dt) -> SegmentEnsemble:
        """Flow every segment of ``ens`` by ``dt >= 0`` (exact).

        Raises
        ------
        RefinementExhaustedError
            If a segment must be cut beyond the depth budget.
        BudgetExceededError
            If the ensemble would exceed the segment budget.
        """
        dt = _qnum(self.field, dt)
        if dt.sign() < 0:
            raise ValueError("dt must be >= 0")
        target = ens.t + dt
        pieces: list = []
        origins: list = []
        tower = self.tower
        for seg in ens.segments:
            x0 = tower.x_left(seg.stage, seg.level)
            before = len(pieces)
            self._advance(seg.stage, seg.level, seg.x_lo - x0, seg.x_hi - x0,
                          seg.ledger.i, seg.ledger.j, target, pieces, None)
            origins.extend([seg.origin] * (len(pieces) - before))
            if len(pieces) > self.segment_budget:
                raise BudgetExceededError(
                    f"ensemble would exceed {self.segment_budget} segments")
        return SegmentEnsemble(target, tuple(self._emit(pieces, origins, target)), ens.origin)

    def flow_point(self, x, ledger: Optional[HeightLedger] = None, dt=0,
                   strict: bool = False) -> FlowPoint:
        """Flow the point ``(x, y)`` by ``dt``; ``y`` comes from ``ledger`` (default 0).

        Crossings that occur exactly at a discontinuity of ``T`` are listed
        in the result's ``singular`` field; with ``strict=True`` they raise
        :class:`SingularOrbitError` instead.
        """
        x = as_fraction(x)
        ledger = ledger or HeightLedger(self.zero)
        dt = _qnum(self.field, dt)
        if dt.sign() < 0:
            raise ValueError("dt must be >= 0")
        y = ledger.y
        if y.sign() < 0 or not y < self.roof_at(x):
            raise ValueError("the ledger height must satisfy 0 <= y < f(x)")
        n = self._support_stage(x)
        K = self.tower.locate(n, x)
        lo = x - self.tower.x_left(n, K)
        target = ledger.t + dt
        out: list = []
        singular: list = []
        self._advance(n, K, lo, lo, ledger.i, ledger.j, target, out, singular)
        (n, K, lo, _, i, j), = out
        x_new = self.tower.x_left(n, K) + lo
        events = tuple(singular)
        if strict and events:
            raise SingularOrbitError(f"orbit of x={x} crosses a discontinuity of T at time {events[0][0]!r}")
        return FlowPoint(x_new, HeightLedger(target, i, j), n, K, events)

    def discretize_phi_q(self, ens: SegmentEnsemble, k: int) -> SegmentEnsemble:
        """Apply the time-``q`` map ``k`` times."""
        if k < 0:
            raise ValueError("k must be >= 0")
        for _ in range(k):
            ens = self.flow_segments(ens, self.q)
        return ens

    def phi_q_trajectory(self, ens: SegmentEnsemble, k: int) -> Iterator[SegmentEnsemble]:
        """Yield the ensemble after ``0, 1, ..., k`` applications of the time-``q`` map."""
        yield ens
        for _ in range(k):
            ens = self.flow_segments(ens, self.q)
            yield ens

    # -- checks ----------------------------------------------------------------
    def check_ensemble(self, ens: SegmentEnsemble) -> None:
        """Assert the ledger and placement invariants of every segment."""
        tower = self.tower
        for s in ens.segments:
            y = s.y
            roof = self.q if s.spacer else self.one
            if y.sign() < 0 or not y < roof:
                raise AssertionError(f"height {y!r} outside [0, roof) for {s}")
            x0 = tower.x_left(s.stage, s.level)
            if not (x0 <= s.x_lo < s.x_hi <= x0 + tower.width(s.stage)):
                raise AssertionError(f"segment {s} leaves its level")
            if s.spacer != tower.is_spacer(s.stage, s.level):
                raise AssertionError(f"segment {s} has the wrong kind")
            if s.ledger.t != ens.t:
                raise AssertionError("segment time differs from the ensemble time")

    # -- polygon chart ---------------------------------------------------------
    def to_polygon(self, x, ledger: HeightLedger) -> PolygonPoint:
        """Flow-space point to polygon coordinates (the identity on ``(x, y)``)."""
        x = as_fraction(x)
        y = ledger.y
        if y.sign() < 0 or not y < self.roof_at(x):
            raise ValueError("not a point of the flow space")
        return PolygonPoint(x, y)

    def from_polygon(self, pt: PolygonPoint, right_edge: Optional[Fraction] = None) -> Tuple[Fraction, QNum]:
        """Polygon point (closed polygon) to the flow-space point ``(x, y)``.

        Boundary points are resolved by the identifications

        1. ``{0} x [0, q]`` with ``{b} x [0, q]`` (only usable when the right
           edge ``b`` is rational and passed as ``right_edge``);
        2. ``{1} x [q, 1]`` with ``{0} x [q, 1]``;
        3. ``(x, f(x))`` with ``(T(x), 0)``.
        """
        x, y = as_fraction(pt.x), _qnum(self.field, pt.y)
        if y.sign() < 0:
            raise ValueError("polygon points have y >= 0")
        if right_edge is not None and x == right_edge:
            if y > self.q:
                raise ValueError("point above the spacer part of the right edge")
            x = Fraction(0)
        if x == 1 and y >= self.q and y <= self.one:
            x = Fraction(0)
        roof = self.roof_at(x)
        if y > roof:
            raise ValueError(f"y={y!r} lies above the roof over x={x}")
        if y == roof:
            return apply_T(self.spec, x, self.depth_budget), self.zero
        return x, y
