"""Rank-one cutting and stacking with exact coordinates.

Coordinates are exact rationals in units where the non-spacer base interval
is ``J = [0, 1)``.  At stage ``n`` every level has width ``1/P_n`` with
``P_n = r_1 * ... * r_n``, so a level is identified by an integer *cell*
``x_left * P_n``.  Two views of the same tower are provided:

* :class:`Stage` is a fully materialised column built by literal cutting
  and stacking (:func:`refine`).  It is only practical for small ``n``.
* :class:`Tower` answers the same questions (kind of a level, its left end,
  which level contains a point, how many non-spacer levels lie below a
  level) for arbitrarily deep stages by walking the copy structure
  recursively.  Its cost is ``O(n log r)`` per query and it never builds a
  column.

Conventions
-----------
Stage ``n+1`` is made of ``r_{n+1}`` copies of the stage-``n`` column.  Copy
``p`` uses the ``p``-th sub-interval (from the left) of every level and is
followed by ``s_{n+1,p}`` fresh spacer levels.  Fresh spacers are allocated
left to right from the spacer frontier, ordered by subcolumn and then by
stacking position.  All intervals are closed-open.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

from .exact import as_fraction, fraction_str

__all__ = [
    "Kind",
    "InvalidSpecError",
    "BudgetExceededError",
    "RefinementExhaustedError",
    "RankOneSpec",
    "Level",
    "Stage",
    "TowerPoint",
    "Tower",
    "DEFAULT_LEVEL_BUDGET",
    "DEFAULT_DEPTH_BUDGET",
    "height",
    "check_int64",
    "build_stage",
    "identity_stage",
    "refine",
    "apply_T",
    "partial_total_length",
    "NormalizationResult",
    "normalize_A",
    "restricted_growth_profile",
    "stage_to_json",
    "stage_from_json",
]

DEFAULT_LEVEL_BUDGET = 2_000_000
DEFAULT_DEPTH_BUDGET = 16
INT64_MAX = 2 ** 63 - 1


class Kind(str, Enum):
    """Level kind.  Spacer levels sit under the roof value ``q``."""

    NON_SPACER = "non-spacer"
    SPACER = "spacer"


class InvalidSpecError(ValueError):
    """A cutting or spacer sequence violates ``r_n >= 1`` or ``s_{n,i} >= 0``."""


class BudgetExceededError(RuntimeError):
    """A resource guard (levels, segments, table sizes) was hit."""


class RefinementExhaustedError(BudgetExceededError):
    """The lazy refinement reached the depth budget while still in a top level.

    The transformation is a pointwise limit; this error signals that the
    configured depth is too small for the requested computation, not that
    the map is undefined.
    """


@dataclass(frozen=True, eq=False)
class RankOneSpec:
    """Cutting sequence ``r_n`` and spacer sequence ``s_{n,i}``.

    Parameters
    ----------
    cutting : callable
        ``n -> r_n`` for ``n >= 1``.
    spacers : callable
        ``(n, i) -> s_{n,i}`` for ``1 <= i <= r_n``.
    name : str
        Label used in reports.
    description : dict, optional
        JSON-serialisable description used to rebuild the spec from a
        config file.

    Notes
    -----
    Values are validated and memoised on first access, so a spec backed by
    a non-deterministic function is caught the first time it is used and
    answers consistently afterwards.
    """

    cutting: Callable[[int], int]
    spacers: Callable[[int, int], int]
    name: str = "rank-one"
    description: Optional[dict] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def r(self, n: int) -> int:
        """Return ``r_n``."""
        key = ("r", n)
        if key not in self._cache:
            if n < 1:
                raise ValueError(f"stage index must be >= 1, got {n}")
            value = self.cutting(n)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise InvalidSpecError(f"r_{n} = {value!r} must be an integer >= 1")
            self._cache[key] = value
        return self._cache[key]

    def s(self, n: int, i: int) -> int:
        """Return ``s_{n,i}``."""
        return self.spacer_row(n)[i - 1]

    def spacer_row(self, n: int) -> Tuple[int, ...]:
        """Return ``(s_{n,1}, ..., s_{n,r_n})``."""
        key = ("s", n)
        if key not in self._cache:
            row = []
            for i in range(1, self.r(n) + 1):
                value = self.spacers(n, i)
                if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                    raise InvalidSpecError(f"s_{n},{i} = {value!r} must be an integer >= 0")
                row.append(value)
            self._cache[key] = tuple(row)
        return self._cache[key]

    def validate(self, depth: int) -> None:
        """Evaluate and check the sequences up to stage ``depth``."""
        for n in range(1, depth + 1):
            self.spacer_row(n)

    def tower(self) -> "Tower":
        """Shared :class:`Tower` index for this spec."""
        if "tower" not in self._cache:
            self._cache["tower"] = Tower(self)
        return self._cache["tower"]

    @classmethod
    def identity(cls) -> "RankOneSpec":
        """``r_n = 1`` and no spacers: every stage is the single level [0, 1)."""
        return cls(lambda n: 1, lambda n, i: 0, name="identity",
                   description={"kind": "identity"})


@dataclass(frozen=True)
class Level:
    """One level of a stage; ``width`` is ``1/P_n``."""

    index: int
    x_left: Fraction
    width: Fraction
    kind: Kind
    birth_step: int

    @property
    def x_right(self) -> Fraction:
        return self.x_left + self.width


class Tower:
    """Recursive index of all stages of a spec.

    Tables are extended lazily: ``h[k]``, ``P[k]``, the start index of every
    copy inside the stage-``k`` column and the spacer frontier (as an
    integer numerator over ``P[k]``).
    """

    def __init__(self, spec: RankOneSpec):
        self.spec = spec
        self.h: List[int] = [1]
        self.P: List[int] = [1]
        self.r: List[int] = [1]
        self.starts: List[List[int]] = [[0]]
        self.spacer_prefix: List[List[int]] = [[0]]
        self.frontier_num: List[int] = [1]  # frontier_k * P_k

    # -- tables ----------------------------------------------------------
    def ensure(self, n: int) -> None:
        while len(self.h) <= n:
            k = len(self.h)
            r = self.spec.r(k)
            row = self.spec.spacer_row(k)
            h_prev = self.h[k - 1]
            starts, prefix = [], [0]
            pos = 0
            for p in range(r):
                starts.append(pos)
                pos += h_prev + row[p]
                prefix.append(prefix[-1] + row[p])
            self.starts.append(starts)
            self.spacer_prefix.append(prefix)
            self.h.append(pos)
            self.r.append(r)
            self.P.append(self.P[k - 1] * r)
            self.frontier_num.append(self.frontier_num[k - 1] * r + prefix[-1])

    def height(self, n: int) -> int:
        self.ensure(n)
        return self.h[n]

    def product(self, n: int) -> int:
        """``P_n = r_1 * ... * r_n``."""
        self.ensure(n)
        return self.P[n]

    def width(self, n: int) -> Fraction:
        return Fraction(1, self.product(n))

    def frontier(self, n: int) -> Fraction:
        """Right end of the stage-``n`` support."""
        self.ensure(n)
        return Fraction(self.frontier_num[n], self.P[n])

    # -- decoding ----------------------------------------------------------
    def _copy(self, k: int, K: int) -> Tuple[int, int]:
        """Copy number ``p`` (1-based) and offset of index ``K`` at stage ``k``."""
        starts = self.starts[k]
        p = bisect.bisect_right(starts, K)
        return p, K - starts[p - 1]

    def _check(self, n: int, K: int) -> None:
        self.ensure(n)
        if not 0 <= K < self.h[n]:
            raise IndexError(f"level {K} outside stage {n} (h={self.h[n]})")

    def birth(self, n: int, K: int) -> int:
        """Stage at which level ``K`` of stage ``n`` was created (0 if non-spacer)."""
        self._check(n, K)
        k = n
        while k >= 1:
            p, off = self._copy(k, K)
            if off >= self.h[k - 1]:
                return k
            K = off
            k -= 1
        return 0

    def kind(self, n: int, K: int) -> Kind:
        return Kind.SPACER if self.birth(n, K) else Kind.NON_SPACER

    def is_spacer(self, n: int, K: int) -> bool:
        return self.birth(n, K) != 0

    def cell(self, n: int, K: int) -> int:
        """``x_left * P_n`` of level ``K`` at stage ``n`` (an integer)."""
        self._check(n, K)
        total = 0
        k = n
        while k >= 1:
            p, off = self._copy(k, K)
            scale = self.P[n] // self.P[k]
            h_prev = self.h[k - 1]
            if off < h_prev:
                total += (p - 1) * scale
                K = off
                k -= 1
            else:
                slot = self.spacer_prefix[k][p - 1] + off - h_prev
                total += (self.frontier_num[k - 1] * self.r[k] + slot) * scale
                return total
        return total

    def x_left(self, n: int, K: int) -> Fraction:
        return Fraction(self.cell(n, K), self.product(n))

    def level(self, n: int, K: int) -> Level:
        b = self.birth(n, K)
        return Level(K, self.x_left(n, K), self.width(n),
                     Kind.SPACER if b else Kind.NON_SPACER, b)

    def index_of_cell(self, n: int, c: int) -> Optional[int]:
        """Level index at stage ``n`` whose cell is ``c``; ``None`` outside the support."""
        self.ensure(n)
        if c < 0 or c >= self.frontier_num[n]:
            return None
        P_n = self.P[n]
        if c < P_n:
            born, idx, rest = 0, 0, c
        else:
            born = next(k for k in range(1, n + 1)
                        if c < self.frontier_num[k] * (P_n // self.P[k]))
            scale = P_n // self.P[born]
            slot = c // scale - self.frontier_num[born - 1] * self.r[born]
            rest = c % scale
            prefix = self.spacer_prefix[born]
            p = bisect.bisect_right(prefix, slot, 0, self.r[born])
            o = slot - prefix[p - 1]
            idx = self.starts[born][p - 1] + self.h[born - 1] + o
        for k in range(born + 1, n + 1):
            scale = P_n // self.P[k]
            p = rest // scale + 1
            rest %= scale
            idx = self.starts[k][p - 1] + idx
        return idx

    def locate(self, n: int, x, side: str = "right") -> Optional[int]:
        """Index of the stage-``n`` level containing ``x``.

        ``side="right"`` uses the closed-open convention.  ``side="left"``
        returns the level containing points just to the left of ``x`` (the
        left limit), which is how discontinuities of ``T`` are detected.
        """
        x = as_fraction(x)
        scaled = x * self.product(n)
        if side == "right":
            c = scaled.numerator // scaled.denominator
        elif side == "left":
            c = -((-scaled.numerator) // scaled.denominator) - 1
        else:
            raise ValueError("side must be 'left' or 'right'")
        return self.index_of_cell(n, c)

    def n_below(self, n: int, K: int) -> int:
        """Number of non-spacer levels with index ``< K`` at stage ``n``."""
        self.ensure(n)
        total = 0
        k = n
        while k >= 1:
            if K >= self.h[k]:
                return total + self.P[k]
            if K <= 0:
                return total
            p, off = self._copy(k, K)
            total += (p - 1) * self.P[k - 1]
            K = min(off, self.h[k - 1])
            k -= 1
        return total + min(K, 1)

    def ancestor(self, n: int, K: int, m: int) -> Optional[int]:
        """Index at stage ``m <= n`` of the level containing level ``K`` of stage ``n``.

        Returns ``None`` if the level is a spacer created after stage ``m``.
        """
        self._check(n, K)
        k = n
        while k > m:
            p, off = self._copy(k, K)
            if off >= self.h[k - 1]:
                return None
            K = off
            k -= 1
        return K

    def translation(self, n: int, K: int) -> Fraction:
        """Translation carrying level ``K`` to level ``K+1`` at stage ``n``."""
        if K >= self.height(n) - 1:
            raise ValueError("the top level has no successor at this stage")
        return Fraction(self.cell(n, K + 1) - self.cell(n, K), self.P[n])

    def support_stage(self, x, side: str = "right") -> Optional[int]:
        """First stage whose support contains ``x`` (``None`` if outside).

        With ``side="left"`` the question is asked for points just to the
        left of ``x``.
        """
        x = as_fraction(x)
        left = side == "left"
        if x < 0 or (left and x == 0):
            return None
        if x < 1 or (left and x == 1):
            return 0
        k = 1
        while True:
            self.ensure(k)
            front = Fraction(self.frontier_num[k], self.P[k])
            if x < front or (left and x == front):
                return k
            if k > 4096:
                raise RefinementExhaustedError(f"x={x} is beyond the support of every computed stage")
            k += 1


@dataclass(frozen=True)
class TowerPoint:
    """A point given as (stage, level, offset inside the level)."""

    stage_n: int
    level: int
    offset: Fraction

    def to_coord(self, spec: RankOneSpec) -> Fraction:
        tower = spec.tower()
        if not 0 <= self.offset < tower.width(self.stage_n):
            raise ValueError("offset must lie in [0, width)")
        return tower.x_left(self.stage_n, self.level) + self.offset

    @classmethod
    def from_coord(cls, spec: RankOneSpec, n: int, x) -> "TowerPoint":
        tower = spec.tower()
        x = as_fraction(x)
        K = tower.locate(n, x)
        if K is None:
            raise ValueError(f"x={x} is outside the stage-{n} support")
        return cls(n, K, x - tower.x_left(n, K))


def height(spec: RankOneSpec, n: int) -> int:
    """Return ``h_n`` by the recurrence ``h_n = r_n h_{n-1} + sum_i s_{n,i}``.

    Python integers never wrap; conversions to fixed-width integers go
    through :func:`check_int64`, which raises instead of overflowing.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    h = 1
    for k in range(1, n + 1):
        h = spec.r(k) * h + sum(spec.spacer_row(k))
    return h


def check_int64(value: int, what: str = "value") -> int:
    """Return ``value`` if it fits a signed 64-bit integer, else raise."""
    if not -INT64_MAX - 1 <= value <= INT64_MAX:
        raise OverflowError(f"{what} = {value} does not fit a signed 64-bit integer")
    return value


class Stage:
    """A materialised stage-``n`` column.

    Levels are stored compactly as integer cells (``x_left * P_n``), a kind
    flag and a birth step; :attr:`levels` builds :class:`Level` objects on
    demand.
    """

    def __init__(self, n: int, denominator: int, cells: Sequence[int],
                 births: Sequence[int], frontier: Fraction):
        self.n = n
        self.denominator = denominator
        self.cells = list(cells)
        self.births = list(births)
        self.spacer_frontier = Fraction(frontier)

    @property
    def h(self) -> int:
        return len(self.cells)

    @property
    def width(self) -> Fraction:
        return Fraction(1, self.denominator)

    @cached_property
    def levels(self) -> Tuple[Level, ...]:
        w = self.width
        d = self.denominator
        return tuple(
            Level(k, Fraction(c, d), w, Kind.SPACER if b else Kind.NON_SPACER, b)
            for k, (c, b) in enumerate(zip(self.cells, self.births))
        )

    def kind_word(self) -> str:
        """Kinds bottom to top as a string over ``{'N', 'S'}``."""
        return "".join("S" if b else "N" for b in self.births)

    def total_length(self) -> Fraction:
        return Fraction(self.h, self.denominator)

    def __iter__(self) -> Iterator[Level]:
        return iter(self.levels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Stage):
            return NotImplemented
        return (self.n == other.n and self.denominator == other.denominator
                and self.cells == other.cells and self.births == other.births
                and self.spacer_frontier == other.spacer_frontier)

    def __repr__(self) -> str:
        return f"Stage(n={self.n}, h={self.h}, width=1/{self.denominator})"


def identity_stage() -> Stage:
    """Stage 0: the single non-spacer level ``[0, 1)``."""
    return Stage(0, 1, [0], [0], Fraction(1))


def _check_budget(levels: int, budget: Optional[int]) -> None:
    if budget is not None and levels > budget:
        raise BudgetExceededError(f"stage would have {levels} levels, budget is {budget}")


def refine(stage: Stage, spec: RankOneSpec, level_budget: Optional[int] = DEFAULT_LEVEL_BUDGET) -> Stage:
    """Cut ``stage`` into ``r_{n+1}`` subcolumns and stack them with spacers.

    Returns a new stage; the input is not modified.
    """
    n = stage.n + 1
    r = spec.r(n)
    row = spec.spacer_row(n)
    _check_budget(r * stage.h + sum(row), level_budget)
    denominator = stage.denominator * r
    frontier = stage.spacer_frontier * denominator
    assert frontier.denominator == 1
    next_free = frontier.numerator
    base_cells = [c * r for c in stage.cells]
    cells: List[int] = []
    births: List[int] = []
    for p in range(r):
        cells.extend([c + p for c in base_cells])
        births.extend(stage.births)
        cells.extend(range(next_free, next_free + row[p]))
        births.extend([n] * row[p])
        next_free += row[p]
    return Stage(n, denominator, cells, births, Fraction(next_free, denominator))


def build_stage(spec: RankOneSpec, n: int, level_budget: Optional[int] = DEFAULT_LEVEL_BUDGET) -> Stage:
    """Build the stage-``n`` column by ``n`` rounds of cutting and stacking.

    Raises
    ------
    BudgetExceededError
        If ``h_n`` exceeds ``level_budget``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_budget(height(spec, n), level_budget)
    stage = identity_stage()
    for _ in range(n):
        stage = refine(stage, spec, level_budget)
    return stage


def apply_T(spec: RankOneSpec, x, max_stage: int = DEFAULT_DEPTH_BUDGET, side: str = "right") -> Fraction:
    """Apply the rank-one map to ``x``.

    The point is located at successively finer stages until it is not in
    the top level; ``T`` then moves it one level up by an exact
    translation.

    Raises
    ------
    ValueError
        If ``x`` lies outside the stage-``max_stage`` support.
    RefinementExhaustedError
        If ``x`` is still in the top level at ``max_stage``.
    """
    tower = spec.tower()
    x = as_fraction(x)
    start = tower.support_stage(x, side)
    if start is None or start > max_stage:
        raise ValueError(f"x={x} is outside the stage-{max_stage} support")
    for n in range(max(start, 1), max_stage + 1):
        K = tower.locate(n, x, side)
        if K is None:
            continue
        if K < tower.height(n) - 1:
            return x + tower.translation(n, K)
    raise RefinementExhaustedError(
        f"x={x} is in the top level of every stage up to {max_stage}"
    )


def partial_total_length(spec: RankOneSpec, n: int) -> Fraction:
    """Total base length ``h_n / P_n`` of stage ``n`` (exact)."""
    tower = spec.tower()
    return Fraction(tower.height(n), tower.product(n))


@dataclass(frozen=True)
class NormalizationResult:
    """Outcome of :func:`normalize_A`.

    Attributes
    ----------
    A : float
        Physical length of ``J`` once the whole base is scaled to length 1.
    b : Fraction
        Last partial total length used (in units where ``J = [0, 1)``).
    n_used : int
        Stage at which the stopping rule fired.
    last_increment : Fraction
        ``b_{n} - b_{n-1}`` at the stopping stage.
    """

    A: float
    b: Fraction
    n_used: int
    last_increment: Fraction


def normalize_A(spec: RankOneSpec, tol: float = 1e-12, max_depth: int = 200,
                patience: int = 2) -> NormalizationResult:
    """Estimate ``A = 1/b`` with ``b = lim h_n / P_n``.

    Stops once ``|b_n - b_{n-1}| < tol`` has held for ``patience``
    consecutive stages.  Requiring more than one stage avoids stopping at a
    run of early stages that add no spacers (the classical staircase has
    ``b_0 = b_1 = 1``).

    Raises
    ------
    RefinementExhaustedError
        If the stopping rule does not fire within ``max_depth`` stages.
    """
    if patience < 1:
        raise ValueError("patience must be >= 1")
    tol_f = Fraction(tol)
    prev = partial_total_length(spec, 0)
    streak = 0
    for n in range(1, max_depth + 1):
        cur = partial_total_length(spec, n)
        inc = cur - prev
        streak = streak + 1 if abs(inc) < tol_f else 0
        if streak >= patience:
            return NormalizationResult(float(1 / cur), cur, n, inc)
        prev = cur
    raise RefinementExhaustedError(f"no convergence within {max_depth} stages (tol={tol})")


def restricted_growth_profile(spec: RankOneSpec, N: int) -> List[Fraction]:
    """Exact values ``r_n**2 / h_n`` for ``n = 1..N``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    tower = spec.tower()
    return [Fraction(spec.r(n) ** 2, tower.height(n)) for n in range(1, N + 1)]


def stage_to_json(stage: Stage) -> str:
    """Serialise a stage as JSON with exact ``"p/q"`` strings."""
    width = fraction_str(stage.width)
    doc = {
        "n": stage.n,
        "h": stage.h,
        "spacer_frontier": fraction_str(stage.spacer_frontier),
        "levels": [
            {"x_left": fraction_str(lv.x_left), "width": width,
             "kind": lv.kind.value, "birth_step": lv.birth_step}
            for lv in stage.levels
        ],
    }
    return json.dumps(doc, indent=1)


def stage_from_json(text: str) -> Stage:
    """Inverse of :func:`stage_to_json`."""
    doc = json.loads(text)
    levels = doc["levels"]
    if len(levels) != doc["h"]:
        raise ValueError("level count does not match h")
    widths = {lv["width"] for lv in levels}
    if len(widths) > 1:
        raise ValueError("levels of one stage must share a width")
    denominator = Fraction(widths.pop()).denominator if levels else 1
    cells, births = [], []
    for lv in levels:
        c = Fraction(lv["x_left"]) * denominator
        if c.denominator != 1:
            raise ValueError(f"x_left {lv['x_left']} is not on the stage grid")
        births.append(int(lv["birth_step"]))
        if (births[-1] == 0) != (lv["kind"] == Kind.NON_SPACER.value):
            raise ValueError("kind and birth_step disagree")
        cells.append(c.numerator)
    return Stage(int(doc["n"]), denominator, cells, births, Fraction(doc["spacer_frontier"]))
