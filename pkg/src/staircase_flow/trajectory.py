"""Fast iteration of the time-``q`` map on whole levels.

:class:`PhiQEnsemble` flows one or more whole levels ``I^{(m)}_K`` by
repeated applications of ``phi_q`` using the stepping kernel in
:mod:`staircase_flow.kernels`.  Each piece is a whole level of the stage at
which it was last cut, stored as a tower address (see ``_kernels_py``),
with its height written as ``y = a*q - i`` where ``a + j`` equals the number
of steps taken and ``i = floor(a*q)``.  Two pieces of the same kind have
the same height exactly when they have the same ``a``.

The result matches :meth:`SuspensionFlow.flow_segments` at time ``k*q``
piece for piece; the kernel simply avoids exact rational arithmetic on
every step.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .exact import QNum
from .rank_one import BudgetExceededError, RefinementExhaustedError
from .suspension import HeightLedger, Segment, SegmentEnsemble, SuspensionFlow

__all__ = ["PhiQEnsemble", "Cylinder", "decode_address"]

Cylinder = Tuple[int, int]
_START_DEPTH = 24


def decode_address(tower, n: int, K: int):
    """Address of level ``K`` of stage ``n``.

    Returns ``(digits, k0, sp_p, sp_o)`` with ``digits[k]`` the copy taken at
    stage ``k`` (only meaningful above ``k0``).
    """
    tower.ensure(n)
    digits = [1] * (n + 1)
    k = n
    while k >= 1:
        p, off = tower._copy(k, K)
        h_prev = tower.height(k - 1)
        if off >= h_prev:
            digits[k] = p
            return digits, k, p, off - h_prev
        digits[k] = p
        K = off
        k -= 1
    return digits, 0, 0, 0


class PhiQEnsemble:
    """Whole levels flowed by the time-``q`` map, one step at a time.

    Parameters
    ----------
    flow : SuspensionFlow
        Supplies the spec, ``q``, depth and segment budgets.
    levels : sequence of (stage, level)
        Source levels, all at height 0 at time 0; the position in this list
        is stored as each piece's ``origin``.
    cylinders : sequence of (stage, level)
        Levels ``I^{(n)}`` for which the heights reached by pieces lying
        inside them are recorded separately (trajectory union).
    backend : str, optional
        ``"compiled"`` or ``"python"``; default is the import-time choice.
    capacity : int
        Initial number of piece slots.
    """

    def __init__(self, flow: SuspensionFlow, levels: Sequence[Tuple[int, int]],
                 cylinders: Sequence[Cylinder] = (), backend: Optional[str] = None,
                 capacity: int = 1024):
        if not levels:
            raise ValueError("at least one source level is needed")
        self.flow = flow
        self.spec = flow.spec
        self.tower = flow.tower
        self.field = flow.field
        self.backend = backend
        self.levels = [tuple(lv) for lv in levels]
        self.cylinders = [tuple(c) for c in cylinders]
        m = max(n for n, _ in self.levels)
        self.D = max(_START_DEPTH, m + 1)
        if self.D > flow.depth_budget:
            self.D = flow.depth_budget
        if m > self.D:
            raise RefinementExhaustedError("source level deeper than the depth budget")
        self.nseg = len(self.levels)
        self.step = 0
        self._pos = 0
        self._step_nseg = self.nseg
        cap = max(capacity, self.nseg) + 1
        self._alloc(cap)
        for t, (n, K) in enumerate(self.levels):
            digits, k0, spp, spo = decode_address(self.tower, n, K)
            self.digits[: n + 1, t] = digits
            self.k0[t], self.sp_p[t], self.sp_o[t], self.res[t] = k0, spp, spo, n
            self.origin[t] = t
        self._build_tables()
        self._M = 0
        self._grow_table(256)
        self._record_initial()

    # -- storage ---------------------------------------------------------------
    def _alloc(self, cap: int):
        D = self.D
        self.digits = np.ones((D + 1, cap), dtype=np.int32)
        self.k0 = np.zeros(cap, dtype=np.int32)
        self.sp_p = np.zeros(cap, dtype=np.int32)
        self.sp_o = np.zeros(cap, dtype=np.int64)
        self.res = np.zeros(cap, dtype=np.int32)
        self.a = np.zeros(cap, dtype=np.int64)
        self.i = np.zeros(cap, dtype=np.int64)
        self.j = np.zeros(cap, dtype=np.int64)
        self.origin = np.zeros(cap, dtype=np.int64)

    def _grow_rows(self, need: int):
        cap = self.k0.shape[0]
        new_cap = max(2 * cap, need + 1)
        n = self.nseg
        old = (self.digits, self.k0, self.sp_p, self.sp_o, self.res, self.a, self.i, self.j, self.origin)
        self._alloc(new_cap)
        self.digits[:, :n] = old[0][:, :n]
        for dst, src in zip((self.k0, self.sp_p, self.sp_o, self.res, self.a,
                             self.i, self.j, self.origin), old[1:]):
            dst[:n] = src[:n]

    def _grow_depth(self):
        new_D = min(self.D + max(16, self.D // 2), self.flow.depth_budget)
        if new_D <= self.D:
            raise RefinementExhaustedError(
                f"a piece needs a stage beyond the depth budget {self.flow.depth_budget}")
        digits = np.ones((new_D + 1, self.digits.shape[1]), dtype=np.int32)
        digits[: self.D + 1] = self.digits
        self.digits = digits
        self.D = new_D
        self._build_tables()

    def _build_tables(self):
        D = self.D
        r = [1] + [self.spec.r(k) for k in range(1, D + 1)]
        rmax = max(r)
        self.r_tab = np.asarray(r, dtype=np.int64)
        s = np.zeros((D + 1, rmax + 2), dtype=np.int64)
        for k in range(1, D + 1):
            s[k, 1: r[k] + 1] = self.spec.spacer_row(k)
        self.s_tab = s
        C = max([c for c, _ in self.cylinders], default=0)
        self.tower.ensure(C)
        starts = np.zeros((C + 1, rmax + 2), dtype=np.int64)
        for k in range(1, C + 1):
            starts[k, 1: r[k] + 1] = self.tower.starts[k]
        self.starts_tab = starts
        self.hh_tab = np.asarray([self.tower.height(k) for k in range(C + 1)], dtype=np.int64)
        self.cyl_stage = np.asarray([c for c, _ in self.cylinders], dtype=np.int32)
        self.cyl_index = np.asarray([idx for _, idx in self.cylinders], dtype=np.int64)

    def _grow_table(self, M: int):
        """Extend ``F[a] = floor(a*q)`` and the ``seen`` marks to ``M`` entries."""
        old = self._M
        F = np.empty(M, dtype=np.int64)
        if old:
            F[:old] = self.F
        for a in range(old, M):
            F[a] = self.field.floor_multiple(a)
        self.F = F
        seen = np.zeros((len(self.cylinders) + 1, 2, M), dtype=np.uint8)
        if old:
            seen[:, :, :old] = self.seen
        self.seen = seen
        self._M = M

    def _record_initial(self):
        for t in range(self.nseg):
            kind = 1 if self.k0[t] > 0 else 0
            self.seen[0, kind, 0] = 1
        idx = self._cylinder_indices(np.arange(self.nseg))
        for c in range(len(self.cylinders)):
            for t in range(self.nseg):
                if idx[c][t] == self.cylinders[c][1]:
                    self.seen[c + 1, 1 if self.k0[t] > 0 else 0, 0] = 1

    # -- stepping --------------------------------------------------------------
    def run(self, k: int) -> "PhiQEnsemble":
        """Advance to step ``k`` (time ``k*q``).

        Raises
        ------
        BudgetExceededError
            If the segment budget is exceeded.
        RefinementExhaustedError
            If the depth budget is exhausted.
        """
        if k < self.step:
            raise ValueError("cannot step backwards")
        while self.step < k:
            status, nseg, step, pos, n_at_start = kernels.phi_q_run(
                self.digits, self.k0, self.sp_p, self.sp_o, self.res, self.a, self.i, self.j,
                self.origin, self.nseg, self.step, k, self._pos, self._step_nseg,
                self.r_tab, self.s_tab, self.F, 0, self.cyl_stage, self.cyl_index,
                self.starts_tab, self.hh_tab, self.seen, self.D, self.flow.segment_budget,
                backend=self.backend)
            self.nseg, self.step, self._pos, self._step_nseg = nseg, step, pos, n_at_start
            if status == kernels.OK:
                break
            if status == kernels.NEED_CAPACITY:
                self._grow_rows(self.nseg + self.D * max(self.r_tab) + 1)
            elif status == kernels.DEPTH_EXHAUSTED:
                self._grow_depth()
            elif status == kernels.TABLE_EXHAUSTED:
                self._grow_table(2 * self._M)
            elif status == kernels.BUDGET_EXCEEDED:
                raise BudgetExceededError(
                    f"phi_q ensemble would exceed {self.flow.segment_budget} segments at step {self.step}")
            else:  # pragma: no cover - defensive
                raise RuntimeError(f"unknown kernel status {status}")
        return self

    # -- views -----------------------------------------------------------------
    @property
    def time(self) -> QNum:
        return self.flow.time(0, self.step)

    def _cylinder_indices(self, rows: np.ndarray) -> List[np.ndarray]:
        """Stage-``c`` level index of each row for every cylinder stage (-1 if none)."""
        out = []
        for c, _ in self.cylinders:
            k0 = self.k0[rows].astype(np.int64)
            spp = self.sp_p[rows].astype(np.int64)
            idx = np.where(k0 > 0, self.starts_tab[np.minimum(k0, c), spp.clip(0)] +
                           self.hh_tab[np.clip(k0 - 1, 0, c)] + self.sp_o[rows], 0)
            for k in range(1, c + 1):
                add = self.starts_tab[k, self.digits[k, rows]]
                idx = idx + np.where(k > k0, add, 0)
            idx = np.where((k0 > c) | (self.res[rows] < c), -1, idx)
            out.append(idx)
        return out

    def current_heights(self, spacer: bool, cylinder: Optional[Cylinder] = None) -> np.ndarray:
        """Sorted distinct ``a`` values of the pieces of one kind at the current step."""
        n = self.nseg
        kind = self.k0[:n] > 0
        mask = kind if spacer else ~kind
        if cylinder is not None:
            c = self.cylinders.index(tuple(cylinder))
            idx = self._cylinder_indices(np.arange(n))[c]
            mask &= idx == cylinder[1]
        return np.unique(self.a[:n][mask])

    def seen_heights(self, spacer: bool, cylinder: Optional[Cylinder] = None) -> np.ndarray:
        """Distinct ``a`` values reached at any step so far (trajectory union)."""
        row = 0 if cylinder is None else self.cylinders.index(tuple(cylinder)) + 1
        return np.flatnonzero(self.seen[row, 1 if spacer else 0])

    def height_value(self, a: int) -> QNum:
        """Exact height ``a*q - floor(a*q)`` of pieces with parameter ``a``."""
        return self.flow.time(-int(self.F[a]) if a < self._M else -self.field.floor_multiple(a), a)

    def piece_tuples(self) -> List[Tuple[int, int, int, int, int]]:
        """``(stage, level, i, j, origin)`` for every piece, in storage order."""
        out = []
        tower = self.tower
        for t in range(self.nseg):
            c = int(self.res[t])
            d = self.digits[:, t]
            k0 = int(self.k0[t])
            if k0 > 0:
                tower.ensure(k0)
                idx = tower.starts[k0][int(self.sp_p[t]) - 1] + tower.height(k0 - 1) + int(self.sp_o[t])
                lo = k0 + 1
            else:
                idx, lo = 0, 1
            tower.ensure(c)
            for k in range(lo, c + 1):
                idx = tower.starts[k][int(d[k]) - 1] + idx
            out.append((c, idx, int(self.i[t]), int(self.j[t]), int(self.origin[t])))
        return out

    def to_segment_ensemble(self) -> SegmentEnsemble:
        """Exact :class:`SegmentEnsemble` view (whole levels, exact ledgers)."""
        t = self.time
        tower = self.tower
        segs = []
        for n, K, i, j, org in self.piece_tuples():
            x = tower.x_left(n, K)
            segs.append(Segment(n, K, x, x + tower.width(n), HeightLedger(t, i, j),
                                tower.is_spacer(n, K), org))
        return SegmentEnsemble(t, tuple(segs), "phi_q")

    def total_length(self) -> Fraction:
        P = [self.tower.product(int(c)) for c in range(int(self.res[: self.nseg].max()) + 1)]
        return sum((Fraction(1, P[int(c)]) for c in self.res[: self.nseg]), Fraction(0))
