"""Pure-Python implementations of the hot loops.

These mirror the compiled versions in ``_kernels.pyx`` line for line and
are used when the extension is unavailable (or when the environment
variable ``STAIRCASE_FLOW_PURE_PYTHON`` is set).

Tower addresses
---------------
The stepping kernel does not store absolute level indices, which overflow
64-bit integers after about twenty stages of the classical staircase.  A
level of stage ``n`` is instead stored as

* ``k0 = 0`` and copy digits ``d[1..n]``: the non-spacer level reached by
  taking copy ``d[k]`` at every stage ``k``; or
* ``k0 >= 1``, a spacer created at stage ``k0`` above copy ``sp_p`` at
  stacking position ``sp_o``, followed by copy digits ``d[k0+1..n]``.

Moving one level up is then a carry propagation whose amortised cost is
constant.  ``res`` is the stage at which the segment is currently resolved;
a carry past ``res`` means the segment sits in the top level of its
column and must be cut into ``r_{res+1}`` pieces.
"""

from __future__ import annotations

import numpy as np

OK = 0
NEED_CAPACITY = 1
DEPTH_EXHAUSTED = 2
BUDGET_EXCEEDED = 3
TABLE_EXHAUSTED = 4


# ---------------------------------------------------------------------------
# spacer block catalog by walking the column
# ---------------------------------------------------------------------------
def walk_spacer_runs(r, s, n):
    """Maximal spacer runs of the stage-``n`` column, bottom to top.

    Starts at the bottom level and applies the address odometer (one level
    up per step) until the carry leaves the stage-``n`` column, counting
    runs of spacer levels on the way.  This visits all ``h_n`` levels and
    serves as an oracle for faster catalog constructions.

    Parameters
    ----------
    r : sequence of int
        ``r[k]`` for ``k = 0..n`` (``r[0]`` unused).
    s : sequence of sequences
        ``s[k][p]`` for ``p = 1..r[k]`` (index 0 unused).
    n : int
        Stage.
    """
    out = []
    if n == 0:
        return np.zeros(0, dtype=np.uint32)
    d = [1] * (n + 1)
    k0 = spp = spo = run = 0
    while True:
        if k0 > 0:
            spo += 1
            if spo < s[k0][spp]:
                run += 1
                continue
            k, p = k0, spp
        else:
            k, p = 1, d[1]
            if s[1][p] > 0:
                k0, spp, spo = 1, p, 0
                run += 1
                continue
        while True:
            if p < r[k]:
                d[k] = p + 1
                for kk in range(1, k):
                    d[kk] = 1
                if k0 > 0:
                    out.append(run)
                    run = 0
                k0 = 0
                break
            k += 1
            if k > n:
                break
            p = d[k]
            if s[k][p] > 0:
                if k0 == 0:
                    run = 0
                k0, spp, spo = k, p, 0
                run += 1
                break
        if k > n:
            if k0 > 0:
                out.append(run)
            break
    return np.asarray(out, dtype=np.uint32)


# ---------------------------------------------------------------------------
# phi_q stepping on tower addresses
# ---------------------------------------------------------------------------
def _children_count(k, r, s, D):
    """Number of pieces produced by cutting a top level at stage ``k``.

    The last piece of a cut lands on top of the new column when it gets no
    spacers, in which case it is cut again at the next stage.  Returns -1
    if the cascade passes stage ``D``.
    """
    total = 0
    while True:
        if k > D:
            return -1
        rk = r[k]
        if s[k][rk] > 0:
            return total + rk
        total += rk - 1
        k += 1


def _cyl_index(d, k0, spp, spo, c, starts, hh):
    """Index at stage ``c`` of the level holding an address (-1 if none)."""
    if k0 > c:
        return -1
    if k0 > 0:
        idx = starts[k0][spp] + hh[k0 - 1] + spo
        lo = k0 + 1
    else:
        idx = 0
        lo = 1
    for k in range(lo, c + 1):
        idx = starts[k][d[k]] + idx
    return idx


def phi_q_run(digits, k0, sp_p, sp_o, res, a, i, j, origin,
              nseg, step, last_step, seg_pos, step_nseg,
              r, s, F, a_base, cyl_stage, cyl_index, starts, hh,
              seen, max_depth, max_segments):
    """Advance an address ensemble by ``phi_q`` from ``step`` to ``last_step``.

    Heights are tracked as ``y = c + a*q - i`` with a shared offset ``c``;
    ``F[m - a_base] = floor(c + m*q)`` so that a non-spacer step crosses the
    roof exactly when ``F[a+1] >= i+1``.  A spacer step always crosses.
    Every height reached is marked in ``seen[cyl, kind, a - a_base]``,
    where ``cyl = 0`` is unfiltered and ``cyl >= 1`` restricts to the
    cylinder ``(cyl_stage[cyl-1], cyl_index[cyl-1])``.

    Arrays are modified in place.  Returns ``(status, nseg, step, seg_pos,
    step_nseg)``; a non-``OK`` status leaves a consistent state from which
    the caller can resume after acting on it.
    """
    D = max_depth
    ncap = k0.shape[0] - 1  # the last slot is scratch space in the compiled twin
    rl = [int(x) for x in r]
    sl = [[int(x) for x in row] for row in s]
    Fl = [int(x) for x in F]
    nF = len(Fl)
    ncyl = len(cyl_stage)
    cst = [int(x) for x in cyl_stage]
    cix = [int(x) for x in cyl_index]
    stl = [[int(x) for x in row] for row in starts]
    hhl = [int(x) for x in hh]
    dig = [[int(x) for x in digits[:, t]] for t in range(nseg)]
    K0 = [int(x) for x in k0[:nseg]]
    SPP = [int(x) for x in sp_p[:nseg]]
    SPO = [int(x) for x in sp_o[:nseg]]
    RES = [int(x) for x in res[:nseg]]
    A = [int(x) for x in a[:nseg]]
    I = [int(x) for x in i[:nseg]]
    J = [int(x) for x in j[:nseg]]
    ORG = [int(x) for x in origin[:nseg]]
    status = OK

    def record(t):
        kind = 1 if K0[t] > 0 else 0
        ai = A[t] - a_base
        seen[0, kind, ai] = 1
        for c in range(ncyl):
            if RES[t] >= cst[c] and _cyl_index(dig[t], K0[t], SPP[t], SPO[t], cst[c], stl, hhl) == cix[c]:
                seen[c + 1, kind, ai] = 1

    def terminal(t):
        """Dry run of one level step: 0 if it stays resolved, else the stage to cut."""
        d = dig[t]
        if K0[t] > 0:
            k, p = K0[t], SPP[t]
            if SPO[t] + 1 < sl[k][p]:
                return 0
        else:
            if RES[t] < 1:
                return 1
            k, p = 1, d[1]
            if sl[1][p] > 0:
                return 0
        while True:
            if p < rl[k]:
                return 0
            k += 1
            if k > RES[t]:
                return k
            p = d[k]
            if sl[k][p] > 0:
                return 0

    def advance(t):
        """One level up; the dry run guarantees no cut is needed."""
        d = dig[t]
        if K0[t] > 0:
            k, p = K0[t], SPP[t]
            SPO[t] += 1
            if SPO[t] < sl[k][p]:
                return
        else:
            k, p = 1, d[1]
            if sl[1][p] > 0:
                K0[t], SPP[t], SPO[t] = 1, p, 0
                return
        while True:
            if p < rl[k]:
                d[k] = p + 1
                for kk in range(1, k):
                    d[kk] = 1
                K0[t] = 0
                return
            k += 1
            p = d[k]
            if sl[k][p] > 0:
                K0[t], SPP[t], SPO[t] = k, p, 0
                return

    def emit(template, k, slots, state):
        rk = rl[k]
        for p in range(1, rk + 1):
            if p == rk and sl[k][p] == 0:
                nxt = list(template)
                nxt[k] = p
                emit(nxt, k + 1, slots, state)
                continue
            t = slots.pop()
            d = list(template)
            RES[t] = k
            A[t], I[t], J[t], ORG[t] = state
            if sl[k][p] > 0:
                d[k] = p
                K0[t], SPP[t], SPO[t] = k, p, 0
            else:
                d[k] = p + 1
                for kk in range(1, k):
                    d[kk] = 1
                K0[t] = 0
            dig[t] = d
            record(t)

    cur_step = step
    pos = seg_pos
    n_at_start = step_nseg if seg_pos > 0 else nseg
    while cur_step < last_step:
        while pos < n_at_start:
            t = pos
            a_new, i_new, j_new = A[t], I[t], J[t]
            if K0[t] > 0:
                j_new += 1
                cross = True
            else:
                a_new += 1
                if a_new - a_base >= nF:
                    status = TABLE_EXHAUSTED
                    break
                cross = Fl[a_new - a_base] >= i_new + 1
                if cross:
                    i_new += 1
            if cross:
                kt = terminal(t)
                if kt:
                    need = _children_count(kt, rl, sl, D)
                    if need < 0:
                        status = DEPTH_EXHAUSTED
                        break
                    if nseg + need - 1 > max_segments:
                        status = BUDGET_EXCEEDED
                        break
                    if nseg + need - 1 > ncap:
                        status = NEED_CAPACITY
                        break
                    slots = [t] + list(range(nseg, nseg + need - 1))
                    slots.reverse()
                    for _ in range(need - 1):
                        dig.append(None)
                        for lst in (K0, SPP, SPO, RES, A, I, J, ORG):
                            lst.append(0)
                    nseg += need - 1
                    emit(dig[t], kt, slots, (a_new, i_new, j_new, ORG[t]))
                    pos += 1
                    continue
                advance(t)
            A[t], I[t], J[t] = a_new, i_new, j_new
            record(t)
            pos += 1
        if status != OK:
            break
        cur_step += 1
        pos = 0
        n_at_start = nseg

    for t in range(nseg):
        digits[:, t] = dig[t]
    k0[:nseg] = K0
    sp_p[:nseg] = SPP
    sp_o[:nseg] = SPO
    res[:nseg] = RES
    a[:nseg] = A
    i[:nseg] = I
    j[:nseg] = J
    origin[:nseg] = ORG
    return status, nseg, cur_step, pos, n_at_start
