# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint8_t, uint32_t
from libc.string cimport memcpy
from libcpp.vector cimport vector

cnp.import_array()

DEF MAXD = 512

OK = 0
NEED_CAPACITY = 1
DEPTH_EXHAUSTED = 2
BUDGET_EXCEEDED = 3
TABLE_EXHAUSTED = 4


def walk_spacer_runs(r, s, int n):
    """Compiled twin of :func:`staircase_flow._kernels_py.walk_spacer_runs`."""
    if n >= MAXD:
        raise ValueError("stage too deep for the compiled walker")
    cdef int64_t rr[MAXD]
    cdef int32_t d[MAXD]
    cdef int k, kk, p, k0 = 0, spp = 0
    cdef int64_t spo = 0
    cdef uint32_t run = 0
    cdef vector[uint32_t] out
    rmax = max(int(r[k]) for k in range(1, n + 1)) if n > 0 else 1
    cdef cnp.ndarray[int64_t, ndim=2] S = np.zeros((n + 1, rmax + 2), dtype=np.int64)
    for k in range(1, n + 1):
        rr[k] = int(r[k])
        for p in range(1, rr[k] + 1):
            S[k, p] = int(s[k][p])
    for k in range(0, n + 1):
        d[k] = 1
    if n == 0:
        return np.zeros(0, dtype=np.uint32)
    while True:
        # move one level up; stop when the carry leaves the stage-n column
        if k0 > 0:
            spo += 1
            if spo < S[k0, spp]:
                run += 1
                continue
            k = k0
            p = spp
        else:
            k = 1
            p = d[1]
            if S[1, p] > 0:
                k0 = 1
                spp = p
                spo = 0
                run += 1
                continue
        while True:
            if p < rr[k]:
                d[k] = p + 1
                for kk in range(1, k):
                    d[kk] = 1
                if k0 > 0:
                    out.push_back(run)
                    run = 0
                k0 = 0
                break
            k += 1
            if k > n:
                break
            p = d[k]
            if S[k, p] > 0:
                if k0 == 0:
                    run = 0
                k0 = k
                spp = p
                spo = 0
                run += 1
                break
        if k > n:
            if k0 > 0:
                out.push_back(run)
            break
    cdef Py_ssize_t m = out.size()
    res = np.empty(m, dtype=np.uint32)
    cdef uint32_t[::1] rv = res
    if m > 0:
        memcpy(&rv[0], out.data(), m * sizeof(uint32_t))
    return res


cdef inline int64_t _cyl_index(int32_t[:, ::1] dig, Py_ssize_t t, int32_t k0, int32_t spp,
                               int64_t spo, int c, int64_t[:, ::1] starts, int64_t[::1] hh) nogil:
    cdef int64_t idx
    cdef int lo, k
    if k0 > c:
        return -1
    if k0 > 0:
        idx = starts[k0, spp] + hh[k0 - 1] + spo
        lo = k0 + 1
    else:
        idx = 0
        lo = 1
    for k in range(lo, c + 1):
        idx = starts[k, dig[k, t]] + idx
    return idx


cdef class _State:
    cdef int32_t[:, ::1] dig
    cdef int32_t[::1] k0
    cdef int32_t[::1] spp
    cdef int64_t[::1] spo
    cdef int32_t[::1] res
    cdef int64_t[::1] a
    cdef int64_t[::1] i
    cdef int64_t[::1] j
    cdef int64_t[::1] org
    cdef int64_t[::1] r
    cdef int64_t[:, ::1] s
    cdef int32_t[::1] cst
    cdef int64_t[::1] cix
    cdef int64_t[:, ::1] starts
    cdef int64_t[::1] hh
    cdef uint8_t[:, :, ::1] seen
    cdef int64_t a_base
    cdef int ncyl
    cdef int D
    cdef int ncols

    cdef inline void record(self, Py_ssize_t t) noexcept nogil:
        cdef int kind = 1 if self.k0[t] > 0 else 0
        cdef int64_t ai = self.a[t] - self.a_base
        cdef int c
        self.seen[0, kind, ai] = 1
        for c in range(self.ncyl):
            if self.res[t] >= self.cst[c]:
                if _cyl_index(self.dig, t, self.k0[t], self.spp[t], self.spo[t], self.cst[c],
                              self.starts, self.hh) == self.cix[c]:
                    self.seen[c + 1, kind, ai] = 1

    cdef inline int terminal(self, Py_ssize_t t) noexcept nogil:
        cdef int k, p
        if self.k0[t] > 0:
            k = self.k0[t]
            p = self.spp[t]
            if self.spo[t] + 1 < self.s[k, p]:
                return 0
        else:
            if self.res[t] < 1:
                return 1
            k = 1
            p = self.dig[1, t]
            if self.s[1, p] > 0:
                return 0
        while True:
            if p < self.r[k]:
                return 0
            k += 1
            if k > self.res[t]:
                return k
            p = self.dig[k, t]
            if self.s[k, p] > 0:
                return 0

    cdef inline void advance(self, Py_ssize_t t) noexcept nogil:
        cdef int k, p, kk
        if self.k0[t] > 0:
            k = self.k0[t]
            p = self.spp[t]
            self.spo[t] += 1
            if self.spo[t] < self.s[k, p]:
                return
        else:
            k = 1
            p = self.dig[1, t]
            if self.s[1, p] > 0:
                self.k0[t] = 1
                self.spp[t] = p
                self.spo[t] = 0
                return
        while True:
            if p < self.r[k]:
                self.dig[k, t] = p + 1
                for kk in range(1, k):
                    self.dig[kk, t] = 1
                self.k0[t] = 0
                return
            k += 1
            p = self.dig[k, t]
            if self.s[k, p] > 0:
                self.k0[t] = k
                self.spp[t] = p
                self.spo[t] = 0
                return

    cdef int children_count(self, int k) noexcept nogil:
        cdef int total = 0
        cdef int rk
        while True:
            if k > self.D:
                return -1
            rk = <int>self.r[k]
            if self.s[k, rk] > 0:
                return total + rk
            total += rk - 1
            k += 1

    cdef Py_ssize_t emit(self, Py_ssize_t tmpl, int k, Py_ssize_t parent, Py_ssize_t nxt,
                         int64_t a_new, int64_t i_new, int64_t j_new, int64_t org) noexcept nogil:
        """Cut at stage ``k``; ``tmpl`` holds the digit template.

        The first leaf reuses ``parent``'s slot; the others take slots
        ``nxt, nxt+1, ...``.  Returns the next free slot.
        """
        cdef int rk = <int>self.r[k]
        cdef int p, kk, col
        cdef Py_ssize_t t
        for p in range(1, rk + 1):
            if p == rk and self.s[k, p] == 0:
                self.dig[k, tmpl] = p
                nxt = self.emit(tmpl, k + 1, parent, nxt, a_new, i_new, j_new, org)
                continue
            if self.res[parent] == -1:
                t = parent
            else:
                t = nxt
                nxt += 1
            if t != tmpl:
                for col in range(self.ncols):
                    self.dig[col, t] = self.dig[col, tmpl]
            self.res[t] = k
            self.a[t] = a_new
            self.i[t] = i_new
            self.j[t] = j_new
            self.org[t] = org
            if self.s[k, p] > 0:
                self.dig[k, t] = p
                self.k0[t] = k
                self.spp[t] = p
                self.spo[t] = 0
            else:
                self.dig[k, t] = p + 1
                for kk in range(1, k):
                    self.dig[kk, t] = 1
                self.k0[t] = 0
            self.record(t)
        return nxt


def phi_q_run(digits, k0, sp_p, sp_o, res, a, i, j, origin,
              Py_ssize_t nseg, int64_t step, int64_t last_step, Py_ssize_t seg_pos, Py_ssize_t step_nseg,
              r, s, F, int64_t a_base, cyl_stage, cyl_index, starts, hh,
              seen, int max_depth, Py_ssize_t max_segments):
    """Compiled twin of :func:`staircase_flow._kernels_py.phi_q_run`."""
    cdef _State st = _State()
    st.dig = digits
    st.k0 = k0
    st.spp = sp_p
    st.spo = sp_o
    st.res = res
    st.a = a
    st.i = i
    st.j = j
    st.org = origin
    st.r = r
    st.s = s
    st.cst = cyl_stage
    st.cix = cyl_index
    st.starts = starts
    st.hh = hh
    st.seen = seen
    st.a_base = a_base
    st.ncyl = len(cyl_stage)
    st.D = max_depth
    st.ncols = digits.shape[0]
    cdef int64_t[::1] Fv = F
    cdef Py_ssize_t nF = Fv.shape[0]
    cdef Py_ssize_t ncap = st.k0.shape[0]
    cdef int status = OK
    cdef int64_t cur_step = step
    cdef Py_ssize_t pos = seg_pos
    cdef Py_ssize_t n_at_start = step_nseg if seg_pos > 0 else nseg
    cdef Py_ssize_t t, need, tmpl
    cdef int64_t a_new, i_new, j_new, org
    cdef bint cross
    cdef int kt, col
    # spare column used as the digit template while cutting
    tmpl = ncap - 1
    ncap -= 1
    while cur_step < last_step:
        while pos < n_at_start:
            t = pos
            a_new = st.a[t]
            i_new = st.i[t]
            j_new = st.j[t]
            if st.k0[t] > 0:
                j_new += 1
                cross = True
            else:
                a_new += 1
                if a_new - a_base >= nF:
                    status = TABLE_EXHAUSTED
                    break
                cross = Fv[a_new - a_base] >= i_new + 1
                if cross:
                    i_new += 1
            if cross:
                kt = st.terminal(t)
                if kt:
                    need = st.children_count(kt)
                    if need < 0:
                        status = DEPTH_EXHAUSTED
                        break
                    if nseg + need - 1 > max_segments:
                        status = BUDGET_EXCEEDED
                        break
                    if nseg + need - 1 > ncap:
                        status = NEED_CAPACITY
                        break
                    for col in range(st.ncols):
                        st.dig[col, tmpl] = st.dig[col, t]
                    org = st.org[t]
                    st.res[t] = -1  # marks the parent slot as free for the first leaf
                    nseg = st.emit(tmpl, kt, t, nseg, a_new, i_new, j_new, org)
                    pos += 1
                    continue
                st.advance(t)
            st.a[t] = a_new
            st.i[t] = i_new
            st.j[t] = j_new
            st.record(t)
            pos += 1
        if status != OK:
            break
        cur_step += 1
        pos = 0
        n_at_start = nseg
    return status, nseg, cur_step, pos, n_at_start
