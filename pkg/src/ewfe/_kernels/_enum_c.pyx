# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled enumeration kernel; same contract as ``_enum_py``."""
import numpy as np


cdef inline bint _missing(int const, int union, int[::1] req) noexcept:
    if const != 1 and const != 2:
        return False
    return (union & req[const]) != req[const]


def enumerate_sequences(local_ok, halting, f1_psi, f1_out, f2_psi, f2_out,
                        a_out, w_out, f1_req, f2_req, int a_req, int w_req,
                        int max_rounds, bint repetition, bint qt_c, int witness_cap):
    cdef int[::1] ok_v = np.ascontiguousarray(local_ok, dtype=np.int32)
    cdef int[::1] halt_v = np.ascontiguousarray(halting, dtype=np.int32)
    cdef int[::1] p1 = np.ascontiguousarray(f1_psi, dtype=np.int32)
    cdef int[::1] o1 = np.ascontiguousarray(f1_out, dtype=np.int32)
    cdef int[::1] p2 = np.ascontiguousarray(f2_psi, dtype=np.int32)
    cdef int[::1] o2 = np.ascontiguousarray(f2_out, dtype=np.int32)
    cdef int[::1] oa = np.ascontiguousarray(a_out, dtype=np.int32)
    cdef int[::1] ow = np.ascontiguousarray(w_out, dtype=np.int32)
    cdef int[::1] r1 = np.ascontiguousarray(f1_req, dtype=np.int32)
    cdef int[::1] r2 = np.ascontiguousarray(f2_req, dtype=np.int32)

    viable_np = np.flatnonzero(np.asarray(ok_v)).astype(np.int32)
    cdef int[::1] viable = viable_np
    cdef Py_ssize_t nv = viable.shape[0]
    cdef int H = max_rounds
    if H < 1 or nv == 0:
        return 0, 0, []

    # accumulators indexed by depth; slot 0 is the empty prefix
    acc_np = np.zeros((6, H + 1), dtype=np.int32)
    cdef int[:, ::1] acc = acc_np
    pos_np = np.full(H, -1, dtype=np.int64)
    cdef long long[::1] pos = pos_np

    cdef long long sat = 0, visited = 0
    cdef int depth = 0, d1, p, n1, n2, u1, u2, ua, uw, c1, c2
    cdef bint halts, ok
    witnesses = []

    while depth >= 0:
        pos[depth] += 1
        if pos[depth] >= nv:
            pos[depth] = -1
            depth -= 1
            continue
        p = viable[pos[depth]]
        visited += 1
        d1 = depth + 1
        c1 = acc[0, depth]
        c2 = acc[1, depth]
        if c1 == 0:
            n1 = p1[p]
        elif c1 == p1[p]:
            n1 = c1
        else:
            n1 = -1
        if c2 == 0:
            n2 = p2[p]
        elif c2 == p2[p]:
            n2 = c2
        else:
            n2 = -1
        u1 = acc[2, depth] | o1[p]
        u2 = acc[3, depth] | o2[p]
        ua = acc[4, depth] | oa[p]
        uw = acc[5, depth] | ow[p]
        halts = halt_v[p] != 0
        ok = (not repetition) or halts or d1 == H
        if ok and qt_c and d1 == H and not halts:
            ok = not ((ua & a_req) != a_req or (uw & w_req) != w_req
                      or _missing(n1, u1, r1) or _missing(n2, u2, r2))
        if ok:
            sat += 1
            if len(witnesses) < witness_cap:
                witnesses.append(tuple(int(viable[pos[i]]) for i in range(d1)))
        if d1 < H and not (repetition and halts):
            acc[0, d1] = n1
            acc[1, d1] = n2
            acc[2, d1] = u1
            acc[3, d1] = u2
            acc[4, d1] = ua
            acc[5, d1] = uw
            depth = d1
    return int(sat), int(visited), witnesses
