# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Gillespie kernel, a transliteration of _gillespie_py.run_kernel;
see that module for the algorithm notes.  Both backends consume identical
RNG buffers, so trajectories match bit for bit.  The event loop runs nogil
between buffer refills, so threaded batches scale across cores."""

import numpy as np

from ._gillespie_py import KernelResult, WindowOverflowError

cdef long long SWEEP_MASK = 1023


def _set_sweep_mask(value):
    """Test hook mirroring _gillespie_py.SWEEP_MASK monkeypatching."""
    global SWEEP_MASK
    SWEEP_MASK = value


cdef inline int _sadd(int* arr, int* pos, int size, int p) noexcept nogil:
    arr[size] = p
    pos[p] = size
    return size + 1


cdef inline int _srm(int* arr, int* pos, int size, int p) noexcept nogil:
    cdef int i = pos[p]
    cdef int last = arr[size - 1]
    arr[i] = last
    pos[last] = i
    pos[p] = -1
    return size - 1


def run_kernel(
    plus_sites,
    minus_sites,
    double alpha,
    double beta,
    double t_max,
    checkpoints,
    long left,
    long width,
    object refill,
    bint record_configs,
    bint stop_when_crossed,
):
    cdef Py_ssize_t n = len(plus_sites)
    cdef Py_ssize_t m = len(minus_sites)
    cdef Py_ssize_t k = len(checkpoints)
    cdef long off = 1 - left
    cdef long idx0 = off

    occ_obj = np.zeros(width, dtype=np.int8)
    who_obj = np.full(width, -1, dtype=np.int32)
    cdef signed char[::1] occ_mv = occ_obj
    cdef int[::1] who_mv = who_obj
    cdef signed char* occ = &occ_mv[0]
    cdef int* who = &who_mv[0]
    occ[0] = 2
    occ[width - 1] = 2
    plus_obj = (np.asarray(plus_sites, dtype=np.int64) + off).astype(np.int32)
    minus_obj = (np.asarray(minus_sites, dtype=np.int64) + off).astype(np.int32)
    cdef int[::1] plus_mv = plus_obj
    cdef int[::1] minus_mv = minus_obj
    cdef int* plus = &plus_mv[0]
    cdef int* minus = &minus_mv[0]
    if n and (plus[0] <= 0 or plus[n - 1] >= width - 1):
        raise WindowOverflowError("initial plus positions outside padded window")
    if m and (minus[0] <= 0 or minus[m - 1] >= width - 1):
        raise WindowOverflowError("initial minus positions outside padded window")

    cdef Py_ssize_t i
    for i in range(n):
        occ[plus[i]] = 1
        who[plus[i]] = <int> i
    for i in range(m):
        occ[minus[i]] = -1
        who[minus[i]] = <int> i

    cdef Py_ssize_t cap_n = n if n > 0 else 1
    cdef Py_ssize_t cap_m = m if m > 0 else 1
    b_arr_obj = np.empty(cap_n, dtype=np.int32)
    b_pos_obj = np.full(cap_n, -1, dtype=np.int32)
    s_arr_obj = np.empty(cap_n, dtype=np.int32)
    s_pos_obj = np.full(cap_n, -1, dtype=np.int32)
    a_arr_obj = np.empty(cap_m, dtype=np.int32)
    a_pos_obj = np.full(cap_m, -1, dtype=np.int32)
    frozen_p_obj = np.zeros(cap_n, dtype=np.uint8)
    frozen_m_obj = np.zeros(cap_m, dtype=np.uint8)
    cdef int[::1] b_arr_mv = b_arr_obj
    cdef int[::1] b_pos_mv = b_pos_obj
    cdef int[::1] s_arr_mv = s_arr_obj
    cdef int[::1] s_pos_mv = s_pos_obj
    cdef int[::1] a_arr_mv = a_arr_obj
    cdef int[::1] a_pos_mv = a_pos_obj
    cdef unsigned char[::1] frozen_p_mv = frozen_p_obj
    cdef unsigned char[::1] frozen_m_mv = frozen_m_obj
    cdef int* b_arr = &b_arr_mv[0]
    cdef int* b_pos = &b_pos_mv[0]
    cdef int* s_arr = &s_arr_mv[0]
    cdef int* s_pos = &s_pos_mv[0]
    cdef int* a_arr = &a_arr_mv[0]
    cdef int* a_pos = &a_pos_mv[0]
    cdef unsigned char* frozen_p = &frozen_p_mv[0]
    cdef unsigned char* frozen_m = &frozen_m_mv[0]
    cdef int nb = 0, na = 0, ns = 0

    cdef signed char c
    for i in range(n):
        c = occ[plus[i] + 1]
        if c == 0:
            nb = _sadd(b_arr, b_pos, nb, <int> i)
        elif c == -1:
            ns = _sadd(s_arr, s_pos, ns, <int> i)
    for i in range(m):
        if occ[minus[i] - 1] == 0:
            na = _sadd(a_arr, a_pos, na, <int> i)

    ck_np_obj = np.zeros(k, dtype=np.int32)
    ck_nm_obj = np.zeros(k, dtype=np.int32)
    cdef int[::1] ck_np_mv = ck_np_obj
    cdef int[::1] ck_nm_mv = ck_nm_obj
    cdef int* ck_np = &ck_np_mv[0] if k else NULL
    cdef int* ck_nm = &ck_nm_mv[0] if k else NULL
    ck_plus_obj = np.zeros((k, n), dtype=np.int64) if record_configs else None
    ck_minus_obj = np.zeros((k, m), dtype=np.int64) if record_configs else None
    cdef long long[:, ::1] ck_plus_mv
    cdef long long[:, ::1] ck_minus_mv
    cdef long long* ck_plus = NULL
    cdef long long* ck_minus = NULL
    if record_configs and k * n:
        ck_plus_mv = ck_plus_obj
        ck_plus = &ck_plus_mv[0, 0]
    if record_configs and k * m:
        ck_minus_mv = ck_minus_obj
        ck_minus = &ck_minus_mv[0, 0]
    cks_obj = np.ascontiguousarray(checkpoints, dtype=np.float64)
    cdef const double[::1] cks_mv = cks_obj
    cdef const double* cks = &cks_mv[0] if k else NULL

    cdef int np_c = 0, nm_c = 0
    cdef Py_ssize_t ci = 0
    cdef double t_cur = 0.0, t_next, rate, dt, u
    cdef long long events = 0
    cdef bint crossed = False
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t blk = 0
    cdef const float[::1] e_mv
    cdef const float[::1] u_mv
    cdef const float* e_buf = NULL
    cdef const float* u_buf = NULL
    e_obj = None
    u_obj = None
    cdef int p, q, r, j, stop
    cdef long s, t, maxm, minp
    cdef bint all_p, all_m
    cdef Py_ssize_t col
    cdef double inv_beta = 1.0 / beta
    cdef double inv_alpha = 1.0 / alpha

    rate = beta * nb + alpha * na + ns
    while rate > 0.0:
        if pos == blk:
            e_obj, u_obj = refill()
            e_mv = e_obj
            u_mv = u_obj
            blk = e_mv.shape[0]
            e_buf = &e_mv[0]
            u_buf = &u_mv[0]
            pos = 0
        stop = 0
        with nogil:
            while True:
                dt = (<double> e_buf[pos]) / rate
                u = (<double> u_buf[pos]) * rate
                pos += 1
                t_next = t_cur + dt
                while ci < k and cks[ci] < t_next:
                    ck_np[ci] = np_c
                    ck_nm[ci] = nm_c
                    if record_configs:
                        for col in range(n):
                            ck_plus[ci * n + col] = plus[col] - off
                        for col in range(m):
                            ck_minus[ci * m + col] = minus[col] - off
                    ci += 1
                if t_next > t_max:
                    t_cur = t_max
                    stop = 2
                    break
                t_cur = t_next

                if u < beta * nb:
                    # plus hop: p moves s -> s+1 into an empty site
                    j = <int> (u * inv_beta)
                    if j >= nb:
                        j = nb - 1
                    p = b_arr[j]
                    s = plus[p]
                    t = s + 1
                    nb = _srm(b_arr, b_pos, nb, p)
                    occ[s] = 0
                    who[s] = -1
                    occ[t] = 1
                    who[t] = p
                    plus[p] = <int> t
                    if t == idx0:
                        np_c += 1
                    if occ[s - 1] == 1:
                        r = who[s - 1]
                        if not frozen_p[r] and b_pos[r] < 0:
                            nb = _sadd(b_arr, b_pos, nb, r)
                    c = occ[t + 1]
                    if c == 0:
                        if not frozen_p[p]:
                            nb = _sadd(b_arr, b_pos, nb, p)
                    elif c == -1:
                        q = who[t + 1]
                        if a_pos[q] >= 0:
                            na = _srm(a_arr, a_pos, na, q)
                        if not frozen_p[p]:
                            ns = _sadd(s_arr, s_pos, ns, p)
                else:
                    u -= beta * nb
                    if u < alpha * na:
                        # minus hop: q moves s -> s-1 into an empty site
                        j = <int> (u * inv_alpha)
                        if j >= na:
                            j = na - 1
                        q = a_arr[j]
                        s = minus[q]
                        t = s - 1
                        na = _srm(a_arr, a_pos, na, q)
                        occ[s] = 0
                        who[s] = -1
                        occ[t] = -1
                        who[t] = q
                        minus[q] = <int> t
                        if t == idx0 - 1:
                            nm_c += 1
                        if occ[s + 1] == -1:
                            r = who[s + 1]
                            if not frozen_m[r] and a_pos[r] < 0:
                                na = _sadd(a_arr, a_pos, na, r)
                        c = occ[t - 1]
                        if c == 0:
                            if not frozen_m[q]:
                                na = _sadd(a_arr, a_pos, na, q)
                        elif c == 1:
                            r = who[t - 1]
                            if b_pos[r] >= 0:
                                nb = _srm(b_arr, b_pos, nb, r)
                            if not frozen_p[r]:
                                ns = _sadd(s_arr, s_pos, ns, r)
                    else:
                        # swap: (+ at s, - at s+1) -> (- at s, + at s+1)
                        u -= alpha * na
                        j = <int> u
                        if j >= ns:
                            j = ns - 1
                        p = s_arr[j]
                        s = plus[p]
                        t = s + 1
                        q = who[t]
                        ns = _srm(s_arr, s_pos, ns, p)
                        occ[s] = -1
                        who[s] = q
                        minus[q] = <int> s
                        occ[t] = 1
                        who[t] = p
                        plus[p] = <int> t
                        if t == idx0:
                            np_c += 1
                            nm_c += 1
                        c = occ[s - 1]
                        if c == 0:
                            if not frozen_m[q]:
                                na = _sadd(a_arr, a_pos, na, q)
                        elif c == 1:
                            r = who[s - 1]
                            if not frozen_p[r]:
                                ns = _sadd(s_arr, s_pos, ns, r)
                        c = occ[t + 1]
                        if c == 0:
                            if not frozen_p[p]:
                                nb = _sadd(b_arr, b_pos, nb, p)
                        elif c == -1:
                            if not frozen_p[p]:
                                ns = _sadd(s_arr, s_pos, ns, p)

                events += 1
                if not record_configs and (events & SWEEP_MASK) == 0 and n > 0 and m > 0:
                    # particle arrays stay sorted (same-species overtaking is
                    # impossible), so the extremes are at the array ends
                    maxm = minus[m - 1]
                    all_p = np_c == n
                    for i in range(n):
                        p = <int> i
                        if frozen_p[p]:
                            continue
                        s = plus[p]
                        if s > maxm and (all_p or s - i >= idx0):
                            frozen_p[p] = 1
                            if b_pos[p] >= 0:
                                nb = _srm(b_arr, b_pos, nb, p)
                            if s_pos[p] >= 0:
                                ns = _srm(s_arr, s_pos, ns, p)
                    minp = plus[0]
                    all_m = nm_c == m
                    for i in range(m):
                        q = <int> i
                        if frozen_m[q]:
                            continue
                        s = minus[q]
                        if s < minp and (all_m or s + (m - 1 - i) < idx0):
                            frozen_m[q] = 1
                            if a_pos[q] >= 0:
                                na = _srm(a_arr, a_pos, na, q)
                if stop_when_crossed and np_c >= n and nm_c >= m:
                    crossed = True
                    stop = 3
                    break
                rate = beta * nb + alpha * na + ns
                if rate <= 0.0:
                    stop = 1
                    break
                if pos == blk:
                    break
        if stop:
            break

    while ci < k:
        ck_np[ci] = np_c
        ck_nm[ci] = nm_c
        if record_configs:
            for col in range(n):
                ck_plus[ci * n + col] = plus[col] - off
            for col in range(m):
                ck_minus[ci * m + col] = minus[col] - off
        ci += 1
    if not crossed:
        crossed = np_c >= n and nm_c >= m
    if n and plus[n - 1] >= width - 2:
        raise WindowOverflowError("plus particle reached window edge")
    if m and minus[0] <= 1:
        raise WindowOverflowError("minus particle reached window edge")
    return KernelResult(
        ck_nplus=ck_np_obj,
        ck_nminus=ck_nm_obj,
        crossed=crossed,
        final_plus=plus_obj.astype(np.int64) - off,
        final_minus=minus_obj.astype(np.int64) - off,
        ck_plus=ck_plus_obj,
        ck_minus=ck_minus_obj,
        events=int(events),
    )
