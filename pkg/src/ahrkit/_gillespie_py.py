"""Pure-Python Gillespie kernel, the reference implementation.

The compiled extension (_gillespie.pyx) is a line-by-line transliteration;
both consume the same RNG buffer protocol (paired float32 blocks of
exponentials and uniforms, one shared index) so trajectories are
bit-identical across backends.

State layout: one occupancy array over a padded window (0 empty, 1 plus,
-1 minus, 2 wall sentinel), a who array giving the particle index at each
site, and three constant-rate event groups with swap-remove membership:
B (plus hops, rate beta), A (minus hops, rate alpha), S (swaps, rate 1).
Selection inside a group is uniform because all its rates are equal.

In counts-only mode two exact optimizations apply: stop once all targeted
crossings happened (counts cannot change after), and freeze particles
that can no longer influence any count.  A plus may be frozen once it is
strictly right of max(minus): it never swaps again and its position is
invisible to every minus move.  Suppressing its hops can stall the pluses
behind it, but a plus only stalls directly under the pile, and to get
there it must first overtake every minus below the stall site, so stalled
pluses always sit strictly above every minus; minus dynamics stay exact.
The one remaining hazard is a stalled plus that has not crossed the
origin yet, whose crossing the pile would block forever.  A pile under a
frozen plus at index i (sorted by position) reaches down at most i sites,
so requiring position - i >= 0 keeps every possible stall at or right of
the origin, where the particle has already been counted.  Once all n
pluses have crossed, that guard is unnecessary.  Minuses mirror this.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

BLOCK = 8192
SWEEP_MASK = 1023

# test hook: recompute the event groups from occupancy after every event and
# compare against the incrementally maintained ones
DEBUG_VALIDATE = False


def _validate_sets(occ, plus, minus, n, m, nb, na, ns, b_pos, a_pos, s_pos, frozen_p, frozen_m):
    want_b = want_a = want_s = 0
    for p in range(n):
        c = occ[plus[p] + 1]
        in_b = c == 0 and not frozen_p[p]
        in_s = c == -1 and not frozen_p[p]
        assert (b_pos[p] >= 0) == in_b, "B membership wrong for plus %d" % p
        assert (s_pos[p] >= 0) == in_s, "S membership wrong for plus %d" % p
        want_b += in_b
        want_s += in_s
    for q in range(m):
        in_a = occ[minus[q] - 1] == 0 and not frozen_m[q]
        assert (a_pos[q] >= 0) == in_a, "A membership wrong for minus %d" % q
        want_a += in_a
    assert (nb, na, ns) == (want_b, want_a, want_s)


class WindowOverflowError(RuntimeError):
    """A particle reached the padded window edge; enlarge padding."""


class KernelResult(NamedTuple):
    ck_nplus: np.ndarray
    ck_nminus: np.ndarray
    crossed: bool
    final_plus: np.ndarray
    final_minus: np.ndarray
    ck_plus: np.ndarray | None
    ck_minus: np.ndarray | None
    events: int


def run_kernel(
    plus_sites: np.ndarray,
    minus_sites: np.ndarray,
    alpha: float,
    beta: float,
    t_max: float,
    checkpoints: np.ndarray,
    left: int,
    width: int,
    refill: Callable,
    record_configs: bool,
    stop_when_crossed: bool,
) -> KernelResult:
    n = len(plus_sites)
    m = len(minus_sites)
    k = len(checkpoints)
    off = 1 - left
    idx0 = off  # array index of lattice site 0

    occ = np.zeros(width, dtype=np.int8)
    who = np.full(width, -1, dtype=np.int32)
    occ[0] = 2
    occ[width - 1] = 2
    plus = np.asarray(plus_sites, dtype=np.int32) + off
    minus = np.asarray(minus_sites, dtype=np.int32) + off
    if n and (plus[0] <= 0 or plus[-1] >= width - 1):
        raise WindowOverflowError("initial plus positions outside padded window")
    if m and (minus[0] <= 0 or minus[-1] >= width - 1):
        raise WindowOverflowError("initial minus positions outside padded window")
    for p in range(n):
        occ[plus[p]] = 1
        who[plus[p]] = p
    for q in range(m):
        occ[minus[q]] = -1
        who[minus[q]] = q

    b_arr = np.empty(max(n, 1), dtype=np.int32)
    b_pos = np.full(max(n, 1), -1, dtype=np.int32)
    s_arr = np.empty(max(n, 1), dtype=np.int32)
    s_pos = np.full(max(n, 1), -1, dtype=np.int32)
    a_arr = np.empty(max(m, 1), dtype=np.int32)
    a_pos = np.full(max(m, 1), -1, dtype=np.int32)
    frozen_p = np.zeros(max(n, 1), dtype=np.uint8)
    frozen_m = np.zeros(max(m, 1), dtype=np.uint8)
    nb = na = ns = 0

    def add_b(p):
        nonlocal nb
        b_arr[nb] = p
        b_pos[p] = nb
        nb += 1

    def rm_b(p):
        nonlocal nb
        i = b_pos[p]
        last = b_arr[nb - 1]
        b_arr[i] = last
        b_pos[last] = i
        b_pos[p] = -1
        nb -= 1

    def add_s(p):
        nonlocal ns
        s_arr[ns] = p
        s_pos[p] = ns
        ns += 1

    def rm_s(p):
        nonlocal ns
        i = s_pos[p]
        last = s_arr[ns - 1]
        s_arr[i] = last
        s_pos[last] = i
        s_pos[p] = -1
        ns -= 1

    def add_a(q):
        nonlocal na
        a_arr[na] = q
        a_pos[q] = na
        na += 1

    def rm_a(q):
        nonlocal na
        i = a_pos[q]
        last = a_arr[na - 1]
        a_arr[i] = last
        a_pos[last] = i
        a_pos[q] = -1
        na -= 1

    for p in range(n):
        c = occ[plus[p] + 1]
        if c == 0:
            add_b(p)
        elif c == -1:
            add_s(p)
    for q in range(m):
        if occ[minus[q] - 1] == 0:
            add_a(q)

    ck_np = np.zeros(k, dtype=np.int32)
    ck_nm = np.zeros(k, dtype=np.int32)
    ck_plus = np.zeros((k, n), dtype=np.int64) if record_configs else None
    ck_minus = np.zeros((k, m), dtype=np.int64) if record_configs else None

    np_c = 0
    nm_c = 0
    ci = 0
    t_cur = 0.0
    events = 0
    crossed = False
    pos = 0
    blk = 0  # refill supplies buffers of any length, typically ramping up
    e_buf = u_buf = None
    inv_beta = 1.0 / beta
    inv_alpha = 1.0 / alpha

    def record(i):
        ck_np[i] = np_c
        ck_nm[i] = nm_c
        if record_configs:
            ck_plus[i] = plus.astype(np.int64) - off
            ck_minus[i] = minus.astype(np.int64) - off

    while True:
        rate = beta * nb + alpha * na + ns
        if rate <= 0.0:
            break
        if pos == blk:
            e_buf, u_buf = refill()
            blk = len(e_buf)
            pos = 0
        dt = float(e_buf[pos]) / rate
        u = float(u_buf[pos]) * rate
        pos += 1
        t_next = t_cur + dt
        while ci < k and checkpoints[ci] < t_next:
            record(ci)
            ci += 1
        if t_next > t_max:
            t_cur = t_max
            break
        t_cur = t_next

        if u < beta * nb:
            # plus hop: p moves s -> s+1 into an empty site
            j = int(u * inv_beta)
            if j >= nb:
                j = nb - 1
            p = b_arr[j]
            s = plus[p]
            t = s + 1
            rm_b(p)
            occ[s] = 0
            who[s] = -1
            occ[t] = 1
            who[t] = p
            plus[p] = t
            if t == idx0:
                np_c += 1
            if occ[s - 1] == 1:
                r = who[s - 1]
                if not frozen_p[r] and b_pos[r] < 0:
                    add_b(r)
            c = occ[t + 1]
            if c == 0:
                if not frozen_p[p]:
                    add_b(p)
            elif c == -1:
                q = who[t + 1]
                if a_pos[q] >= 0:
                    rm_a(q)
                if not frozen_p[p]:
                    add_s(p)
        else:
            u -= beta * nb
            if u < alpha * na:
                # minus hop: q moves s -> s-1 into an empty site
                j = int(u * inv_alpha)
                if j >= na:
                    j = na - 1
                q = a_arr[j]
                s = minus[q]
                t = s - 1
                rm_a(q)
                occ[s] = 0
                who[s] = -1
                occ[t] = -1
                who[t] = q
                minus[q] = t
                if t == idx0 - 1:
                    nm_c += 1
                if occ[s + 1] == -1:
                    r = who[s + 1]
                    if not frozen_m[r] and a_pos[r] < 0:
                        add_a(r)
                c = occ[t - 1]
                if c == 0:
                    if not frozen_m[q]:
                        add_a(q)
                elif c == 1:
                    r = who[t - 1]
                    if b_pos[r] >= 0:
                        rm_b(r)
                    if not frozen_p[r]:
                        add_s(r)
            else:
                # swap: (+ at s, - at s+1) -> (- at s, + at s+1)
                u -= alpha * na
                j = int(u)
                if j >= ns:
                    j = ns - 1
                p = s_arr[j]
                s = plus[p]
                t = s + 1
                q = who[t]
                rm_s(p)
                occ[s] = -1
                who[s] = q
                minus[q] = s
                occ[t] = 1
                who[t] = p
                plus[p] = t
                if t == idx0:
                    np_c += 1
                    nm_c += 1
                c = occ[s - 1]
                if c == 0:
                    if not frozen_m[q]:
                        add_a(q)
                elif c == 1:
                    r = who[s - 1]
                    if not frozen_p[r]:
                        add_s(r)
                c = occ[t + 1]
                if c == 0:
                    if not frozen_p[p]:
                        add_b(p)
                elif c == -1:
                    if not frozen_p[p]:
                        add_s(p)

        events += 1
        if DEBUG_VALIDATE:
            _validate_sets(
                occ, plus, minus, n, m, nb, na, ns,
                b_pos, a_pos, s_pos, frozen_p, frozen_m,
            )
        if not record_configs and (events & SWEEP_MASK) == 0 and n > 0 and m > 0:
            # particle arrays stay sorted (same-species overtaking is
            # impossible), so the extremes are at the array ends
            maxm = minus[m - 1]
            all_p = np_c == n
            for p in range(n):
                if frozen_p[p]:
                    continue
                x = plus[p]
                if x > maxm and (all_p or x - p >= idx0):
                    frozen_p[p] = 1
                    if b_pos[p] >= 0:
                        rm_b(p)
                    if s_pos[p] >= 0:
                        rm_s(p)
            minp = plus[0]
            all_m = nm_c == m
            for q in range(m):
                if frozen_m[q]:
                    continue
                x = minus[q]
                if x < minp and (all_m or x + (m - 1 - q) < idx0):
                    frozen_m[q] = 1
                    if a_pos[q] >= 0:
                        rm_a(q)
        if stop_when_crossed and np_c >= n and nm_c >= m:
            crossed = True
            break

    while ci < k:
        record(ci)
        ci += 1
    if not crossed:
        crossed = np_c >= n and nm_c >= m
    if n and plus[n - 1] >= width - 2:
        raise WindowOverflowError("plus particle reached window edge")
    if m and minus[0] <= 1:
        raise WindowOverflowError("minus particle reached window edge")
    return KernelResult(
        ck_nplus=ck_np,
        ck_nminus=ck_nm,
        crossed=crossed,
        final_plus=plus.astype(np.int64) - off,
        final_minus=minus.astype(np.int64) - off,
        ck_plus=ck_plus,
        ck_minus=ck_minus,
        events=events,
    )
