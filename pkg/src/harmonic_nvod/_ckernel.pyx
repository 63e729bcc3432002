# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sweep kernel; same algorithm and results as ``_kernel_py``.

All arithmetic is on 64-bit integers.  Products go through checked helpers
and any overflow aborts the call with OverflowError (the caller reruns the
batch on the Python kernel), so nothing ever wraps.
"""

from array import array

from libc.stdlib cimport free, malloc, qsort

from ._kernel_py import GridError

cdef extern from *:
    """
    static inline int ck_mul(long long a, long long b, long long *r) { return __builtin_mul_overflow(a, b, r); }
    static inline int ck_add(long long a, long long b, long long *r) { return __builtin_add_overflow(a, b, r); }
    """
    bint ck_mul(long long a, long long b, long long *r) nogil
    bint ck_add(long long a, long long b, long long *r) nogil

ctypedef long long i64

cdef enum:
    E_OK = 0
    E_OVERFLOW = 1
    E_GRID = 2
    E_COVER = 3


cdef struct Piece:
    i64 x0
    i64 x1
    i64 t0
    i64 t1
    i64 rn
    i64 rd


cdef struct Span:
    i64 lo
    i64 hi


cdef struct Grid:
    i64 unit
    i64 tgrid
    i64 period
    i64 size
    int nch
    const i64 *ch_ptr
    const i64 *st
    const i64 *en
    const i64 *x0
    const i64 *x1
    const i64 *rn
    const i64 *rd
    const i64 *cov_ptr
    const i64 *cov_lo
    const i64 *cov_hi


cdef struct Scratch:
    Piece *pieces
    Piece *by_t0
    Span *unc
    Span *rest
    i64 *geff
    i64 *times
    i64 *act
    i64 cap


cdef int cmp_x0(const void *a, const void *b) noexcept nogil:
    cdef i64 u = (<const Piece *>a).x0
    cdef i64 v = (<const Piece *>b).x0
    return (u > v) - (u < v)


cdef int cmp_t0(const void *a, const void *b) noexcept nogil:
    cdef i64 u = (<const Piece *>a).t0
    cdef i64 v = (<const Piece *>b).t0
    return (u > v) - (u < v)


cdef int cmp_i64(const void *a, const void *b) noexcept nogil:
    cdef i64 u = (<const i64 *>a)[0]
    cdef i64 v = (<const i64 *>b)[0]
    return (u > v) - (u < v)


cdef inline i64 floormod(i64 a, i64 p) noexcept nogil:
    cdef i64 r = a % p
    if r < 0:
        r += p
    return r


cdef inline int muldiv(i64 a, i64 b, i64 d, i64 *out) noexcept nogil:
    """out = a*b/d exactly, or an error code."""
    cdef i64 prod
    if ck_mul(a, b, &prod):
        return E_OVERFLOW
    if prod % d != 0:
        return E_GRID
    out[0] = prod / d
    return E_OK


cdef int build_pieces(const Grid *g, i64 a, Scratch *sc, i64 *npieces, i64 *redundant) noexcept nogil:
    cdef i64 P = g.period
    cdef i64 amod = floormod(a, P)
    cdef i64 base = a - amod
    cdef i64 n_out = 0, red = 0
    cdef int c, err
    cdef i64 lo, hi, n, k, shift, steps, i, s, e, rn, rd, x0, r0, r1, new, last
    cdef i64 nunc, nrest, u, p0, p1, ulo, uhi, cut, tp0, tp1, left, right, mid
    cdef Span *tmp
    for c in range(g.nch):
        lo = g.ch_ptr[c]
        hi = g.ch_ptr[c + 1]
        n = hi - lo
        nunc = 0
        for u in range(g.cov_ptr[c], g.cov_ptr[c + 1]):
            sc.unc[nunc].lo = g.cov_lo[u]
            sc.unc[nunc].hi = g.cov_hi[u]
            nunc += 1
        if g.en[hi - 1] - P > amod:
            k = n - 1
            shift = base - P
        else:
            # first transmission on the channel ending after amod
            left = lo
            right = hi
            while left < right:
                mid = (left + right) // 2
                if g.en[mid] <= amod:
                    left = mid + 1
                else:
                    right = mid
            k = left - lo
            shift = base
        steps = 0
        while nunc > 0:
            if k == n:
                k = 0
                shift += P
            if steps > 2 * n + 1:
                return E_COVER
            i = lo + k
            k += 1
            steps += 1
            s = g.st[i] + shift
            e = g.en[i] + shift
            if e <= a:
                continue
            rn = g.rn[i]
            rd = g.rd[i]
            x0 = g.x0[i]
            r0 = x0
            if a > s:
                err = muldiv(a - s, rn, rd, &cut)
                if err:
                    return err
                r0 = x0 + cut
            r1 = g.x1[i]
            new = 0
            last = r0
            nrest = 0
            for u in range(nunc):
                ulo = sc.unc[u].lo
                uhi = sc.unc[u].hi
                p0 = ulo if ulo > r0 else r0
                p1 = uhi if uhi < r1 else r1
                if p0 < p1:
                    if n_out >= sc.cap:
                        return E_COVER
                    err = muldiv(p0 - x0, rd, rn, &tp0)
                    if err:
                        return err
                    err = muldiv(p1 - x0, rd, rn, &tp1)
                    if err:
                        return err
                    sc.pieces[n_out].x0 = p0
                    sc.pieces[n_out].x1 = p1
                    sc.pieces[n_out].t0 = s + tp0
                    sc.pieces[n_out].t1 = s + tp1
                    sc.pieces[n_out].rn = rn
                    sc.pieces[n_out].rd = rd
                    n_out += 1
                    new += p1 - p0
                    if p1 > last:
                        last = p1
                    if ulo < p0:
                        sc.rest[nrest].lo = ulo
                        sc.rest[nrest].hi = p0
                        nrest += 1
                    if p1 < uhi:
                        sc.rest[nrest].lo = p1
                        sc.rest[nrest].hi = uhi
                        nrest += 1
                else:
                    sc.rest[nrest].lo = ulo
                    sc.rest[nrest].hi = uhi
                    nrest += 1
            tmp = sc.unc
            sc.unc = sc.rest
            sc.rest = tmp
            nunc = nrest
            if nunc > 0:
                red += r1 - r0 - new
            else:
                red += last - r0 - new
    qsort(sc.pieces, n_out, sizeof(Piece), cmp_x0)
    npieces[0] = n_out
    redundant[0] = red
    return E_OK


cdef int received_at(const Piece *pieces, i64 n, i64 t, i64 *out) noexcept nogil:
    cdef i64 total = 0, part
    cdef i64 j
    cdef int err
    for j in range(n):
        if t >= pieces[j].t1:
            total += pieces[j].x1 - pieces[j].x0
        elif t > pieces[j].t0:
            err = muldiv(t - pieces[j].t0, pieces[j].rn, pieces[j].rd, &part)
            if err:
                return err
            total += part
    out[0] = total
    return E_OK


cdef int one(const Grid *g, i64 a, int code, i64 delay, Scratch *sc, i64 *res) noexcept nogil:
    cdef i64 n, redundant, j, lag_max, earliest, start, lag, head, tail, top, stall
    cdef i64 U = g.unit, tg = g.tgrid
    cdef int err
    cdef Piece *pc
    cdef Piece *q
    err = build_pieces(g, a, sc, &n, &redundant)
    if err:
        return err
    pc = sc.pieces
    lag_max = pc[0].t0 - pc[0].x0
    for j in range(n):
        head = pc[j].t0 - pc[j].x0
        tail = pc[j].t1 - pc[j].x1
        if head > lag_max:
            lag_max = head
        if tail > lag_max:
            lag_max = tail
    earliest = lag_max if lag_max > a else a
    if code == 0:
        start = a + floormod(-a, U)
    elif code == 1:
        start = a + floormod(-a, U) + U
    elif code == 2:
        start = earliest
    else:
        start = a + delay

    lag = start
    for j in range(n):
        head = pc[j].t0 - pc[j].x0
        sc.geff[j] = lag if lag > head else head
        tail = pc[j].t1 - pc[j].x1
        top = head if head > tail else tail
        if top > lag:
            lag = top
    stall = lag - start

    # candidate times: every piece edge, plus the start when it is on the time grid
    cdef i64 nt = 0
    for j in range(n):
        sc.times[nt] = pc[j].t0
        sc.times[nt + 1] = pc[j].t1
        nt += 2
    cdef i64 best_num = 0, best_den = 1, g0, rr0, rr1, num, lhs, rhs, tmp
    if floormod(start, tg) == 0:
        sc.times[nt] = start
        nt += 1
    else:
        g0 = start - floormod(start, tg)
        err = received_at(pc, n, g0, &rr0)
        if err:
            return err
        err = received_at(pc, n, g0 + tg, &rr1)
        if err:
            return err
        if ck_mul(rr0, tg, &num) or ck_mul(rr1 - rr0, start - g0, &tmp) or ck_add(num, tmp, &num):
            return E_OVERFLOW
        if num > 0:
            best_num = num
            best_den = tg
    qsort(sc.times, nt, sizeof(i64), cmp_i64)

    for j in range(n):
        sc.by_t0[j] = pc[j]
    qsort(sc.by_t0, n, sizeof(Piece), cmp_t0)

    # active pieces are kept at the front of by_t0[lo_act:ptr]; finished ones are swapped out
    cdef i64 ptr = 0, done = 0, recv, used, jp = 0, ti, t, part, k, nact = 0, gj, x
    cdef i64 *act = sc.act
    ti = 0
    while ti < nt:
        t = sc.times[ti]
        ti += 1
        if ti < nt and sc.times[ti] == t:
            continue
        while ptr < n and sc.by_t0[ptr].t0 <= t:
            act[nact] = ptr
            nact += 1
            ptr += 1
        recv = done
        k = 0
        for j in range(nact):
            q = &sc.by_t0[act[j]]
            if q.t1 <= t:
                done += q.x1 - q.x0
                recv += q.x1 - q.x0
            else:
                err = muldiv(t - q.t0, q.rn, q.rd, &part)
                if err:
                    return err
                recv += part
                act[k] = act[j]
                k += 1
        nact = k
        while jp < n:
            top = pc[jp].x1 + sc.geff[jp]
            if pc[jp].t1 > top:
                top = pc[jp].t1
            if top > t:
                break
            jp += 1
        if jp == n:
            used = g.size
        else:
            gj = sc.geff[jp]
            if pc[jp].x0 + gj > t:
                used = pc[jp].x0
            else:
                err = muldiv(t - pc[jp].t0, pc[jp].rn, pc[jp].rd, &x)
                if err:
                    return err
                x += pc[jp].x0
                used = t - gj
                if x < used:
                    used = x
                if used < pc[jp].x0:
                    used = pc[jp].x0
                if used > pc[jp].x1:
                    used = pc[jp].x1
        # compare (recv - used)/1 against best_num/best_den
        if ck_mul(recv - used, best_den, &lhs):
            return E_OVERFLOW
        if lhs > best_num:
            best_num = recv - used
            best_den = 1
    res[0] = earliest
    res[1] = start
    res[2] = stall
    res[3] = best_num
    res[4] = best_den
    res[5] = redundant
    return E_OK


cdef object _i64(values):
    return array("q", values)


def sweep(grid, arrivals, int code, long long delay):
    """Run the kernel for each arrival tick; returns a list of 6-tuples."""
    # the array objects must outlive the raw pointers taken below
    keep = [_i64(getattr(grid, name)) for name in
            ("ch_ptr", "st", "en", "x0", "x1", "rn", "rd", "cov_ptr", "cov_lo", "cov_hi")]
    cdef i64 na = len(arrivals)
    arr = _i64(arrivals if na else [0])
    out = _i64([0] * (6 * na if na else 1))
    cdef const i64[::1] v_ch_ptr = keep[0], v_st = keep[1], v_en = keep[2], v_x0 = keep[3], v_x1 = keep[4]
    cdef const i64[::1] v_rn = keep[5], v_rd = keep[6], v_cov_ptr = keep[7], v_cov_lo = keep[8], v_cov_hi = keep[9]
    cdef const i64[::1] v_arr = arr
    cdef i64[::1] v_out = out
    cdef Grid g
    g.unit = grid.unit
    g.tgrid = grid.tgrid
    g.period = grid.period
    g.size = grid.size
    g.nch = len(grid.ch_ptr) - 1
    g.ch_ptr = &v_ch_ptr[0]
    g.st = &v_st[0]
    g.en = &v_en[0]
    g.x0 = &v_x0[0]
    g.x1 = &v_x1[0]
    g.rn = &v_rn[0]
    g.rd = &v_rd[0]
    g.cov_ptr = &v_cov_ptr[0]
    g.cov_lo = &v_cov_lo[0]
    g.cov_hi = &v_cov_hi[0]

    cdef i64 cap = 0
    cdef int c
    for c in range(g.nch):
        cap += (grid.cov_ptr[c + 1] - grid.cov_ptr[c]) + 2 * (grid.ch_ptr[c + 1] - grid.ch_ptr[c]) + 4
    cdef Scratch sc
    sc.cap = cap
    sc.pieces = <Piece *>malloc(cap * sizeof(Piece))
    sc.by_t0 = <Piece *>malloc(cap * sizeof(Piece))
    sc.unc = <Span *>malloc((cap + 1) * sizeof(Span))
    sc.rest = <Span *>malloc((cap + 1) * sizeof(Span))
    sc.geff = <i64 *>malloc(cap * sizeof(i64))
    sc.times = <i64 *>malloc((2 * cap + 1) * sizeof(i64))
    sc.act = <i64 *>malloc(cap * sizeof(i64))
    cdef int err = E_OK
    cdef i64 idx
    try:
        if not (sc.pieces and sc.by_t0 and sc.unc and sc.rest and sc.geff and sc.times and sc.act):
            raise MemoryError()
        with nogil:
            for idx in range(na):
                err = one(&g, v_arr[idx], code, delay, &sc, &v_out[6 * idx])
                if err:
                    break
    finally:
        free(sc.pieces)
        free(sc.by_t0)
        free(sc.unc)
        free(sc.rest)
        free(sc.geff)
        free(sc.times)
        free(sc.act)
    if err == E_OVERFLOW:
        raise OverflowError("64-bit overflow in the sweep kernel")
    if err == E_GRID:
        raise GridError("schedule edge falls off the integer grid")
    if err == E_COVER:
        raise GridError("channel never completes its data")
    return [tuple(out[6 * i:6 * i + 6]) for i in range(na)]
