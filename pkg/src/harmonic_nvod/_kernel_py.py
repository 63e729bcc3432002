"""Pure-Python sweep kernel over an integer grid (fallback for ``_ckernel``).

Times and byte positions are integers in grid units.  For each arrival the
kernel returns ``(earliest, start, stall, buf_num, buf_den, redundant)``,
the maximum buffer being ``buf_num / buf_den`` grid units.

The buffer maximum is only evaluated at piece start/end times and at the
playback start: between those, received data grows linearly and playback
consumption can only speed up at a piece edge, so no interior point can
beat them.
"""

from __future__ import annotations

from bisect import bisect_right


class GridError(ValueError):
    """The schedule cannot be represented on an exact integer grid."""


def _exact(num: int, den: int) -> int:
    q, r = divmod(num, den)
    if r:
        raise GridError(f"{num}/{den} is off the grid")
    return q


def _pieces(g, a):
    """Availability pieces (x0, x1, t0, t1, rn, rd) and redundant bytes for arrival ``a``."""
    P = g.period
    pieces = []
    redundant = 0
    amod = a % P
    base = a - amod
    for c in range(len(g.ch_ptr) - 1):
        lo, hi = g.ch_ptr[c], g.ch_ptr[c + 1]
        n = hi - lo
        unc = [(g.cov_lo[j], g.cov_hi[j]) for j in range(g.cov_ptr[c], g.cov_ptr[c + 1])]
        # a transmission wrapping past the period end may still be on air
        if g.en[hi - 1] - P > amod:
            k, shift = n - 1, base - P
        else:
            k, shift = bisect_right(g.en, amod, lo, hi) - lo, base
        steps = 0
        while unc:
            if k == n:
                k, shift = 0, shift + P
            if steps > 2 * n + 1:
                raise GridError("channel never completes its data")
            i = lo + k
            k += 1
            steps += 1
            s = g.st[i] + shift
            e = g.en[i] + shift
            if e <= a:
                continue
            rn, rd = g.rn[i], g.rd[i]
            x0 = g.x0[i]
            r0 = x0 + _exact((a - s) * rn, rd) if a > s else x0
            r1 = g.x1[i]
            new = 0
            last = r0
            rest = []
            for ulo, uhi in unc:
                p0 = ulo if ulo > r0 else r0
                p1 = uhi if uhi < r1 else r1
                if p0 < p1:
                    pieces.append((p0, p1, s + _exact((p0 - x0) * rd, rn), s + _exact((p1 - x0) * rd, rn), rn, rd))
                    new += p1 - p0
                    if p1 > last:
                        last = p1
                    if ulo < p0:
                        rest.append((ulo, p0))
                    if p1 < uhi:
                        rest.append((p1, uhi))
                else:
                    rest.append((ulo, uhi))
            unc = rest
            redundant += (r1 - r0 if unc else last - r0) - new
    pieces.sort()
    return pieces, redundant


def _received_at(pieces, t):
    total = 0
    for x0, x1, t0, t1, rn, rd in pieces:
        if t >= t1:
            total += x1 - x0
        elif t > t0:
            total += _exact((t - t0) * rn, rd)
    return total


def one(g, a, code, delay):
    pieces, redundant = _pieces(g, a)
    lag_max = max(max(t0 - x0, t1 - x1) for x0, x1, t0, t1, _, _ in pieces)
    earliest = lag_max if lag_max > a else a
    U = g.unit
    if code == 0:
        start = -(-a // U) * U
    elif code == 1:
        start = -(-a // U) * U + U
    elif code == 2:
        start = earliest
    else:
        start = a + delay

    # playback scan: effective lag in force inside each piece
    n = len(pieces)
    lag = start
    geff = [0] * n
    for j, (x0, x1, t0, t1, _, _) in enumerate(pieces):
        head = t0 - x0
        geff[j] = lag if lag > head else head
        tail = t1 - x1
        top = head if head > tail else tail
        if top > lag:
            lag = top
    stall = lag - start

    # candidate times for the buffer maximum
    times = sorted({p[2] for p in pieces} | {p[3] for p in pieces})
    by_start = sorted(range(n), key=lambda j: pieces[j][2])
    ptr = 0
    active = []
    done = 0
    jp = 0
    best_num, best_den = 0, 1
    tg = g.tgrid
    if start % tg == 0:
        times = sorted(set(times) | {start})
    else:
        g0 = start - start % tg
        r0 = _received_at(pieces, g0)
        r1 = _received_at(pieces, g0 + tg)
        num = r0 * tg + (r1 - r0) * (start - g0)
        if num * best_den > best_num * tg:
            best_num, best_den = num, tg
    for t in times:
        while ptr < n and pieces[by_start[ptr]][2] <= t:
            active.append(by_start[ptr])
            ptr += 1
        recv = done
        still = []
        for j in active:
            x0, x1, t0, t1, rn, rd = pieces[j]
            if t1 <= t:
                done += x1 - x0
                recv += x1 - x0
            else:
                recv += _exact((t - t0) * rn, rd)
                still.append(j)
        active = still
        # consumed position at t
        while jp < n and max(pieces[jp][1] + geff[jp], pieces[jp][3]) <= t:
            jp += 1
        if jp == n:
            used = g.size
        else:
            x0, x1, t0, t1, rn, rd = pieces[jp]
            gj = geff[jp]
            if x0 + gj > t:
                used = x0
            else:
                used = min(t - gj, x0 + _exact((t - t0) * rn, rd))
                used = min(max(used, x0), x1)
        buf = recv - used
        if buf * best_den > best_num:
            best_num, best_den = buf, 1
    return earliest, start, stall, best_num, best_den, redundant


def sweep(g, arrivals, code, delay):
    return [one(g, a, code, delay) for a in arrivals]
