"""Schedule builders for the harmonic broadcasting family.

Every builder returns one hyperperiod of a :class:`BroadcastSchedule` in
canonical units (slot = 1, playback rate = 1, segment ``i`` occupies bytes
``[i-1, i)``).  Every channel starts its cycle at time 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import (
    BroadcastSchedule,
    ParamError,
    Transmission,
    VideoParams,
    lcm_range,
)

ONE = Fraction(1)


@dataclass(frozen=True)
class FragmentRef:
    segment_index: int
    fragment_index: int
    offset: Fraction
    length: Fraction

    @property
    def byte_range(self) -> tuple[Fraction, Fraction]:
        return self.offset, self.length


@dataclass(frozen=True)
class AqhbMatrix:
    segment_index: int
    cols: int
    cells: tuple[tuple[int, ...], ...]

    def row(self, r: int) -> tuple[int, ...]:
        """1-based row access."""
        return self.cells[r - 1]

    def as_lists(self) -> list[list[int]]:
        return [list(r) for r in self.cells]


def equal_fragments(segment: int, count: int) -> list[FragmentRef]:
    """Split segment ``segment`` (1-based) into ``count`` equal fragments."""
    size = Fraction(1, count)
    base = Fraction(segment - 1)
    return [FragmentRef(segment, f + 1, base + f * size, size) for f in range(count)]


def fragments(scheme: str, params: VideoParams, segment: int) -> list[FragmentRef]:
    """The fragment partition a scheme uses for one segment."""
    i, m = segment, params.m
    if scheme == "HB":
        return equal_fragments(i, i)
    if scheme == "CHB":
        return equal_fragments(i, 1 if i <= 3 else i - 1)
    if scheme == "QHB":
        return equal_fragments(i, 1 if i == 1 else i * m - 1)
    if scheme == "AHB":
        return equal_fragments(i, i)
    if scheme == "AQHB":
        return equal_fragments(i, i * m)
    raise ParamError(f"unknown scheme {scheme!r}")


# -- HB --------------------------------------------------------------------------

def build_hb(params: VideoParams) -> BroadcastSchedule:
    N = params.N
    H = lcm_range(1, N)
    txs = []
    for i in range(1, N + 1):
        part = Fraction(1, i)
        for s in range(H):
            txs.append(Transmission(i, Fraction(s), ONE, (i - 1) + (s % i) * part, part, part))
    return BroadcastSchedule(params, "HB", H, tuple(txs))


# -- CHB -------------------------------------------------------------------------

def build_chb(params: VideoParams) -> BroadcastSchedule:
    N = params.N
    if N < 3:
        raise ParamError(f"CHB needs N >= 3 segments, got N={N}")
    H = lcm_range(2, N - 1)
    txs = []
    for s in range(H):
        txs.append(Transmission(1, Fraction(s), ONE, Fraction(0), ONE, ONE))
        # S_2 on even slots, S_3 on odd slots
        txs.append(Transmission(2, Fraction(s), ONE, Fraction(1 + s % 2), ONE, ONE))
    for c in range(3, N):
        part = Fraction(1, c)
        for s in range(H):
            txs.append(Transmission(c, Fraction(s), ONE, c + (s % c) * part, part, part))
    txs.sort(key=lambda t: (t.channel, t.start))
    return BroadcastSchedule(params, "CHB", H, tuple(txs))


# -- QHB -------------------------------------------------------------------------

def _qhb_fragment(i: int, m: int, j: int, k: int, last: bool) -> int:
    if last:
        return (j - 1) % (i - 1) + 1
    return (i * k + j - 1) % (i * (m - 1)) + i


def qhb_fragment_index(i: int, m: int, slot_j: int, subslot_k: int) -> int:
    """Fragment of S_i sent in sub-slot ``subslot_k`` of slot ``slot_j`` (both 1-based).

    The last sub-slot cycles through fragments ``1..i-1``; the others carry the
    remaining ``i*(m-1)`` fragments in the interleaved order.
    """
    if i < 2:
        raise ValueError(f"QHB fragment placement needs i >= 2, got {i}")
    if m < 2:
        raise ValueError(f"QHB fragment placement needs m >= 2, got {m}")
    if not 1 <= subslot_k <= m:
        raise ValueError(f"sub-slot {subslot_k} outside 1..{m}")
    if slot_j < 1:
        raise ValueError(f"slot index {slot_j} must be >= 1")
    return _qhb_fragment(i, m, slot_j, subslot_k, subslot_k == m)


def qhb_rate(i: int, m: int) -> Fraction:
    return Fraction(m, i * m - 1)


def build_qhb(params: VideoParams, slot_base: int = 1, subslot_base: int = 1) -> BroadcastSchedule:
    """QHB schedule.

    ``slot_base``/``subslot_base`` give the index of the first slot and first
    sub-slot fed to the placement formula; the defaults are the 1-based
    reading, the alternatives exist for :func:`resolve_qhb_bases`.
    """
    N, m = params.N, params.m
    if m < 2:
        raise ParamError(f"QHB needs m >= 2 sub-slots, got m={m}")
    if slot_base not in (0, 1) or subslot_base not in (0, 1):
        raise ValueError("index bases must be 0 or 1")
    H = lcm_range(1, N)
    sub = Fraction(1, m)
    txs = [Transmission(1, Fraction(s), ONE, Fraction(0), ONE, ONE) for s in range(H)]
    for i in range(2, N + 1):
        nfrag = i * m - 1
        size = Fraction(1, nfrag)
        rate = qhb_rate(i, m)
        for s in range(H):
            j = s + slot_base
            for kk in range(m):
                f = _qhb_fragment(i, m, j, kk + subslot_base, kk == m - 1)
                txs.append(Transmission(i, s + kk * sub, sub, (i - 1) + (f - 1) * size, size, rate))
    return BroadcastSchedule(params, "QHB", H, tuple(txs))


@dataclass(frozen=True)
class QhbResolution:
    """Outcome of checking every index-base reading of the QHB placement formula."""

    policy: str
    max_stall_by_bases: dict[tuple[int, int], Fraction]
    adopted: tuple[int, int]
    discrepancy: str | None


QHB_DOCUMENTED_BASES = (1, 1)


def resolve_qhb_bases(params: VideoParams, policy=None, parallel: bool = False) -> QhbResolution:
    """Sweep all arrivals for each (slot, sub-slot) base pair and pick a stall-free one.

    The documented 1-based pair wins when it is stall-free.  If no pair is, the
    documented pair is kept and the outcome carries a discrepancy message.
    """
    from .client_sim import PlaybackPolicy, sweep_arrivals

    if policy is None:
        policy = PlaybackPolicy.next_slot()
    order = [QHB_DOCUMENTED_BASES] + [
        b for b in ((0, 0), (0, 1), (1, 0)) if b != QHB_DOCUMENTED_BASES
    ]
    stalls = {}
    for jb, kb in order:
        sched = build_qhb(params, slot_base=jb, subslot_base=kb)
        stalls[(jb, kb)] = sweep_arrivals(sched, policy, parallel=parallel).max_total_stall
    zero = [b for b in order if stalls[b] == 0]
    if zero:
        return QhbResolution(str(policy), stalls, zero[0], None)
    worst = ", ".join(f"bases{b}: {stalls[b]}" for b in order)
    msg = (
        f"QHB N={params.N} m={params.m} stalls under policy {policy} for every index base "
        f"({worst} slots); the zero-wait claim does not hold for this playback policy"
    )
    return QhbResolution(str(policy), stalls, QHB_DOCUMENTED_BASES, msg)


# -- AHB -------------------------------------------------------------------------

def ahb_problematic(k: int, slot: int) -> int | None:
    """Fragment of S_k served at full rate in ``slot``, or None.

    Fragment ``i`` is problematic in slots ``k*t + (i-1)`` for ``t >= 1`` and
    ``1 <= i <= k-1``.
    """
    if k <= 1 or slot < k:
        return None
    i = slot % k + 1
    return i if i <= k - 1 else None


def build_ahb(params: VideoParams) -> BroadcastSchedule:
    """Steady-state AHB hyperperiod.

    Slot ``s`` of the returned schedule stands for absolute slot ``s + c*H``
    with ``c >= 1``; ``H = lcm(1..N) >= 2N-2`` so every burst pattern has
    started.  Bursts occupy the first ``1/k`` of a problematic slot.
    """
    N = params.N
    H = lcm_range(1, N)
    txs = []
    for k in range(1, N + 1):
        size = Fraction(1, k)
        for s in range(H):
            frag = s % k + 1
            offset = (k - 1) + (frag - 1) * size
            if ahb_problematic(k, s + H) is not None:
                txs.append(Transmission(k, Fraction(s), size, offset, size, ONE))
            else:
                txs.append(Transmission(k, Fraction(s), ONE, offset, size, size))
    return BroadcastSchedule(params, "AHB", H, tuple(txs))


# -- AQHB ------------------------------------------------------------------------

def aqhb_matrix(i: int, m: int) -> AqhbMatrix:
    if i < 1 or m < 1:
        raise ValueError(f"matrix dimensions must be positive, got {i}x{m}")
    cells = tuple(tuple(i * (col - 1) + row for col in range(1, m + 1)) for row in range(1, i + 1))
    return AqhbMatrix(i, m, cells)


def build_aqhb(params: VideoParams) -> BroadcastSchedule:
    N, m = params.N, params.m
    H = lcm_range(1, N)
    sub = Fraction(1, m)
    txs = []
    for i in range(1, N + 1):
        matrix = aqhb_matrix(i, m)
        size = Fraction(1, i * m)
        rate = Fraction(1, i)
        for s in range(H):
            row = matrix.row(s % i + 1)
            for c, frag in enumerate(row):
                txs.append(Transmission(i, s + c * sub, sub, (i - 1) + (frag - 1) * size, size, rate))
    return BroadcastSchedule(params, "AQHB", H, tuple(txs))


BUILDERS = {
    "HB": build_hb,
    "CHB": build_chb,
    "QHB": build_qhb,
    "AHB": build_ahb,
    "AQHB": build_aqhb,
}


def build(scheme: str, params: VideoParams) -> BroadcastSchedule:
    try:
        builder = BUILDERS[scheme.upper()]
    except KeyError:
        raise ParamError(f"unknown scheme {scheme!r}; expected one of {', '.join(BUILDERS)}") from None
    return builder(params)
