"""Per-arrival sweep kernel: integer grid conversion and backend selection.

The schedule is rescaled so that every transmission edge, byte offset, cut
point and partial reception lands on an integer grid of ``unit`` points per
slot.  The kernels then run on plain integers.  The compiled backend
(``_ckernel``) is used when it imported and the grid fits in 64 bits;
otherwise the pure-Python transliteration in ``_kernel_py`` runs.  Schedules
that do not fit any grid (hand-edited JSON, say) fall back to the exact
Fraction simulator.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from . import _kernel_py
from ._kernel_py import GridError
from .core import BroadcastSchedule

log = logging.getLogger(__name__)

try:  # pragma: no cover - depends on the build
    from . import _ckernel
except ImportError:  # pragma: no cover
    _ckernel = None

HAVE_COMPILED = _ckernel is not None
BACKEND = "compiled" if HAVE_COMPILED else "python"

POLICY_CODES = {"next-slot": 0, "join-plus-slot": 1, "earliest": 2, "fixed": 3}

# keep every intermediate of the C kernel below 2**62
_C_LIMIT = 1 << 62


@dataclass
class Grid:
    unit: int
    tgrid: int
    period: int
    size: int
    ch_ptr: list
    st: list
    en: list
    x0: list
    x1: list
    rn: list
    rd: list
    cov_ptr: list
    cov_lo: list
    cov_hi: list


@dataclass(frozen=True)
class ArrivalResult:
    earliest: Fraction
    start: Fraction
    stall: Fraction
    buffer: Fraction
    redundant: Fraction


def _scale(x: Fraction, unit: int) -> int:
    return x.numerator * (unit // x.denominator)


def build_grid(schedule: BroadcastSchedule, delay: Fraction | None = None) -> Grid:
    m = schedule.params.m
    txs = schedule.transmissions
    tdens = {t.start.denominator for t in txs} | {t.duration.denominator for t in txs}
    ddens = {t.video_offset.denominator for t in txs} | {t.length.denominator for t in txs}
    tden = lcm(m, *tdens)
    if delay is not None:
        tden = lcm(tden, delay.denominator)
    unit = lcm(tden, *ddens)
    for rate in {t.rate for t in txs}:
        unit = lcm(unit, (rate / tden).denominator)
    tgrid = unit // tden

    by_ch = schedule.by_channel()
    ch_ptr, st, en, x0, x1, rn, rd = [0], [], [], [], [], [], []
    cov_ptr, cov_lo, cov_hi = [0], [], []
    for ch in sorted(by_ch):
        lst = by_ch[ch]
        for t in lst:
            a = _scale(t.start, unit)
            x = _scale(t.video_offset, unit)
            st.append(a)
            en.append(a + _scale(t.duration, unit))
            x0.append(x)
            x1.append(x + _scale(t.length, unit))
            rn.append(t.rate.numerator)
            rd.append(t.rate.denominator)
        ch_ptr.append(len(st))
        merged = []
        for lo, hi in sorted((x0[i], x1[i]) for i in range(ch_ptr[-2], ch_ptr[-1])):
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        for lo, hi in merged:
            cov_lo.append(lo)
            cov_hi.append(hi)
        cov_ptr.append(len(cov_lo))
    return Grid(
        unit=unit,
        tgrid=tgrid,
        period=schedule.hyperperiod_slots * unit,
        size=schedule.params.N * unit,
        ch_ptr=ch_ptr, st=st, en=en, x0=x0, x1=x1, rn=rn, rd=rd,
        cov_ptr=cov_ptr, cov_lo=cov_lo, cov_hi=cov_hi,
    )


def _fits_c(grid: Grid, max_arrival: int) -> bool:
    # products are overflow-checked inside the kernel; sums are not
    return 8 * (grid.period + grid.size + max_arrival) < _C_LIMIT


def _run(backend: str, grid: Grid, arrivals: list[int], code: int, delay: int):
    if backend == "compiled":
        return _ckernel.sweep(grid, arrivals, code, delay)
    return _kernel_py.sweep(grid, arrivals, code, delay)


def _reference_rows(schedule, policy, arrivals):
    from .client_sim import simulate_client, earliest_feasible_start

    rows = []
    for a in arrivals:
        tr = simulate_client(schedule, a, policy)
        rows.append(ArrivalResult(earliest_feasible_start(schedule, a), tr.playback_start,
                                  tr.total_stall, tr.max_buffer, tr.redundant_bytes))
    return rows


def sweep_schedule(schedule: BroadcastSchedule, policy, parallel: bool = True,
                   workers: int | None = None, backend: str | None = None,
                   arrivals: list[Fraction] | None = None):
    """Run the kernel for ``arrivals`` (default: every sub-slot boundary in one hyperperiod).

    Returns ``(rows, backend_used)``; rows are in arrival order whatever the
    parallelism, so aggregation is deterministic.
    """
    m = schedule.params.m
    if arrivals is None:
        arrivals = [Fraction(q, m) for q in range(schedule.hyperperiod_slots * m)]
    delay = policy.delay if policy.variant == "fixed" else None
    code = POLICY_CODES[policy.variant]
    backend = backend or BACKEND
    if backend == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled kernel not available; rebuild the package or use backend='python'")
    if backend == "reference":
        return _reference_rows(schedule, policy, arrivals), "reference"

    grid = build_grid(schedule, delay)
    unit = grid.unit
    ticks = []
    for a in arrivals:
        v = a * unit
        if v.denominator != 1:
            raise ValueError(f"arrival {a} is not on the sub-slot grid")
        ticks.append(int(v))
    delay_ticks = int(delay * unit) if delay is not None else 0

    if backend == "compiled" and not _fits_c(grid, max((abs(t) for t in ticks), default=0) + delay_ticks):
        log.info("grid too large for the compiled kernel (unit=%d); using the Python kernel", unit)
        backend = "python"

    try:
        try:
            if backend == "compiled" and parallel and len(ticks) > 64:
                n = workers or min(8, os.cpu_count() or 1)
                size = -(-len(ticks) // n)
                chunks = [ticks[i:i + size] for i in range(0, len(ticks), size)]
                with ThreadPoolExecutor(max_workers=n) as pool:
                    parts = list(pool.map(lambda c: _run(backend, grid, c, code, delay_ticks), chunks))
                raw = [r for part in parts for r in part]
            else:
                raw = _run(backend, grid, ticks, code, delay_ticks)
        except OverflowError:
            log.info("compiled kernel overflowed; rerunning with the Python kernel")
            backend = "python"
            raw = _run(backend, grid, ticks, code, delay_ticks)
    except GridError as exc:
        log.warning("schedule is not grid aligned (%s); using the exact reference simulator", exc)
        return _reference_rows(schedule, policy, arrivals), "reference"

    rows = [
        ArrivalResult(
            Fraction(e, unit), Fraction(p, unit), Fraction(s, unit),
            Fraction(bn, bd * unit), Fraction(r, unit),
        )
        for e, p, s, bn, bd, r in raw
    ]
    return rows, backend
