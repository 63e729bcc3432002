"""Client-side download/playback simulation.

A client tunes into every channel at ``arrival`` and keeps the first copy of
each byte it sees.  Bytes stream linearly inside a transmission, so a client
that joins mid-transmission gets the tail of it.  Playback consumes the video
at rate 1 and pauses in place whenever the next byte has not arrived.

Everything here uses exact Fractions and serves as the reference path;
:func:`sweep_arrivals` delegates the per-arrival work to the integer kernel in
:mod:`harmonic_nvod.kernel` and is checked against this module in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import BroadcastSchedule, to_ratio

ZERO = Fraction(0)


class ArrivalError(ValueError):
    """Arrival time is not a sub-slot boundary."""


@dataclass(frozen=True)
class PlaybackPolicy:
    variant: str
    delay: Optional[Fraction] = None

    NEXT_SLOT = "next-slot"
    JOIN_PLUS_SLOT = "join-plus-slot"
    EARLIEST = "earliest"
    FIXED = "fixed"

    def __post_init__(self):
        if self.variant not in (self.NEXT_SLOT, self.JOIN_PLUS_SLOT, self.EARLIEST, self.FIXED):
            raise ValueError(f"unknown playback policy {self.variant!r}")
        if self.variant == self.FIXED:
            if self.delay is None or self.delay < 0:
                raise ValueError("fixed delay must be a non-negative ratio")

    @classmethod
    def next_slot(cls) -> "PlaybackPolicy":
        return cls(cls.NEXT_SLOT)

    @classmethod
    def join_plus_slot(cls) -> "PlaybackPolicy":
        return cls(cls.JOIN_PLUS_SLOT)

    @classmethod
    def earliest(cls) -> "PlaybackPolicy":
        return cls(cls.EARLIEST)

    @classmethod
    def fixed(cls, delay) -> "PlaybackPolicy":
        return cls(cls.FIXED, to_ratio(delay))

    @classmethod
    def parse(cls, text: str) -> "PlaybackPolicy":
        text = text.strip()
        if text.startswith("fixed:"):
            return cls.fixed(text[len("fixed:"):])
        return cls(text)

    def __str__(self) -> str:
        if self.variant == self.FIXED:
            return f"fixed:{self.delay}"
        return self.variant

    def start_time(self, arrival: Fraction, earliest: Fraction) -> Fraction:
        if self.variant == self.NEXT_SLOT:
            return Fraction(math.ceil(arrival))
        if self.variant == self.JOIN_PLUS_SLOT:
            return Fraction(math.ceil(arrival) + 1)
        if self.variant == self.EARLIEST:
            return earliest
        return arrival + self.delay


def default_policy(scheme: str) -> PlaybackPolicy:
    """Join-plus-one-slot for the fragment-interleaving schemes, next slot otherwise."""
    if scheme.upper() in ("AQHB", "QHB"):
        return PlaybackPolicy.join_plus_slot()
    return PlaybackPolicy.next_slot()


@dataclass(frozen=True)
class Piece:
    """Bytes ``[x0, x1)`` first received linearly between ``t0`` and ``t1``."""

    x0: Fraction
    x1: Fraction
    t0: Fraction
    t1: Fraction
    channel: int

    @property
    def rate(self) -> Fraction:
        return (self.x1 - self.x0) / (self.t1 - self.t0)

    def time_at(self, x: Fraction) -> Fraction:
        return self.t0 + (x - self.x0) / self.rate


@dataclass(frozen=True)
class AvailabilityCurve:
    arrival: Fraction
    pieces: tuple[Piece, ...]
    redundant_bytes: Fraction = ZERO

    @property
    def breakpoints(self) -> list[tuple[Fraction, Fraction]]:
        """(video_position, available_at) at every piece edge, right edges as left limits."""
        pts = []
        for p in self.pieces:
            pts.append((p.x0, p.t0))
            pts.append((p.x1, p.t1))
        return pts

    def at(self, x) -> Fraction:
        x = to_ratio(x)
        for p in self.pieces:
            if p.x0 <= x < p.x1:
                return p.time_at(x)
        raise ValueError(f"position {x} outside the video")

    @property
    def size(self) -> Fraction:
        return sum((p.x1 - p.x0 for p in self.pieces), ZERO)


def check_arrival(schedule: BroadcastSchedule, arrival) -> Fraction:
    arrival = to_ratio(arrival)
    if (arrival * schedule.params.m).denominator != 1:
        raise ArrivalError(f"arrival {arrival} is not a multiple of the sub-slot 1/{schedule.params.m}")
    return arrival


def _channel_ranges(txs) -> list[tuple[Fraction, Fraction]]:
    merged: list[tuple[Fraction, Fraction]] = []
    for lo, hi in sorted((t.video_offset, t.video_offset + t.length) for t in txs):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
        else:
            merged.append((lo, hi))
    return merged


def availability_curve(schedule: BroadcastSchedule, arrival) -> AvailabilityCurve:
    arrival = check_arrival(schedule, arrival)
    period = schedule.period
    pieces: list[Piece] = []
    redundant = ZERO
    for ch, txs in schedule.by_channel().items():
        uncovered = _channel_ranges(txs)
        # start one period back: a wrapped transmission may still be on air
        cycle = math.floor(arrival / period) - 1
        n = len(txs)
        idx = 0
        while txs[idx % n].end + (cycle + idx // n) * period <= arrival:
            idx += 1
        limit = idx + 2 * n + 1
        while uncovered:
            if idx >= limit:
                raise ValueError(f"channel {ch} never completes its data")
            t = txs[idx % n]
            start = t.start + (cycle + idx // n) * period
            idx += 1
            r0 = t.video_offset + max(ZERO, arrival - start) * t.rate
            r1 = t.video_offset + t.length
            new = ZERO
            last_end = r0
            rest = []
            for lo, hi in uncovered:
                a, b = max(lo, r0), min(hi, r1)
                if a < b:
                    pieces.append(
                        Piece(a, b, start + (a - t.video_offset) / t.rate, start + (b - t.video_offset) / t.rate, ch)
                    )
                    new += b - a
                    last_end = max(last_end, b)
                    if lo < a:
                        rest.append((lo, a))
                    if b < hi:
                        rest.append((b, hi))
                else:
                    rest.append((lo, hi))
            uncovered = rest
            heard = (last_end - r0) if not uncovered else (r1 - r0)
            redundant += heard - new if r0 < r1 else ZERO
    pieces.sort(key=lambda p: p.x0)
    return AvailabilityCurve(arrival, tuple(pieces), redundant)


def _latest_lag(curve: AvailabilityCurve) -> Fraction:
    return max(max(p.t0 - p.x0, p.t1 - p.x1) for p in curve.pieces)


def earliest_feasible_start(schedule: BroadcastSchedule, arrival) -> Fraction:
    curve = availability_curve(schedule, arrival)
    return max(curve.arrival, _latest_lag(curve))


@dataclass(frozen=True)
class ClientTrace:
    arrival: Fraction
    playback_start: Fraction
    stall_events: tuple[tuple[Fraction, Fraction], ...]
    total_stall: Fraction
    completion_time: Fraction
    max_buffer: Fraction
    redundant_bytes: Fraction
    useful_bytes: Fraction

    @property
    def startup_wait(self) -> Fraction:
        return self.playback_start - self.arrival


class _Playback:
    """Playback position as a function of time, given the curve and start time."""

    def __init__(self, curve: AvailabilityCurve, start: Fraction):
        self.curve = curve
        self.start = start
        self.lags = []  # running lag in force when each piece begins
        self.stalls: list[tuple[Fraction, Fraction]] = []
        self.stall_spans: list[tuple[Fraction, Fraction, Fraction, Fraction]] = []
        lag = start
        for p in curve.pieces:
            self.lags.append(lag)
            head, tail = p.t0 - p.x0, p.t1 - p.x1
            top = max(head, tail)
            if top > lag:
                if head > lag:
                    pos = p.x0
                else:
                    pos = p.x0 + (lag - head) / (1 / p.rate - 1)
                resume_pos = p.x1 if tail > head else p.x0
                self.stalls.append((pos, top - lag))
                self.stall_spans.append((pos + lag, pos, resume_pos + top, resume_pos))
                lag = top
        self.final_lag = lag

    @property
    def total_stall(self) -> Fraction:
        return self.final_lag - self.start

    def kinks(self) -> list[Fraction]:
        times = [self.start, self.curve.size + self.final_lag]
        for p, lag in zip(self.curve.pieces, self.lags):
            g = max(lag, p.t0 - p.x0)
            times += [p.x0 + lag, p.x0 + g, max(p.x1 + g, p.t1)]
            if p.rate != 1:
                # where playback catches up with the download inside the piece
                x = p.x0 + (g - (p.t0 - p.x0)) / (1 / p.rate - 1)
                if p.x0 < x < p.x1:
                    times.append(x + g)
        return times

    def consumed(self, t: Fraction) -> Fraction:
        pos = ZERO
        for p, lag in zip(self.curve.pieces, self.lags):
            g = max(lag, p.t0 - p.x0)
            if max(p.x1 + g, p.t1) <= t:
                pos = p.x1
                continue
            if p.x0 + g > t:
                return p.x0
            x = min(t - g, p.x0 + (t - p.t0) * p.rate)
            return min(max(x, p.x0), p.x1)
        return pos


def _received(curve: AvailabilityCurve, t: Fraction) -> Fraction:
    total = ZERO
    for p in curve.pieces:
        if t >= p.t1:
            total += p.x1 - p.x0
        elif t > p.t0:
            total += (t - p.t0) * p.rate
    return total


def _buffer_at(curve: AvailabilityCurve, play: _Playback, t: Fraction) -> Fraction:
    return _received(curve, t) - play.consumed(t)


def simulate_client(schedule: BroadcastSchedule, arrival, policy: PlaybackPolicy) -> ClientTrace:
    curve = availability_curve(schedule, arrival)
    earliest = max(curve.arrival, _latest_lag(curve))
    start = policy.start_time(curve.arrival, earliest)
    play = _Playback(curve, start)
    times = set(play.kinks())
    for p in curve.pieces:
        times.add(p.t0)
        times.add(p.t1)
    max_buffer = max((_buffer_at(curve, play, t) for t in times if t >= curve.arrival), default=ZERO)
    size = curve.size
    return ClientTrace(
        arrival=curve.arrival,
        playback_start=start,
        stall_events=tuple(play.stalls),
        total_stall=play.total_stall,
        completion_time=start + size + play.total_stall,
        max_buffer=max(max_buffer, ZERO),
        redundant_bytes=curve.redundant_bytes,
        useful_bytes=size,
    )


def trace_events(schedule: BroadcastSchedule, arrival, policy: PlaybackPolicy) -> list[tuple[Fraction, str, Fraction, Fraction]]:
    """Event log (time, event, video_position, buffer) for one client session.

    Between a ``stall`` and its ``resume`` playback is held to the download
    front, so the position can advance slowly before normal speed returns.
    """
    curve = availability_curve(schedule, arrival)
    earliest = max(curve.arrival, _latest_lag(curve))
    start = policy.start_time(curve.arrival, earliest)
    play = _Playback(curve, start)
    events = [(curve.arrival, "arrival", ZERO)]
    for seg in range(1, schedule.params.N + 1):
        ready = max(p.t1 for p in curve.pieces if seg - 1 <= p.x0 < seg)
        events.append((ready, f"segment_{seg}_ready", Fraction(seg - 1)))
    events.append((start, "play", ZERO))
    for t_stall, pos, t_resume, resume_pos in play.stall_spans:
        events.append((t_stall, "stall", pos))
        events.append((t_resume, "resume", resume_pos))
    events.append((start + curve.size + play.total_stall, "end", curve.size))
    order = {"arrival": 0, "stall": 1, "resume": 2, "play": 3, "end": 5}
    events.sort(key=lambda e: (e[0], order.get(e[1], 4), e[2]))
    return [(t, name, pos, _buffer_at(curve, play, t)) for t, name, pos in events]


@dataclass(frozen=True)
class SweepSummary:
    scheme_tag: str
    policy: str
    arrivals_checked: int
    max_total_stall: Fraction
    max_startup_wait: Fraction
    max_buffer_over_arrivals: Fraction
    worst_arrival: Fraction
    max_extra_delay: Fraction
    max_earliest_wait: Fraction
    mean_max_buffer: Fraction
    max_redundant_bytes: Fraction
    backend: str = "python"


def sweep_arrivals(
    schedule: BroadcastSchedule,
    policy: PlaybackPolicy | None = None,
    parallel: bool = True,
    workers: int | None = None,
    backend: str | None = None,
) -> SweepSummary:
    """Simulate a client for every sub-slot boundary in one hyperperiod and aggregate.

    ``max_extra_delay`` is the largest gap between the earliest stall-free
    start and the next slot boundary; ``worst_arrival`` is the lowest arrival
    attaining ``max_total_stall``.
    """
    from . import kernel

    if policy is None:
        policy = default_policy(schedule.scheme_tag)
    rows, used = kernel.sweep_schedule(schedule, policy, parallel=parallel, workers=workers, backend=backend)
    m = schedule.params.m
    worst_stall, worst_arrival = None, ZERO
    max_wait = max_buf = max_extra = max_early = max_red = None
    buf_sum = ZERO
    for q, r in enumerate(rows):
        arrival = Fraction(q, m)
        if worst_stall is None or r.stall > worst_stall:
            worst_stall, worst_arrival = r.stall, arrival
        wait = r.start - arrival
        extra = r.earliest - math.ceil(arrival)
        early = r.earliest - arrival
        max_wait = wait if max_wait is None else max(max_wait, wait)
        max_buf = r.buffer if max_buf is None else max(max_buf, r.buffer)
        max_extra = extra if max_extra is None else max(max_extra, extra)
        max_early = early if max_early is None else max(max_early, early)
        max_red = r.redundant if max_red is None else max(max_red, r.redundant)
        buf_sum += r.buffer
    return SweepSummary(
        scheme_tag=schedule.scheme_tag,
        policy=str(policy),
        arrivals_checked=len(rows),
        max_total_stall=worst_stall,
        max_startup_wait=max_wait,
        max_buffer_over_arrivals=max_buf,
        worst_arrival=worst_arrival,
        max_extra_delay=max_extra,
        max_earliest_wait=max_early,
        mean_max_buffer=buf_sum / len(rows),
        max_redundant_bytes=max_red,
        backend=used,
    )
