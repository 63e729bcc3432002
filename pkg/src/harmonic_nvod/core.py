"""Exact quantities, video parameters and the periodic schedule model.

All scheduling happens in canonical units: one slot (the playback time of one
segment) is one time unit and the playback rate is one data unit per time
unit, so a video of ``N`` segments is ``N`` data units long.  Display units
(minutes, Mbit/s, ...) only appear at the edges via :class:`VideoParams`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Union

Ratio = Fraction

RatioLike = Union[Fraction, int, str]

SCHEMES = ("HB", "CHB", "QHB", "AHB", "AQHB")


class ParamError(ValueError):
    """Raised when video parameters or a scheme configuration are invalid."""


def to_ratio(value: RatioLike) -> Fraction:
    """Coerce ints, Fractions and ``"num/den"`` strings to an exact Ratio.

    Floats are rejected: they would smuggle rounding into the core.
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"exact value required, got {value!r}")
    if isinstance(value, str):
        value = value.strip()
    return Fraction(value)


def harmonic(n: int) -> Fraction:
    """Return the n-th harmonic number 1 + 1/2 + ... + 1/n exactly."""
    if n < 1:
        raise ValueError(f"harmonic number undefined for n={n}")
    return sum((Fraction(1, i) for i in range(1, n + 1)), Fraction(0))


def lcm_range(lo: int, hi: int) -> int:
    """lcm(lo, lo+1, ..., hi); 1 for an empty range."""
    return lcm(*range(lo, hi + 1)) if hi >= lo else 1


@dataclass(frozen=True)
class VideoParams:
    duration_T: Fraction
    playback_rate_b: Fraction
    num_segments_N: int
    subslots_m: int

    @property
    def N(self) -> int:
        return self.num_segments_N

    @property
    def m(self) -> int:
        return self.subslots_m

    @property
    def slot_length(self) -> Fraction:
        """Slot length in display time units (T/N)."""
        return self.duration_T / self.num_segments_N

    @property
    def video_size(self) -> Fraction:
        """Video size in display data units (T*b)."""
        return self.duration_T * self.playback_rate_b

    @property
    def canonical_size(self) -> Fraction:
        return Fraction(self.num_segments_N)

    def to_display_time(self, t: Fraction) -> Fraction:
        return t * self.slot_length

    def to_display_data(self, x: Fraction) -> Fraction:
        return x * self.slot_length * self.playback_rate_b

    def to_display_rate(self, r: Fraction) -> Fraction:
        return r * self.playback_rate_b


def make_params(T: RatioLike = 120, b: RatioLike = 1, N: int = 1, m: int = 4) -> VideoParams:
    T = to_ratio(T)
    b = to_ratio(b)
    if T <= 0:
        raise ParamError(f"duration_T must be > 0, got {T}")
    if b <= 0:
        raise ParamError(f"playback_rate_b must be > 0, got {b}")
    if not isinstance(N, int) or N < 1:
        raise ParamError(f"num_segments_N must be an integer >= 1, got {N!r}")
    if not isinstance(m, int) or m < 1:
        raise ParamError(f"subslots_m must be an integer >= 1, got {m!r}")
    return VideoParams(T, b, N, m)


@dataclass(frozen=True)
class Transmission:
    """One channel sending ``length`` bytes starting at ``video_offset``.

    The bytes stream linearly: byte ``video_offset + u`` goes out at
    ``start + u / rate``.
    """

    channel: int
    start: Fraction
    duration: Fraction
    video_offset: Fraction
    length: Fraction
    rate: Fraction

    @property
    def end(self) -> Fraction:
        return self.start + self.duration

    @property
    def segment(self) -> int:
        """1-based index of the segment holding the first byte."""
        return int(self.video_offset) + 1

    @property
    def fragment(self) -> Fraction:
        """1-based fragment index within the segment, measured in units of ``length``."""
        return (self.video_offset - (self.segment - 1)) / self.length + 1


@dataclass(frozen=True)
class BroadcastSchedule:
    params: VideoParams
    scheme_tag: str
    hyperperiod_slots: int
    transmissions: tuple[Transmission, ...] = field(repr=False)

    @property
    def period(self) -> Fraction:
        return Fraction(self.hyperperiod_slots)

    @property
    def channels(self) -> list[int]:
        return sorted({t.channel for t in self.transmissions})

    def by_channel(self) -> dict[int, list[Transmission]]:
        out: dict[int, list[Transmission]] = {}
        for t in self.transmissions:
            out.setdefault(t.channel, []).append(t)
        for lst in out.values():
            lst.sort(key=lambda t: t.start)
        return out

    def bytes_per_hyperperiod(self, channel: int | None = None) -> Fraction:
        return sum(
            (t.length for t in self.transmissions if channel is None or t.channel == channel),
            Fraction(0),
        )


@dataclass(frozen=True)
class Violation:
    rule: str
    channel: int | None
    time: Fraction | None
    detail: str

    def __str__(self) -> str:
        where = []
        if self.channel is not None:
            where.append(f"channel {self.channel}")
        if self.time is not None:
            where.append(f"t={self.time}")
        loc = ", ".join(where) or "schedule"
        return f"[{self.rule}] {loc}: {self.detail}"


def _merge(intervals: Iterable[tuple[Fraction, Fraction]]) -> list[tuple[Fraction, Fraction]]:
    merged: list[tuple[Fraction, Fraction]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            if hi > merged[-1][1]:
                merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return merged


def schedule_validate(s: BroadcastSchedule) -> list[Violation]:
    """Check the schedule invariants; an empty list means the schedule is sound."""
    out: list[Violation] = []
    size = s.params.canonical_size
    period = s.period
    if s.scheme_tag not in SCHEMES:
        out.append(Violation("scheme", None, None, f"unknown scheme {s.scheme_tag!r}"))
    if s.hyperperiod_slots < 1:
        out.append(Violation("hyperperiod", None, None, "hyperperiod_slots must be >= 1"))
        return out

    for t in s.transmissions:
        if t.duration <= 0 or t.length <= 0 or t.rate <= 0:
            out.append(Violation("positive", t.channel, t.start, "duration, length and rate must be > 0"))
            continue
        if not 0 <= t.start < period:
            out.append(Violation("window", t.channel, t.start, f"start outside [0, {period})"))
        if t.rate * t.duration != t.length:
            out.append(
                Violation("conservation", t.channel, t.start,
                          f"rate*duration={t.rate * t.duration} != length={t.length}")
            )
        if t.video_offset < 0 or t.video_offset + t.length > size:
            out.append(
                Violation("bounds", t.channel, t.start,
                          f"bytes [{t.video_offset}, {t.video_offset + t.length}) outside [0, {size})")
            )

    for ch, lst in s.by_channel().items():
        for a, b in zip(lst, lst[1:]):
            if a.end > b.start:
                out.append(Violation("overlap", ch, b.start, f"overlaps transmission starting at {a.start}"))
        if len(lst) > 1 and lst[-1].end > lst[0].start + period:
            out.append(Violation("overlap", ch, lst[0].start, "wraps into the next hyperperiod's first transmission"))

    covered = _merge((t.video_offset, t.video_offset + t.length) for t in s.transmissions if t.length > 0)
    cursor = Fraction(0)
    gaps = []
    for lo, hi in covered:
        if lo > cursor:
            gaps.append((cursor, lo))
        cursor = max(cursor, hi)
    if cursor < size:
        gaps.append((cursor, size))
    for lo, hi in gaps:
        out.append(
            Violation("coverage", None, None,
                      f"bytes [{lo}, {hi}) of segment {int(lo) + 1} never broadcast in one hyperperiod")
        )
    return out


# -- JSON schedule format -------------------------------------------------------

def _rat(x: Fraction) -> dict:
    return {"num": x.numerator, "den": x.denominator}


def _unrat(d: dict) -> Fraction:
    if d["den"] <= 0:
        raise ValueError(f"bad denominator in {d!r}")
    return Fraction(d["num"], d["den"])


def schedule_to_dict(s: BroadcastSchedule) -> dict:
    return {
        "scheme": s.scheme_tag,
        "N": s.params.N,
        "m": s.params.m,
        "hyperperiod_slots": s.hyperperiod_slots,
        "transmissions": [
            {
                "channel": t.channel,
                "start": _rat(t.start),
                "duration": _rat(t.duration),
                "offset": _rat(t.video_offset),
                "length": _rat(t.length),
                "rate": _rat(t.rate),
            }
            for t in s.transmissions
        ],
    }


def schedule_from_dict(d: dict, T: RatioLike = 120, b: RatioLike = 1) -> BroadcastSchedule:
    params = make_params(T, b, int(d["N"]), int(d["m"]))
    txs = tuple(
        Transmission(
            channel=int(t["channel"]),
            start=_unrat(t["start"]),
            duration=_unrat(t["duration"]),
            video_offset=_unrat(t["offset"]),
            length=_unrat(t["length"]),
            rate=_unrat(t["rate"]),
        )
        for t in d["transmissions"]
    )
    return BroadcastSchedule(params, str(d["scheme"]), int(d["hyperperiod_slots"]), txs)


def schedule_to_json(s: BroadcastSchedule) -> str:
    """Serialize to the byte-deterministic JSON layout (one transmission per line)."""
    d = schedule_to_dict(s)
    head = {k: d[k] for k in ("scheme", "N", "m", "hyperperiod_slots")}
    lines = [json.dumps(head, separators=(",", ":"))[:-1] + ',"transmissions":[']
    rows = [json.dumps(t, separators=(",", ":")) for t in d["transmissions"]]
    lines.append(",\n".join(rows))
    lines.append("]}")
    return "\n".join(lines) + "\n"


def schedule_from_json(text: str, T: RatioLike = 120, b: RatioLike = 1) -> BroadcastSchedule:
    return schedule_from_dict(json.loads(text), T, b)
