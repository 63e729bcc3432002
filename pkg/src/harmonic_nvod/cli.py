"""Command-line entry point: ``harmonic-nvod {schedule,verify,report}``.

Machine formats (csv, json) print every number as an exact ``num/den``
(or an integer); ``table`` is for humans and rounds to six decimals.
Exit codes: 0 ok / verified, 1 verification failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import metrics
from .client_sim import ArrivalError, PlaybackPolicy, default_policy, simulate_client, sweep_arrivals, trace_events
from .core import SCHEMES, ParamError, VideoParams, make_params, schedule_from_json, schedule_to_json, to_ratio
from .schemes import build, resolve_qhb_bases

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    scheme: str
    N: list[int]
    m: int
    T: Fraction
    b: Fraction
    policy: PlaybackPolicy | None
    output_format: str
    output_path: str | None
    parallel: bool
    arrival: Fraction

    def params(self, N: int | None = None) -> VideoParams:
        return make_params(self.T, self.b, self.single_N if N is None else N, self.m)

    @property
    def single_N(self) -> int:
        if len(self.N) != 1:
            raise UsageError("this command takes a single --segments value, not a range")
        return self.N[0]

    def policy_for(self, scheme: str) -> PlaybackPolicy:
        return self.policy or default_policy(scheme)


# -- rendering ----------------------------------------------------------------------

def fmt_exact(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return str(v)


def fmt_human(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{float(v):.6f}"
    return fmt_exact(v)


def render(rows: list[dict], columns: list[str], fmt: str) -> str:
    if fmt == "json":
        data = [{c: fmt_exact(r.get(c)) for c in columns} for r in rows]
        return json.dumps(data, indent=1) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt_exact(r.get(c)) for c in columns])
        return buf.getvalue()
    cells = [[fmt_human(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


def emit(text: str, cfg: RunConfig) -> None:
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        sys.stdout.write(text)


# -- argument parsing ---------------------------------------------------------------

def parse_segments(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split("..", 1))
            if lo > hi:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise UsageError(f"--segments expects an integer or a range like 1..5, got {text!r}") from None


def _ratio_arg(name: str, text: str) -> Fraction:
    try:
        return to_ratio(text)
    except (ValueError, ZeroDivisionError, TypeError):
        raise UsageError(f"{name} expects an exact number like 120 or 3/2, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scheme", type=str.upper, choices=SCHEMES, default="AQHB",
                        metavar="{hb,chb,qhb,ahb,aqhb}")
    common.add_argument("--segments", default="5", help="N, or a range such as 1..5")
    common.add_argument("--m", type=int, default=4, help="sub-slots per slot")
    common.add_argument("--length", default="120", help="video length T in display time units")
    common.add_argument("--rate", default="1", help="playback rate b")
    common.add_argument("--arrival", default="0", help="client arrival time in display units")
    common.add_argument("--policy", default=None,
                        help="next-slot | join-plus-slot | earliest | fixed:<num/den> (slots)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json", "table"), default="table")
    common.add_argument("--out", default=None)
    common.add_argument("--no-parallel", dest="parallel", action="store_false")

    p = argparse.ArgumentParser(
        prog="harmonic-nvod", description="Build, verify and report on harmonic-family broadcast schedules.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("schedule", parents=[common], help="build and export one hyperperiod")
    sp.add_argument("--from", dest="source", default=None, help="re-export a schedule JSON file")
    sub.add_parser("verify", parents=[common], help="sweep every arrival and check continuity")
    rp = sub.add_parser("report", parents=[common], help="figure/table data and client traces")
    rp.add_argument("which", choices=("fig6", "fig7", "table1", "client-trace"))
    return p


def make_config(ns: argparse.Namespace) -> RunConfig:
    try:
        policy = PlaybackPolicy.parse(ns.policy) if ns.policy else None
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"--policy: {exc}") from None
    return RunConfig(
        scheme=ns.scheme,
        N=parse_segments(ns.segments),
        m=ns.m,
        T=_ratio_arg("--length", ns.length),
        b=_ratio_arg("--rate", ns.rate),
        policy=policy,
        output_format=ns.fmt,
        output_path=ns.out,
        parallel=ns.parallel,
        arrival=_ratio_arg("--arrival", ns.arrival),
    )


# -- commands -----------------------------------------------------------------------

SCHEDULE_COLUMNS = ["channel", "slot", "subslot", "segment", "fragment",
                    "rate_num", "rate_den", "start_num", "start_den"]


def schedule_rows(schedule) -> list[dict]:
    m = schedule.params.m
    rows = []
    for t in schedule.transmissions:
        slot = math.floor(t.start)
        rows.append({
            "channel": t.channel,
            "slot": slot,
            "subslot": math.floor((t.start - slot) * m),
            "segment": t.segment,
            "fragment": t.fragment,
            "rate_num": t.rate.numerator,
            "rate_den": t.rate.denominator,
            "start_num": t.start.numerator,
            "start_den": t.start.denominator,
        })
    return rows


def cmd_schedule(cfg: RunConfig, source: str | None = None) -> int:
    if source:
        sched = schedule_from_json(Path(source).read_text(), cfg.T, cfg.b)
    else:
        sched = build(cfg.scheme, cfg.params())
    if cfg.output_format == "json":
        emit(schedule_to_json(sched), cfg)
    else:
        emit(render(schedule_rows(sched), SCHEDULE_COLUMNS, cfg.output_format), cfg)
    return EXIT_OK


def _summary_rows(params: VideoParams, summary, extra: list[tuple[str, object]]) -> list[dict]:
    slot = params.slot_length
    fields = [
        ("scheme", summary.scheme_tag),
        ("N", params.N),
        ("m", params.m),
        ("policy", summary.policy),
        ("arrivals_checked", summary.arrivals_checked),
        ("max_total_stall", summary.max_total_stall * slot),
        ("worst_arrival", summary.worst_arrival * slot),
        ("max_startup_wait", summary.max_startup_wait * slot),
        ("max_earliest_wait", summary.max_earliest_wait * slot),
        ("max_extra_delay", summary.max_extra_delay * slot),
        ("max_buffer", params.to_display_data(summary.max_buffer_over_arrivals)),
        ("mean_max_buffer", params.to_display_data(summary.mean_max_buffer)),
        ("max_redundant_bytes", params.to_display_data(summary.max_redundant_bytes)),
        ("verified", summary.max_total_stall == 0),
    ] + extra
    return [{"field": k, "value": v} for k, v in fields]


def cmd_verify(cfg: RunConfig) -> int:
    params = cfg.params()
    sched = build(cfg.scheme, params)
    policy = cfg.policy_for(cfg.scheme)
    summary = sweep_arrivals(sched, policy, parallel=cfg.parallel)
    extra: list[tuple[str, object]] = []
    if summary.max_total_stall > 0:
        trace = simulate_client(sched, summary.worst_arrival, policy)
        stalls = "; ".join(
            f"{fmt_exact(params.to_display_data(pos))}:{fmt_exact(d * params.slot_length)}"
            for pos, d in trace.stall_events
        )
        extra.append(("stall_positions", stalls))
    if cfg.scheme == "QHB":
        res = resolve_qhb_bases(params, parallel=cfg.parallel)
        extra.append(("qhb_index_bases", f"{res.adopted[0]},{res.adopted[1]}"))
        extra.append(("qhb_discrepancy", res.discrepancy or ""))
        if res.discrepancy:
            print(f"warning: {res.discrepancy}", file=sys.stderr)
    emit(render(_summary_rows(params, summary, extra), ["field", "value"], cfg.output_format), cfg)
    return EXIT_OK if summary.max_total_stall == 0 else EXIT_FAIL


def report_fig6(cfg: RunConfig) -> str:
    if len(cfg.N) > 1:
        rows = metrics.figure6_by_n(cfg.N, cfg.m, cfg.b)
        return render(rows, ["N", "scheme", "average_rate", "peak_rate"], cfg.output_format)
    rows = metrics.figure6_over_time(cfg.single_N, cfg.m, cfg.T, cfg.b)
    return render(rows, ["scheme", "start", "end", "rate"], cfg.output_format)


def report_fig7(cfg: RunConfig) -> str:
    rows = metrics.figure7_rows(cfg.T, cfg.N, cfg.m, parallel=cfg.parallel)
    cols = ["N", "hb_wait", "hb_measured", "chb_wait", "qhb_wait", "ahb_wait", "aqhb_wait", "note"]
    return render(rows, cols, cfg.output_format)


def report_table1(cfg: RunConfig) -> str:
    rows = []
    for r in metrics.table1_relations(cfg.params(), parallel=cfg.parallel):
        rows.append({
            "criterion": r.criterion,
            "pair": "/".join(r.scheme_pair),
            "relation": r.relation,
            "expected": r.expected,
            "status": "match" if r.matches else "DISCREPANCY",
            "measured": " ".join(fmt_exact(v) for v in r.measured_values),
        })
    return render(rows, ["criterion", "pair", "relation", "expected", "status", "measured"], cfg.output_format)


def report_trace(cfg: RunConfig) -> str:
    params = cfg.params()
    sched = build(cfg.scheme, params)
    # arrivals between sub-slot boundaries behave like the next boundary
    arrival = Fraction(math.ceil(cfg.arrival / params.slot_length * params.m), params.m)
    rows = [
        {
            "time": params.to_display_time(t),
            "event": name,
            "video_position": params.to_display_data(pos),
            "buffer": params.to_display_data(buf),
        }
        for t, name, pos, buf in trace_events(sched, arrival, cfg.policy_for(cfg.scheme))
    ]
    return render(rows, ["time", "event", "video_position", "buffer"], cfg.output_format)


REPORTS = {"fig6": report_fig6, "fig7": report_fig7, "table1": report_table1, "client-trace": report_trace}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = make_config(ns)
        if ns.command == "schedule":
            return cmd_schedule(cfg, ns.source)
        if ns.command == "verify":
            return cmd_verify(cfg)
        emit(REPORTS[ns.which](cfg), cfg)
        return EXIT_OK
    except (UsageError, ParamError, ArrivalError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"harmonic-nvod: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
