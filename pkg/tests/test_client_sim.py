from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from harmonic_nvod import kernel
from harmonic_nvod.client_sim import (
    ArrivalError,
    PlaybackPolicy,
    availability_curve,
    default_policy,
    earliest_feasible_start,
    simulate_client,
    sweep_arrivals,
    trace_events,
)
from harmonic_nvod.core import make_params
from harmonic_nvod.schemes import build

POLICIES = [PlaybackPolicy.next_slot(), PlaybackPolicy.join_plus_slot(),
            PlaybackPolicy.earliest(), PlaybackPolicy.fixed("1/3")]


def sched(scheme, N, m=4):
    return build(scheme, make_params(T=120, b=1, N=N, m=m))


# -- policies ---------------------------------------------------------------------------

def test_policy_parse_round_trip():
    for text in ("next-slot", "join-plus-slot", "earliest", "fixed:3/4"):
        assert str(PlaybackPolicy.parse(text)) == text
    with pytest.raises(ValueError):
        PlaybackPolicy.parse("fixed:-1")
    with pytest.raises(ValueError):
        PlaybackPolicy.parse("whenever")


def test_policy_start_times():
    a, e = Fraction(5, 4), Fraction(3)
    assert PlaybackPolicy.next_slot().start_time(a, e) == 2
    assert PlaybackPolicy.join_plus_slot().start_time(a, e) == 3
    assert PlaybackPolicy.earliest().start_time(a, e) == 3
    assert PlaybackPolicy.fixed(1).start_time(a, e) == Fraction(9, 4)


def test_default_policies():
    assert default_policy("aqhb").variant == "join-plus-slot"
    assert default_policy("QHB").variant == "join-plus-slot"
    for s in ("HB", "CHB", "AHB"):
        assert default_policy(s).variant == "next-slot"


# -- availability ----------------------------------------------------------------------

def test_single_segment_streams_at_playback_rate():
    c = availability_curve(sched("HB", 1), 0)
    for x in (0, Fraction(1, 3), Fraction(9, 10)):
        assert c.at(x) == x


def test_hb_second_half_before_first_half():
    c = availability_curve(sched("HB", 3), 1)
    assert c.at(Fraction(3, 2)) < c.at(1)


def test_aqhb_segment2_by_slot3():
    c = availability_curve(sched("AQHB", 3, 2), 1)
    assert max(p.t1 for p in c.pieces if 1 <= p.x0 < 2) <= 3


def test_off_grid_arrival_rejected():
    with pytest.raises(ArrivalError):
        availability_curve(sched("AQHB", 3, 2), Fraction(1, 3))


def test_mid_transmission_join_keeps_tail_only():
    # arriving halfway through slot 0 of channel 1 in HB N=1
    c = availability_curve(sched("HB", 1, 2), Fraction(1, 2))
    assert c.at(Fraction(3, 4)) == Fraction(3, 4)
    assert c.at(Fraction(1, 4)) == Fraction(5, 4)


# -- earliest start and simulation -----------------------------------------------------

def test_earliest_start_examples():
    assert earliest_feasible_start(sched("HB", 1), 0) == 0
    assert earliest_feasible_start(sched("HB", 3), 1) > 1


def test_aqhb_earliest_within_one_slot():
    for N, m in [(3, 2), (4, 4), (5, 3)]:
        assert sweep_arrivals(sched("AQHB", N, m), PlaybackPolicy.earliest()).max_earliest_wait <= 1


def test_simulate_examples():
    assert simulate_client(sched("HB", 3), 1, PlaybackPolicy.next_slot()).total_stall > 0
    assert simulate_client(sched("AQHB", 3, 2), 1, PlaybackPolicy.join_plus_slot()).total_stall == 0
    chb = sched("CHB", 4)
    for q in range(chb.hyperperiod_slots * 4):
        assert simulate_client(chb, Fraction(q, 4), PlaybackPolicy.next_slot()).total_stall == 0


def test_sweep_examples():
    assert sweep_arrivals(sched("HB", 5), PlaybackPolicy.next_slot()).max_total_stall > 0
    assert sweep_arrivals(sched("AHB", 4), PlaybackPolicy.next_slot()).max_total_stall == 0


def test_qhb_needs_the_extra_slot_with_four_subslots():
    s = sched("QHB", 4, 4)
    assert sweep_arrivals(s, PlaybackPolicy.next_slot()).max_total_stall > 0
    assert sweep_arrivals(s, PlaybackPolicy.join_plus_slot()).max_total_stall == 0
    assert sweep_arrivals(sched("QHB", 4, 2), PlaybackPolicy.next_slot()).max_total_stall == 0


def test_sweep_counts_every_subslot():
    s = sched("AQHB", 4, 3)
    assert sweep_arrivals(s).arrivals_checked == s.hyperperiod_slots * 3


def test_worst_arrival_tie_break_is_lowest():
    s = sched("HB", 3)
    summary = sweep_arrivals(s, PlaybackPolicy.next_slot())
    stalls = [simulate_client(s, Fraction(q, 4), PlaybackPolicy.next_slot()).total_stall
              for q in range(s.hyperperiod_slots * 4)]
    assert summary.worst_arrival == Fraction(stalls.index(max(stalls)), 4)


def test_trace_events_shape():
    ev = trace_events(sched("HB", 3), 1, PlaybackPolicy.next_slot())
    names = [e[1] for e in ev]
    assert names[0] == "arrival" and names[-1] == "end"
    assert "stall" in names and "resume" in names
    assert sum(n.startswith("segment_") for n in names) == 3
    assert ev[-1][3] == 0
    assert [e[0] for e in ev] == sorted(e[0] for e in ev)


# -- kernels against the exact reference -----------------------------------------------

CASES = [(s, N, m) for s in ("HB", "CHB", "QHB", "AHB", "AQHB") for N in (3, 4) for m in (2, 3)]


@pytest.mark.parametrize("scheme, N, m", CASES + [("AHB", 5, 1), ("HB", 5, 2)])
@pytest.mark.parametrize("policy", POLICIES, ids=str)
def test_python_kernel_matches_reference(scheme, N, m, policy):
    s = sched(scheme, N, m)
    py, _ = kernel.sweep_schedule(s, policy, backend="python")
    ref, _ = kernel.sweep_schedule(s, policy, backend="reference")
    assert py == ref


@pytest.mark.skipif(not kernel.HAVE_COMPILED, reason="compiled kernel not built")
@pytest.mark.parametrize("scheme, N, m", CASES + [("CHB", 5, 3), ("QHB", 5, 3), ("QHB", 6, 4), ("AQHB", 6, 4), ("AHB", 6, 1)])
@pytest.mark.parametrize("policy", POLICIES, ids=str)
def test_compiled_kernel_matches_python(scheme, N, m, policy):
    s = sched(scheme, N, m)
    c, used = kernel.sweep_schedule(s, policy, backend="compiled")
    py, _ = kernel.sweep_schedule(s, policy, backend="python")
    assert used == "compiled"
    assert c == py


def test_parallel_sweep_is_deterministic():
    s = sched("AQHB", 6, 4)
    a = sweep_arrivals(s, parallel=True, workers=4)
    b = sweep_arrivals(s, parallel=False)
    assert a == b


def test_grid_error_falls_back_to_reference(monkeypatch):
    from harmonic_nvod import _kernel_py

    def refuse(*args):
        raise _kernel_py.GridError("off grid")

    s = sched("HB", 3, 2)
    monkeypatch.setattr(_kernel_py, "sweep", refuse)
    rows, used = kernel.sweep_schedule(s, PlaybackPolicy.earliest(), backend="python")
    assert used == "reference"
    assert rows == kernel.sweep_schedule(s, PlaybackPolicy.earliest(), backend="reference")[0]


@pytest.mark.skipif(not kernel.HAVE_COMPILED, reason="compiled kernel not built")
def test_overflow_falls_back_to_python(monkeypatch):
    def overflow(*args):
        raise OverflowError

    monkeypatch.setattr(kernel._ckernel, "sweep", overflow)
    rows, used = kernel.sweep_schedule(sched("AHB", 4), PlaybackPolicy.next_slot(), backend="compiled")
    assert used == "python"
    assert rows == kernel.sweep_schedule(sched("AHB", 4), PlaybackPolicy.next_slot(), backend="python")[0]


def test_exact_division_guard():
    from harmonic_nvod._kernel_py import GridError, _exact

    assert _exact(12, 4) == 3
    with pytest.raises(GridError):
        _exact(7, 2)


# -- properties -------------------------------------------------------------------------

@st.composite
def session(draw, max_N=5):
    scheme = draw(st.sampled_from(["HB", "CHB", "QHB", "AHB", "AQHB"]))
    N = draw(st.integers(3 if scheme == "CHB" else 1, max_N))
    m = draw(st.integers(2 if scheme == "QHB" else 1, 4))
    s = sched(scheme, N, m)
    q = draw(st.integers(0, 2 * s.hyperperiod_slots * m - 1))
    return s, Fraction(q, m)


@settings(max_examples=60, deadline=None)
@given(session())
def test_oracle_consistency(case):
    s, a = case
    efs = earliest_feasible_start(s, a)
    delay = efs - a
    assert simulate_client(s, a, PlaybackPolicy.fixed(delay)).total_stall == 0
    if delay > 0:
        eps = min(Fraction(1, s.params.m), delay)
        assert simulate_client(s, a, PlaybackPolicy.fixed(delay - eps)).total_stall > 0


@settings(max_examples=60, deadline=None)
@given(session(), st.sampled_from(POLICIES))
def test_conservation(case, policy):
    s, a = case
    tr = simulate_client(s, a, policy)
    N = s.params.N
    assert tr.useful_bytes == N
    assert tr.redundant_bytes >= 0
    assert tr.total_stall == sum(d for _, d in tr.stall_events)
    assert tr.completion_time == tr.playback_start + N + tr.total_stall
    assert 0 <= tr.max_buffer <= N


@settings(max_examples=40, deadline=None)
@given(session(), st.sampled_from(POLICIES))
def test_periodicity(case, policy):
    s, a = case
    P = s.period
    t1, t2 = simulate_client(s, a, policy), simulate_client(s, a + P, policy)
    assert t2.playback_start - t1.playback_start == P
    assert t2.completion_time - t1.completion_time == P
    assert (t1.stall_events, t1.max_buffer, t1.redundant_bytes) == (t2.stall_events, t2.max_buffer, t2.redundant_bytes)
    c1, c2 = availability_curve(s, a), availability_curve(s, a + P)
    assert [(p.x0, p.x1, p.t0 + P, p.t1 + P) for p in c1.pieces] == [(p.x0, p.x1, p.t0, p.t1) for p in c2.pieces]


@settings(max_examples=40, deadline=None)
@given(session(), st.data())
def test_availability_monotone_in_arrival(case, data):
    s, a = case
    m = s.params.m
    earlier = a - Fraction(data.draw(st.integers(0, int(a * m))), m)
    late, early = availability_curve(s, a), availability_curve(s, earlier)
    xs = {p.x0 for p in late.pieces} | {p.x0 for p in early.pieces}
    xs |= {(p.x0 + p.x1) / 2 for p in late.pieces}
    for x in xs:
        assert early.at(x) <= late.at(x)


@pytest.mark.parametrize("N", range(2, 9))
def test_hb_repair_bound(N):
    summary = sweep_arrivals(sched("HB", N, 2), PlaybackPolicy.next_slot())
    assert 0 < summary.max_extra_delay <= 1
