from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from harmonic_nvod.core import ParamError, harmonic, make_params
from harmonic_nvod.metrics import bandwidth_profile
from harmonic_nvod.schemes import (
    ahb_problematic,
    aqhb_matrix,
    build,
    build_chb,
    build_qhb,
    fragments,
    qhb_fragment_index,
    resolve_qhb_bases,
)


def params(N, m=4):
    return make_params(T=120, b=1, N=N, m=m)


def channel_txs(s, ch):
    return [t for t in s.transmissions if t.channel == ch]


# -- HB / CHB --------------------------------------------------------------------------

def test_hb_channel2_first_half_at_half_rate():
    t = [t for t in channel_txs(build("HB", params(3)), 2) if t.start == 0][0]
    assert (t.video_offset, t.length, t.rate) == (1, Fraction(1, 2), Fraction(1, 2))


def test_hb_single_segment():
    s = build("HB", params(1))
    assert s.channels == [1] and s.hyperperiod_slots == 1
    assert s.transmissions[0].rate == 1


def test_hb_total_rate_three_segments():
    assert bandwidth_profile(build("HB", params(3))).pieces == ((0, 6, Fraction(11, 6)),)


def test_chb_segment5_on_channel4():
    s = build("CHB", params(6))
    seg5 = {t.channel for t in s.transmissions if t.segment == 5}
    assert seg5 == {4}
    assert {t.rate for t in channel_txs(s, 4)} == {Fraction(1, 4)}


def test_chb_aggregate_four_segments():
    assert bandwidth_profile(build("CHB", params(4))).time_average_rate == Fraction(7, 3)


def test_chb_channel2_alternates():
    segs = [t.segment for t in channel_txs(build("CHB", params(5)), 2)][:4]
    assert segs == [2, 3, 2, 3]


def test_chb_rejects_two_segments():
    with pytest.raises(ParamError, match="N >= 3"):
        build_chb(params(2))


# -- QHB --------------------------------------------------------------------------------

@pytest.mark.parametrize("args, expected", [((2, 4, 1, 4), 1), ((2, 4, 1, 1), 4), ((2, 4, 2, 3), 3)])
def test_qhb_fragment_index_examples(args, expected):
    assert qhb_fragment_index(*args) == expected


@pytest.mark.parametrize("args", [(1, 4, 1, 1), (2, 1, 1, 1), (2, 4, 1, 5), (2, 4, 1, 0), (2, 4, 0, 1)])
def test_qhb_fragment_index_domain(args):
    with pytest.raises(ValueError):
        qhb_fragment_index(*args)


def test_qhb_rate_two_four():
    s = build("QHB", params(2, 4))
    assert {t.rate for t in channel_txs(s, 2)} == {Fraction(4, 7)}


def _cycle_counts(s, i):
    frags = [t.fragment for t in channel_txs(s, i) if t.start < i]
    return Counter(frags)


def test_qhb_first_fragment_doubled_i2():
    c = _cycle_counts(build("QHB", params(2, 4)), 2)
    assert c[1] == 2
    assert all(c[f] == 1 for f in range(2, 8))
    assert sum(c.values()) == 8


def test_qhb_three_slot_cycle():
    c = _cycle_counts(build("QHB", params(3, 4)), 3)
    assert sum(c.values()) == 12
    assert set(c) == set(range(1, 12))
    assert c[1] == 2


def test_qhb_rejects_m1():
    with pytest.raises(ParamError, match="m >= 2"):
        build_qhb(params(3, 1))


def test_qhb_resolution_two_subslots_is_clean():
    res = resolve_qhb_bases(params(4, 2))
    assert res.adopted == (1, 1)
    assert res.discrepancy is None


def test_qhb_resolution_reports_when_no_base_works():
    res = resolve_qhb_bases(params(4, 4))
    assert set(res.max_stall_by_bases) == {(1, 1), (0, 0), (0, 1), (1, 0)}
    assert all(v > 0 for v in res.max_stall_by_bases.values())
    assert res.adopted == (1, 1)
    assert "stalls" in res.discrepancy


# -- AHB --------------------------------------------------------------------------------

@pytest.mark.parametrize("slot", [2, 4, 6])
def test_ahb_problematic_k2(slot):
    assert ahb_problematic(2, slot) == 1


def test_ahb_problematic_cases():
    assert ahb_problematic(3, 4) == 2
    assert ahb_problematic(3, 5) is None
    assert ahb_problematic(3, 1) is None  # t = 0 is not problematic
    assert all(ahb_problematic(1, s) is None for s in range(10))


def test_ahb_slot_kinds():
    s = build("AHB", params(3))
    ch3 = channel_txs(s, 3)
    normal = [t for t in ch3 if t.rate == Fraction(1, 3)]
    burst = [t for t in ch3 if t.rate == 1]
    assert normal and burst
    assert all(t.duration == 1 for t in normal)
    assert all(t.duration == Fraction(1, 3) for t in burst)
    assert {t.length for t in ch3} == {Fraction(1, 3)}


# -- AQHB -------------------------------------------------------------------------------

def test_aqhb_matrix_examples():
    assert aqhb_matrix(3, 4).as_lists() == [[1, 4, 7, 10], [2, 5, 8, 11], [3, 6, 9, 12]]
    assert aqhb_matrix(1, 5).as_lists() == [[1, 2, 3, 4, 5]]
    assert aqhb_matrix(2, 3).as_lists() == [[1, 3, 5], [2, 4, 6]]


@given(st.integers(1, 12), st.integers(1, 12))
def test_aqhb_matrix_permutation_column_major(i, m):
    mat = aqhb_matrix(i, m)
    flat = sorted(c for row in mat.cells for c in row)
    assert flat == list(range(1, i * m + 1))
    column_major = [mat.cells[r][c] for c in range(m) for r in range(i)]
    assert column_major == list(range(1, i * m + 1))


def test_aqhb_channel3_repeats_every_three_slots():
    s = build("AQHB", params(4, 4))
    ch3 = channel_txs(s, 3)
    assert {t.rate for t in ch3} == {Fraction(1, 3)}
    by_slot = [[t.fragment for t in ch3 if int(t.start) == s_] for s_ in range(6)]
    assert by_slot[:3] == [[1, 4, 7, 10], [2, 5, 8, 11], [3, 6, 9, 12]]
    assert by_slot[3:] == by_slot[:3]


def test_aqhb_two_by_two_pattern():
    s = build("AQHB", params(2, 2))
    assert [t.fragment for t in channel_txs(s, 2)] == [1, 3, 2, 4]


@pytest.mark.parametrize("N", range(1, 7))
def test_aqhb_slot_total_is_harmonic(N):
    prof = bandwidth_profile(build("AQHB", params(N, 3)))
    assert prof.is_constant and prof.peak_rate == harmonic(N)


# -- cross-scheme properties ------------------------------------------------------------

schemes = st.sampled_from(["HB", "CHB", "QHB", "AHB", "AQHB"])


@given(schemes, st.integers(1, 7), st.integers(1, 6), st.data())
def test_fragments_partition_segment(scheme, N, m, data):
    if scheme == "CHB" and N < 3 or scheme == "QHB" and m < 2:
        return
    seg = data.draw(st.integers(1, N))
    frs = fragments(scheme, params(N, m), seg)
    assert frs[0].offset == seg - 1
    for a, b in zip(frs, frs[1:]):
        assert a.offset + a.length == b.offset
    assert frs[-1].offset + frs[-1].length == seg
    assert all(seg - 1 <= f.offset < seg for f in frs)


def _bytes_per_cycle(s, ch, cycle):
    got = Counter()
    for t in channel_txs(s, ch):
        if t.start < cycle:
            got[(t.video_offset, t.length)] += 1
    return got


@pytest.mark.parametrize("scheme", ["HB", "AHB", "AQHB"])
@pytest.mark.parametrize("N, m", [(4, 1), (5, 2), (6, 3)])
def test_cycle_covers_segment_once(scheme, N, m):
    s = build(scheme, params(N, m))
    for ch in range(1, N + 1):
        got = _bytes_per_cycle(s, ch, ch)
        assert set(got.values()) == {1}
        assert sum(length for _, length in got) == 1


def test_chb_cycle_covers_once():
    s = build("CHB", params(6))
    for ch in range(3, 6):
        got = _bytes_per_cycle(s, ch, ch)
        assert set(got.values()) == {1} and sum(l for _, l in got) == 1


@pytest.mark.parametrize("N, m", [(4, 2), (5, 3), (6, 4)])
def test_qhb_cycle_doubles_fragment_one_only(N, m):
    s = build("QHB", params(N, m))
    for i in range(2, N + 1):
        c = _cycle_counts(s, i)
        assert c[1] == 2
        assert all(c[f] == 1 for f in range(2, i * m))


@given(st.integers(2, 8), st.integers(2, 8))
def test_qhb_rate_exceeds_hb(i, m):
    from harmonic_nvod.schemes import qhb_rate

    assert qhb_rate(i, m) > Fraction(1, i)
    assert qhb_rate(i, m) - Fraction(1, i) == Fraction(1, i * (i * m - 1))


@pytest.mark.parametrize("N", range(1, 8))
def test_ahb_bytes_match_hb_per_channel(N):
    hb, ahb = build("HB", params(N)), build("AHB", params(N))
    for ch in range(1, N + 1):
        assert ahb.bytes_per_hyperperiod(ch) == hb.bytes_per_hyperperiod(ch)
