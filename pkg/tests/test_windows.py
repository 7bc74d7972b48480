import math

import pytest
from hypothesis import given, strategies as st

from ncsched.pinwheel import CyclicSchedule, Verdict, decide_exact
from ncsched.windows import (
    WspInstance,
    channel_allocations,
    chunk_schedule,
    perfect_schedule_decide,
    reduce_to_pp,
    tuples_from_text,
    verify_wsp,
    wsp_exact,
    wsp_thresholds,
    wsp_via_pp,
    zeta_instance,
    zeta_necessary,
)

from oracles import wsp_oracle

EX5 = WspInstance(2, (2, 3, 3, 4, 5, 5, 10))
EX6 = WspInstance(2, (2, 3, 4, 5, 5, 5, 7, 14))
EX5_CYCLE = ("(1,2),(3,4),(1,6),(2,5),(1,3),(4,7),(1,2),(3,6),(1,5),(2,4),"
             "(1,3),(2,4),(1,6),(3,5),(1,2),(4,7),(1,3),(2,6),(1,5),(3,4)")
EX6_CYCLE = "(2,3),(4,1),(7,6),(2,1),(5,3),(2,1),(4,3),(6,1),(2,5),(7,1),(4,3),(2,1),(6,8),(5,1)"


def test_thresholds():
    assert wsp_thresholds(WspInstance(2, (2, 2, 2, 2))) is Verdict.UNKNOWN
    assert wsp_thresholds(WspInstance(2, (4, 4))) is Verdict.FEASIBLE
    assert wsp_thresholds(WspInstance(1, (2, 3, 12))) is Verdict.UNKNOWN
    assert wsp_thresholds(WspInstance(2, (1, 1, 2))) is Verdict.INFEASIBLE


def test_reduce_to_pp():
    assert reduce_to_pp(EX5) == [4, 6, 6, 8, 10, 10, 20]
    assert reduce_to_pp(EX6) == [4, 6, 8, 10, 10, 10, 14, 28]
    assert reduce_to_pp(WspInstance(1, (2, 3))) == [2, 3]


def test_alternating_tuples_feasible():
    inst = WspInstance(2, (2, 2, 2, 2))
    s = wsp_exact(inst)
    assert s is not None and verify_wsp(inst, s)


def test_example6_via_pp():
    s = wsp_via_pp(EX6)
    assert s is not None and verify_wsp(EX6, s)
    assert s.period == 14
    given = CyclicSchedule((), tuple(tuples_from_text(EX6_CYCLE)), "tuples")
    assert verify_wsp(EX6, given)


def test_example5_heuristic_gap():
    assert wsp_via_pp(EX5) is None
    given = CyclicSchedule((), tuple(tuples_from_text(EX5_CYCLE)), "tuples")
    assert given.period == 20 and verify_wsp(EX5, given)
    assert wsp_exact(EX5) is not None


def test_single_channel_matches_pp():
    for alphas in ([2, 3, 12], [2, 4, 4], [3, 3, 3]):
        a = wsp_via_pp(WspInstance(1, alphas))
        assert (a is None) == (decide_exact(alphas) is None)


def test_chunk_period():
    pp = CyclicSchedule((), (0, 1, 2), "symbols")
    s = chunk_schedule(pp, 2)
    assert s.period == 3 // math.gcd(3, 2)
    assert s.cycle == ((0, 1), (0, 2), (1, 2))


def test_zeta():
    assert zeta_instance(WspInstance(2, (2, 2, 2, 2, 2))) == [4, 4, 5, 5, 5]
    assert zeta_necessary(WspInstance(2, (2, 2, 2, 2, 2))) is False
    assert zeta_necessary(EX5) is True
    assert zeta_instance(WspInstance(1, (3, 2))) == [2, 3]


def test_perfect_schedules():
    assert perfect_schedule_decide(EX6) is None
    allocs = list(channel_allocations(EX6, distinct_values=True))
    assert len(allocs) == 7
    table = {
        ((2, 3, 7), (4, 5, 5, 5, 14)), ((2, 3, 14), (4, 5, 5, 5, 7)),
        ((2, 4, 5), (3, 5, 5, 7, 14)), ((2, 4, 7, 14), (3, 5, 5, 5)),
        ((2, 5, 5, 14), (3, 4, 5, 7)), ((2, 5, 5), (3, 4, 5, 7, 14)),
        ((2, 5, 7, 14), (3, 4, 5, 5)),
    }
    got = {tuple(sorted(tuple(sorted(EX6.alphas[a] for a in b)) for b in al.channels))
           for al in allocs}
    assert got == table
    ps = perfect_schedule_decide(WspInstance(2, (2, 2, 3, 3)))
    assert ps is not None
    inst = WspInstance(2, (2, 2, 3, 3))
    assert verify_wsp(inst, ps.to_tuple_schedule())
    one = perfect_schedule_decide(WspInstance(1, (2, 2)))
    assert one.schedules[0].period == 2


def test_text_round_trip():
    inst = WspInstance.from_text("2 : 2 3 4")
    assert inst == WspInstance(2, (2, 3, 4)) and WspInstance.from_text(inst.to_text()) == inst
    with pytest.raises(ValueError):
        WspInstance.from_text("2")


inst_st = st.builds(lambda m, a: WspInstance(m, a), st.integers(1, 2),
                    st.lists(st.integers(1, 5), min_size=1, max_size=4))


@given(inst_st)
def test_exact_matches_oracle(inst):
    s = wsp_exact(inst)
    assert (s is not None) == wsp_oracle(inst.m_c, inst.alphas)
    if s is not None:
        assert verify_wsp(inst, s)


@given(inst_st)
def test_via_pp_is_sound(inst):
    s = wsp_via_pp(inst)
    if s is not None:
        assert verify_wsp(inst, s)
        assert wsp_oracle(inst.m_c, inst.alphas)
