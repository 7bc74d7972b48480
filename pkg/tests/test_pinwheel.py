import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ncsched.pinwheel import (
    BudgetExceeded,
    CyclicSchedule,
    Verdict,
    decide_exact,
    density,
    double_integer_heuristic,
    instance_from_text,
    instance_to_text,
    safe_state_search,
    threshold_check,
    verify_schedule,
    window_scan,
)

from oracles import pinwheel_oracle


def test_density_values():
    assert density([2, 2]) == 1
    assert density([2, 3, 12]) == Fraction(11, 12)
    assert density([]) == 0


@pytest.mark.parametrize("alphas, verdict", [
    ([2, 3, 12], Verdict.UNKNOWN),
    ([3, 3, 3], Verdict.UNKNOWN),
    ([2, 4, 8, 16], Verdict.UNKNOWN),
    ([2, 4, 8], Verdict.UNKNOWN),
    ([2, 4, 4], Verdict.UNKNOWN),
    ([4, 4, 6, 6], Verdict.UNKNOWN),
    ([2, 6, 6], Verdict.FEASIBLE),
    ([2, 2, 2], Verdict.INFEASIBLE),
    ([4, 4, 4], Verdict.FEASIBLE),
    ([3, 7], Verdict.FEASIBLE),
])
def test_threshold_check(alphas, verdict):
    assert threshold_check(alphas) is verdict


def test_decide_exact_examples():
    s = decide_exact([2, 2])
    assert s is not None and verify_schedule([2, 2], s) and s.period == 2
    assert decide_exact([2, 3, 12]) is None
    assert decide_exact([4, 6, 6, 8, 10, 10, 20]) is None
    s = decide_exact([3, 3, 3])
    assert verify_schedule([3, 3, 3], s)


def test_decide_exact_period_bound():
    alphas = [4, 6, 8, 10, 10, 10, 14, 28]
    s = decide_exact(alphas)
    assert verify_schedule(alphas, s)
    assert s.period <= math.prod(alphas)


def test_double_integer_examples():
    s = double_integer_heuristic([2, 4, 4])
    assert s.cycle == (0, 1, 0, 2)
    s = double_integer_heuristic([3, 5, 7])
    assert s.period == 4 and verify_schedule([3, 5, 7], s)
    assert double_integer_heuristic([3, 3, 3]) is None


def test_verify_schedule_cases():
    assert verify_schedule([2, 2], CyclicSchedule((), (0, 1)))
    assert not verify_schedule([2, 2], CyclicSchedule((), (0, 0)))
    # an agent only in the prefix starves later
    assert not verify_schedule([2, 3], CyclicSchedule((1,), (0,)))


def test_window_scan_agrees_with_verifier():
    for seq in itertools.product(range(3), repeat=5):
        sched = CyclicSchedule((), seq)
        for alphas in ([2, 4, 4], [3, 3, 3], [2, 3, 5]):
            if window_scan(alphas, seq):
                assert verify_schedule(alphas, sched)


def test_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        decide_exact([20, 21, 22, 23, 24, 25], max_product=1000)
    with pytest.raises(BudgetExceeded):
        decide_exact([9, 10, 11, 12, 13, 14, 15], max_states=50)


def test_text_formats():
    s = CyclicSchedule((0,), (1, 2))
    assert s.to_text() == "1 ; 2 3"
    assert CyclicSchedule.from_text("1 ; 2 3") == s
    t = CyclicSchedule((), ((0, 1), (2,)), "tuples")
    assert CyclicSchedule.from_text(t.to_text(), "tuples") == t
    assert t.to_text() == "(1,2) (3)"
    assert instance_from_text(instance_to_text([2, 3, 12])) == [2, 3, 12]


def test_slots_start_at_one():
    s = CyclicSchedule((5,), (1, 2))
    assert s.take(4) == [5, 1, 2, 1]
    with pytest.raises(ValueError):
        s.slot(0)


def test_symmetry_reduction_agrees():
    for alphas in ([3, 3, 4, 4], [2, 4, 4], [3, 4, 4, 6]):
        a = safe_state_search(alphas, [(i,) for i in range(len(alphas))], symmetric=True)
        b = safe_state_search(alphas, [(i,) for i in range(len(alphas))], symmetric=False)
        assert a.feasible == b.feasible
        if a.feasible:
            assert verify_schedule(alphas, a.schedule)
        assert a.n_states <= b.n_states


small = st.lists(st.integers(1, 6), min_size=1, max_size=4)


@given(small)
def test_exact_matches_oracle(alphas):
    s = decide_exact(alphas)
    assert (s is not None) == pinwheel_oracle(alphas)
    if s is not None:
        assert verify_schedule(alphas, s)
        assert s.period <= math.prod(alphas)


@given(small)
def test_heuristic_never_lies(alphas):
    s = double_integer_heuristic(alphas)
    if s is not None:
        assert verify_schedule(alphas, s)


@given(small)
def test_thresholds_never_contradict(alphas):
    v = threshold_check(alphas)
    if v is Verdict.UNKNOWN:
        return
    assert (v is Verdict.FEASIBLE) == pinwheel_oracle(alphas)


def test_short_cycles_are_preferred():
    # the earliest-deadline walk would defer the loose agent for ~100 slots
    s = decide_exact([2, 4, 100])
    assert s.prefix == () and s.period == 4
    assert verify_schedule([2, 4, 100], s)
