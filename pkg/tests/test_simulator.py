import numpy as np
import pytest

from ncsched import simulator
from ncsched.online import P3Instance, _PolicyBase, loss_bounds_from_rate
from ncsched.patterns import P1Instance
from ncsched.pinwheel import CyclicSchedule
from ncsched.simulator import (
    AdversarialLoss,
    AssumptionViolation,
    PolicyError,
    Scenario,
    ScriptedLoss,
    VertexWorstCase,
    check_loss_budget,
    prepare_agent,
    simulate,
    violation_report,
)
from ncsched.windows import tuples_from_text

from conftest import example2_spec

EX8_CYCLE = tuple(tuples_from_text("(1,2),(3,4),(1,2),(1,3),(2,4),(1,5),(2,3),(1,4),(2,5)"))


@pytest.fixture(scope="module")
def osc():
    return prepare_agent(example2_spec(), "osc")


def test_zero_disturbance_always_connected_contracts(osc):
    inst = P1Instance.singletons([osc.alpha])
    sc = Scenario([osc], inst, CyclicSchedule((), (0,), "patterns"), disturbance="zero",
                  horizon=40, seed=3, deadline_source="bound")
    tr = simulate(sc)
    assert tr.violations == 0
    assert all(s.connected == [True] for s in tr.steps)
    z0, zn = np.asarray(tr.steps[0].z[0]), np.asarray(tr.steps[-1].z[0])
    assert np.linalg.norm(zn) < 1e-2 * max(np.linalg.norm(z0), 1e-9) + 1e-9


def test_same_seed_same_trace(osc):
    inst = P1Instance.singletons([osc.alpha, osc.alpha])
    base = CyclicSchedule((), (0, 1), "patterns")
    a = simulate(Scenario([osc, osc], inst, base, horizon=30, seed=7))
    b = simulate(Scenario([osc, osc], inst, base, horizon=30, seed=7))
    c = simulate(Scenario([osc, osc], inst, base, horizon=30, seed=8))
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != c.to_csv()
    assert a.to_csv().startswith("# ncsched trace v1\n")


def test_starved_agent_is_detected(osc):
    inst = P1Instance.singletons([osc.alpha, osc.alpha])
    sc = Scenario([osc, osc], inst, CyclicSchedule((), (0,), "patterns"),
                  disturbance=VertexWorstCase(cap=16), horizon=3 * osc.alpha + 5, seed=0,
                  deadline_source="bound")
    tr = simulate(sc)
    rep = violation_report(tr, [osc, osc])
    assert rep.violations > 0 and rep.first_violation is not None
    assert all(s.in_set[0] for s in tr.steps)
    assert rep.worst_slack[1] < 0 <= rep.worst_slack[0]
    assert tr.min_residual < 0


def test_adversary_with_zero_budget_never_drops(osc):
    inst = P3Instance(P1Instance.singletons([osc.alpha, osc.alpha]), (0, 0))
    base = CyclicSchedule((), (0, 1), "patterns")
    loss = AdversarialLoss(inst.alphas, inst.loss_bounds)
    tr = simulate(Scenario([osc, osc], inst, base, policy="online", loss=loss, horizon=40,
                           deadline_source="bound"))
    assert sum(tr.losses) == 0


def test_adversary_respects_window_budget(osc):
    alphas = (4, 4)
    bounds = loss_bounds_from_rate(alphas, 2, 4)
    inst = P3Instance(P1Instance.singletons(alphas), bounds)
    base = CyclicSchedule((), (0, 1), "patterns")
    greedy = AdversarialLoss(alphas, bounds)
    tr = simulate(Scenario([osc, osc], inst, base, policy="shifted",
                           loss=lambda t, e, p, h: greedy.allowed(h), horizon=60,
                           deadline_source="bound"))
    assert sum(tr.losses) > 0
    h = tr.losses
    assert all(sum(h[k:k + 4]) <= 2 for k in range(len(h)))
    assert check_loss_budget(h, alphas, bounds)


def test_scripted_overbudget_losses_raise(osc):
    inst = P3Instance(P1Instance.singletons([4, 4]), (1, 1))
    base = CyclicSchedule((), (0, 1), "patterns")
    with pytest.raises(AssumptionViolation):
        simulate(Scenario([osc, osc], inst, base, policy="shifted",
                          loss=ScriptedLoss([1, 0, 1]), horizon=5, deadline_source="bound"))
    assert not check_loss_budget([1, 0, 1], (4,), (1,))
    assert check_loss_budget([1, 0, 0, 0, 1], (4,), (1,))


def test_policy_outside_action_set_raises(osc, monkeypatch):
    class Rogue(_PolicyBase):
        def step(self, gamma_x=None):
            self.last_report = self._report(self._deadlines(gamma_x), (0,))
            return 5

    monkeypatch.setitem(simulator.POLICIES, "rogue", Rogue)
    inst = P1Instance.singletons([osc.alpha])
    sc = Scenario([osc], inst, CyclicSchedule((), (0,), "patterns"), horizon=3,
                  deadline_source="bound")
    sc.policy = "rogue"
    with pytest.raises(PolicyError):
        simulate(sc)


def test_scenario_validation(osc):
    inst = P1Instance.singletons([osc.alpha, osc.alpha])
    base = CyclicSchedule((), (0, 1), "patterns")
    with pytest.raises(ValueError):
        Scenario([osc], inst, base)
    with pytest.raises(ValueError):
        Scenario([osc, osc], inst, base, policy="nope")
    with pytest.raises(ValueError):
        Scenario([osc, osc], inst, base, deadline_source="nope")
    with pytest.raises(ValueError):
        simulate(Scenario([osc, osc], inst, base, initial_states=[[100, 100], [0, 0]]))


def test_example8_online_beats_shifted(example8_agents):
    alphas = tuple(a.alpha for a in example8_agents)
    assert alphas == (4, 6, 8, 10, 12)
    bounds = loss_bounds_from_rate(alphas, 2, 4)
    inst = P3Instance(P1Instance(alphas, tuple(sorted(set(EX8_CYCLE)))), bounds)
    base = CyclicSchedule((), EX8_CYCLE, "tuples")
    floors = {}
    for pol in ("shifted", "online"):
        tr = simulate(Scenario(example8_agents, inst, base, policy=pol,
                               loss=AdversarialLoss(alphas, bounds), horizon=120, seed=1))
        assert tr.violations == 0
        assert check_loss_budget(tr.losses, alphas, bounds)
        floors[pol] = tr.min_residual
    assert floors["shifted"] >= 0
    assert floors["online"] >= floors["shifted"]
