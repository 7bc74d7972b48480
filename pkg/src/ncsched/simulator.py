"""Closed-loop simulation of scheduled networked agents.

Slot 0 is a virtual slot in which every agent is connected, so each run
starts right after a connection. In slot ``t`` the scheduling policy picks a
slot element, the loss policy decides whether that slot's packet is lost,
and every agent steps with its connected law if it was served (and the
packet arrived) or with its disconnected law otherwise.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import EPS_CON, Polytope
from .invariance import ModePair, PointDeadline, invariant_set, safe_time_interval
from .models import AgentSpec, build_mode_pair
from .online import (
    FixedPolicy,
    P3Instance,
    RotationPolicy,
    ShiftedPolicy,
    _windows_ok,
)
from .patterns import P1Instance
from .pinwheel import CyclicSchedule

TRACE_VERSION = 1
DEFAULT_DEADLINE_CAP = 64


class AssumptionViolation(RuntimeError):
    """A loss sequence exceeded a window budget."""


class PolicyError(RuntimeError):
    """A policy returned an element outside the action set."""


@dataclass
class AgentRuntime:
    mode_pair: ModePair
    S_inf: Polytope
    alpha: int
    name: str = ""
    spec: AgentSpec | None = None
    _deadline: PointDeadline | None = field(default=None, repr=False)

    def deadline(self, z, cap: int = DEFAULT_DEADLINE_CAP) -> int:
        if self._deadline is None or self._deadline.cap != cap:
            self._deadline = PointDeadline(self.mode_pair, self.S_inf, cap=cap)
        return self._deadline(z)


def prepare_agent(spec: AgentSpec, name: str = "") -> AgentRuntime:
    """Build the mode pair, its invariant set and safe time interval."""
    mp = build_mode_pair(spec)
    inv = invariant_set(mp)
    if not inv.converged:
        raise RuntimeError(f"invariant set computation ended with {inv.status.value}")
    res = safe_time_interval(mp, inv.polytope)
    return AgentRuntime(mp, inv.polytope, res.alpha, name or spec.name, spec)


# -- disturbances --------------------------------------------------------------


class ZeroDisturbance:
    def __call__(self, k, agent, z, connected, rng):
        return np.zeros(agent.mode_pair.disturbance_set.dim)


class UniformDisturbance:
    """Uniform samples from the bounding box of the disturbance set,
    rejected until they fall inside it."""

    def __call__(self, k, agent, z, connected, rng):
        V = agent.mode_pair.disturbance_set
        lo, hi = V.bounding_box()
        for _ in range(1000):
            v = rng.uniform(lo, hi)
            if V.contains_point(v):
                return v
        raise RuntimeError("could not sample the disturbance set")  # pragma: no cover


class VertexWorstCase:
    """Vertex of the disturbance set that leaves the shortest deadline,
    then the smallest slack to the invariant set."""

    def __init__(self, cap: int = DEFAULT_DEADLINE_CAP):
        self.cap = cap

    def __call__(self, k, agent, z, connected, rng):
        law = agent.mode_pair.law(connected)
        S = agent.S_inf
        best, best_key = None, None
        for v in agent.mode_pair.disturbance_set.vertices():
            zn = law(z, v)
            key = (agent.deadline(zn, self.cap), float(np.min(S.b - S.A @ zn)))
            if best_key is None or key < best_key:
                best, best_key = v, key
        return best


DISTURBANCES = {"zero": ZeroDisturbance, "uniform": UniformDisturbance, "worst": VertexWorstCase}


# -- losses --------------------------------------------------------------------


class NoLoss:
    def __call__(self, t, element, policy, history):
        return False


class ScriptedLoss:
    """Loss flags for slots ``1, 2, ...``; no losses after the script ends."""

    def __init__(self, flags):
        self.flags = [int(bool(f)) for f in flags]

    def __call__(self, t, element, policy, history):
        return bool(self.flags[t - 1]) if t - 1 < len(self.flags) else False


class AdversarialLoss:
    """Drop the packet when that lowers the smallest robust residual seen
    over the next ``lookahead`` slots, within the window budgets.

    The look-ahead replays cloned policies with deadlines bounded by the
    safe time intervals. Ties keep the packet, which saves budget.
    """

    def __init__(self, alphas, loss_bounds, lookahead: int = 1):
        self.alphas = [int(a) for a in alphas]
        self.loss_bounds = [int(n) for n in loss_bounds]
        self.lookahead = max(int(lookahead), 1)

    def allowed(self, history) -> bool:
        return bool(any(self.loss_bounds)) and _windows_ok(list(history) + [1], self.alphas,
                                                           self.loss_bounds)

    def __call__(self, t, element, policy, history):
        if not self.allowed(history):
            return False
        return self._score(policy, element, True) < self._score(policy, element, False)

    def _score(self, policy, element, lost):
        p = policy.clone()
        p.observe(element, lost)
        worst = None
        for _ in range(self.lookahead):
            nxt = p.step(None)
            m = p.last_report.minimum
            worst = m if worst is None else min(worst, m)
            p.observe(nxt, False)
        return worst


def check_loss_budget(history, alphas, loss_bounds) -> bool:
    """True when every window of every length in ``alphas`` holds at most its
    budget of losses."""
    h = list(history)
    return all(_windows_ok(h[:k + 1], alphas, loss_bounds) for k in range(len(h)) if h[k])


# -- scenario and trace --------------------------------------------------------------


POLICIES = {"fixed": FixedPolicy, "shifted": ShiftedPolicy, "online": RotationPolicy}


@dataclass
class Scenario:
    agents: list
    instance: P1Instance | P3Instance
    baseline: CyclicSchedule
    policy: str = "fixed"
    disturbance: str | object = "uniform"
    loss: object = None
    horizon: int = 100
    seed: int = 0
    deadline_source: str = "reach"
    initial_states: list | None = None
    deadline_cap: int = DEFAULT_DEADLINE_CAP

    def __post_init__(self):
        base = self.instance.base if isinstance(self.instance, P3Instance) else self.instance
        if len(self.agents) != base.q:
            raise ValueError("one agent runtime per instance agent is required")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.deadline_source not in ("reach", "bound"):
            raise ValueError("deadline_source must be 'reach' or 'bound'")

    @property
    def base(self) -> P1Instance:
        return self.instance.base if isinstance(self.instance, P3Instance) else self.instance

    @property
    def loss_bounds(self):
        return self.instance.loss_bounds if isinstance(self.instance, P3Instance) else None


@dataclass
class Step:
    t: int
    element: object
    nu: int
    z: list
    connected: list
    in_set: list
    gamma_x: list
    gamma_c: list
    residuals: list


@dataclass
class Trace:
    steps: list
    q: int
    kind: str

    @property
    def violations(self) -> int:
        return sum(not ok for s in self.steps for ok in s.in_set)

    @property
    def min_residual(self) -> int:
        return min(min(s.residuals) for s in self.steps) if self.steps else 0

    @property
    def losses(self) -> list:
        return [s.nu for s in self.steps]

    def residual_floor(self, agent=None):
        if agent is None:
            return [min(s.residuals) for s in self.steps]
        return [s.residuals[agent] for s in self.steps]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# ncsched trace v{TRACE_VERSION}\n")
        head = ["t", "element", "nu"]
        for i in range(1, self.q + 1):
            head += [f"connected_{i}", f"in_set_{i}", f"gamma_x_{i}", f"gamma_c_{i}",
                     f"residual_{i}", f"z_{i}"]
        w.writerow(head)
        for s in self.steps:
            row = [s.t, _fmt_element(s.element, self.kind), s.nu]
            for i in range(self.q):
                row += [int(s.connected[i]), int(s.in_set[i]), s.gamma_x[i], s.gamma_c[i],
                        s.residuals[i], " ".join(f"{v:.12g}" for v in s.z[i])]
            w.writerow(row)
        return buf.getvalue()


def _fmt_element(e, kind):
    if kind == "tuples":
        return "(" + ",".join(str(a + 1) for a in e) + ")"
    return str(int(e) + 1)


def _sample_in(S: Polytope, rng) -> np.ndarray:
    V = S.vertices()
    w = rng.dirichlet(np.ones(len(V)))
    return w @ V


def _disturbance(spec):
    if isinstance(spec, str):
        return DISTURBANCES[spec]()
    return spec


def simulate(sc: Scenario) -> Trace:
    """Run the scenario and record every slot."""
    rng = np.random.default_rng(sc.seed)
    base = sc.base
    q = base.q
    dist = _disturbance(sc.disturbance)
    loss = sc.loss or NoLoss()
    policy = POLICIES[sc.policy](sc.instance, sc.baseline)
    allowed = _allowed_elements(sc.baseline, base)
    alphas = list(base.alphas)

    if sc.initial_states is None:
        z = [_sample_in(a.S_inf, rng) for a in sc.agents]
    else:
        z = [np.asarray(v, dtype=float) for v in sc.initial_states]
    for i, a in enumerate(sc.agents):
        if not a.S_inf.contains_point(z[i], EPS_CON):
            raise ValueError(f"initial state of agent {i + 1} is outside its invariant set")
    # virtual slot 0: everyone connected
    z = [a.mode_pair.connected(z[i], dist(0, a, z[i], True, rng)) for i, a in enumerate(sc.agents)]

    steps = []
    history = []
    for t in range(1, sc.horizon + 1):
        if sc.deadline_source == "reach":
            gx = np.array([a.deadline(z[i], sc.deadline_cap) for i, a in enumerate(sc.agents)])
        else:
            gx = None
        element = policy.step(gx)
        if element not in allowed:
            raise PolicyError(f"policy returned {element!r}, not an allowed slot element")
        nu = bool(loss(t, element, policy, history))
        history.append(int(nu))
        if nu and sc.loss_bounds is not None and not _windows_ok(history, alphas, sc.loss_bounds):
            raise AssumptionViolation(f"loss at slot {t} exceeds a window budget")
        rep = policy.last_report
        served = set() if nu else set(policy.members(element))
        in_set = [bool(a.S_inf.contains_point(z[i], EPS_CON)) for i, a in enumerate(sc.agents)]
        steps.append(Step(t, element, int(nu), [v.copy() for v in z],
                          [i in served for i in range(q)], in_set,
                          [int(v) for v in rep.gamma_x], [int(v) for v in rep.gamma_c],
                          [int(v) for v in rep.residuals]))
        z = [a.mode_pair.law(i in served)(z[i], dist(t, a, z[i], i in served, rng))
             for i, a in enumerate(sc.agents)]
        policy.observe(element, nu)
    return Trace(steps, q, sc.baseline.kind)


def _allowed_elements(baseline: CyclicSchedule, base: P1Instance):
    if baseline.kind == "patterns":
        return set(range(len(base.patterns)))
    return set(baseline.prefix) | set(baseline.cycle)


@dataclass
class ViolationReport:
    violations: int
    min_residual: int
    worst_slack: list
    first_violation: int | None

    def summary(self) -> str:
        first = "-" if self.first_violation is None else str(self.first_violation)
        return (f"violations={self.violations} min_residual={self.min_residual} "
                f"first_violation={first}")


def violation_report(trace: Trace, agents=None) -> ViolationReport:
    """Counts of states outside the invariant sets, the residual floor and,
    when the agents are given, each agent's smallest slack to its set."""
    first = next((s.t for s in trace.steps if not all(s.in_set)), None)
    slack = []
    if agents is not None:
        for i, a in enumerate(agents):
            slack.append(min(float(np.min(a.S_inf.b - a.S_inf.A @ s.z[i])) for s in trace.steps))
    return ViolationReport(trace.violations, trace.min_residual, slack, first)
