"""Online schedule adaptation and packet-loss robustness.

Time runs in slots ``t = 1, 2, ...``; slot 0 is a virtual slot in which every
agent was served. Loss flags ``nu[t]`` are 1 when the packet of slot ``t``
was lost (for every agent of that slot) and are known at the end of the slot.

Given a feasible *baseline cycle*, the online policy picks at every slot the
rotation of the cycle that maximizes the smallest *safety residual*: the
slack between how long an agent can still wait (its deadline) and how long
the rotated cycle makes it wait.
"""
from __future__ import annotations

import copy
import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from .patterns import P1Instance, exact_p1, algorithm1
from .pinwheel import CyclicSchedule

INFINITY = 10**9


# -- instances -------------------------------------------------------------------


@dataclass(frozen=True)
class P3Instance:
    """Pattern instance plus, per agent, the most losses in any window of
    ``alpha_i`` consecutive slots."""

    base: P1Instance
    loss_bounds: tuple

    def __post_init__(self):
        lb = tuple(int(n) for n in self.loss_bounds)
        if len(lb) != self.base.q:
            raise ValueError("one loss bound per agent is required")
        if any(n < 0 for n in lb):
            raise ValueError("loss bounds must be non-negative")
        object.__setattr__(self, "loss_bounds", lb)

    @property
    def alphas(self) -> tuple:
        return self.base.alphas

    @property
    def trivially_infeasible(self) -> bool:
        return any(n >= a for n, a in zip(self.loss_bounds, self.alphas))


def loss_bounds_from_rate(alphas, max_losses: int, window: int) -> tuple:
    """Per-agent bounds implied by "at most ``max_losses`` in any ``window``
    consecutive slots": the most losses a window of ``alpha_i`` slots can hold.

    >>> loss_bounds_from_rate([4, 6, 8, 10, 12], 2, 4)
    (2, 4, 4, 6, 6)
    """
    return tuple((a // window) * max_losses + min(a % window, max_losses) for a in alphas)


def effective_loss_bounds(alphas, loss_bounds) -> tuple:
    """Losses actually attainable in a window of ``alpha_i`` slots when all
    window budgets hold at once (never above the given bounds).

    >>> effective_loss_bounds([2, 2], [1, 0])
    (0, 0)
    """
    alphas = [int(a) for a in alphas]
    out = []
    for a in alphas:
        seq, n = [], 0
        for _ in range(a):
            seq.append(1)
            if _windows_ok(seq, alphas, loss_bounds):
                n += 1
            else:
                seq[-1] = 0
        out.append(n)
    return tuple(out)


def beta_transform(inst: P3Instance) -> P1Instance | None:
    """Shrink every window by its loss bound; ``None`` if some window vanishes."""
    betas = [a - n for a, n in zip(inst.alphas, inst.loss_bounds)]
    if any(b < 1 for b in betas):
        return None
    return P1Instance(tuple(betas), tuple(tuple(p) for p in inst.base.patterns))


def max_gaps(schedule: CyclicSchedule, q: int, patterns=None) -> np.ndarray:
    """Longest distance between successive services of each agent, slot 0
    counting as a service (``INFINITY`` for agents missing from the cycle)."""
    d = np.zeros(q, dtype=np.int64)
    worst = np.zeros(q, dtype=np.int64)
    served_in_cycle = frozenset().union(*(schedule.members(e, patterns) for e in schedule.cycle))
    for e in list(schedule.prefix) + list(schedule.cycle) * 2:
        d += 1
        worst = np.maximum(worst, d)
        d[list(schedule.members(e, patterns))] = 0
    for i in range(q):
        if i not in served_in_cycle:
            worst[i] = INFINITY
    return worst


def loss_margin_check(inst: P3Instance, schedule: CyclicSchedule) -> bool:
    """Does retransmitting the baseline after each loss stay feasible?

    Holds when every agent's longest gap leaves room for its loss bound.
    """
    pats = inst.base.patterns if schedule.kind == "patterns" else None
    T = max_gaps(schedule, inst.base.q, pats)
    return bool(np.all(np.asarray(inst.alphas) - T >= np.asarray(inst.loss_bounds)))


def shifted_slot(baseline: CyclicSchedule, loss_history, t: int):
    """Baseline element used at slot ``t`` when every loss is retransmitted.

    ``loss_history[k]`` is the loss flag of slot ``k + 1``.
    """
    lost = int(sum(loss_history[:t - 1]))
    return baseline.slot(t - lost)


# -- rotations and residuals --------------------------------------------------------


def rotate(cycle, j: int) -> tuple:
    """Cycle started at position ``j`` (0-based)."""
    cycle = tuple(cycle)
    if not 0 <= j < len(cycle):
        raise IndexError(f"rotation {j} out of range for period {len(cycle)}")
    return cycle[j:] + cycle[:j]


def _member_sets(cycle, patterns):
    out = []
    for e in cycle:
        if patterns is not None:
            out.append(frozenset(patterns[e]))
        elif isinstance(e, (tuple, list, frozenset, set)):
            out.append(frozenset(e))
        else:
            out.append(frozenset([int(e)]))
    return out


def gamma_schedule(cycle, q: int, patterns=None) -> np.ndarray:
    """Slots each agent waits before the cycle (repeated) serves it; 0 when
    the first element serves it, ``INFINITY`` when it never does."""
    sets = _member_sets(cycle, patterns)
    g = np.full(q, INFINITY, dtype=np.int64)
    for k in range(len(sets) - 1, -1, -1):
        for i in sets[k]:
            g[i] = k
    return g


def worst_case_losses(waits, loss_history, alphas, loss_bounds) -> np.ndarray:
    """Most losses an adversary can insert before each agent is served.

    ``waits[i]`` is the number of successful slots before agent ``i``'s
    turn; losses are placed greedily (as early as the window budgets and the
    observed history allow), which maximizes the losses in every prefix.
    When every budget covers its whole window the count is ``INFINITY``.
    """
    waits = np.asarray(waits)
    q = len(alphas)
    finite = waits[waits < INFINITY]
    if finite.size == 0 or not any(loss_bounds):
        return np.zeros(q, dtype=np.int64)
    if all(n >= a for a, n in zip(alphas, loss_bounds)):
        return np.where(waits < INFINITY, INFINITY, 0).astype(np.int64)
    need = int(finite.max()) + 1
    seq = list(int(v) for v in loss_history)
    h = len(seq)
    successes = 0
    losses_before = []  # losses seen before the k-th success
    n = 0
    while successes < need:
        seq.append(1)
        if _windows_ok(seq, alphas, loss_bounds):
            n += 1
        else:
            seq[-1] = 0
            losses_before.append(n)
            successes += 1
        if len(seq) - h > need + sum(loss_bounds) * (need + max(alphas)):  # pragma: no cover
            raise RuntimeError("loss placement did not terminate")
    out = np.zeros(q, dtype=np.int64)
    for i in range(q):
        if waits[i] < INFINITY:
            out[i] = losses_before[int(waits[i])]
    return out


def _windows_ok(seq, alphas, loss_bounds) -> bool:
    """Check only the windows ending at the last element."""
    for a, n in zip(alphas, loss_bounds):
        if sum(seq[-a:]) > n:
            return False
    return True


@dataclass
class ResidualReport:
    residuals: np.ndarray
    gamma_x: np.ndarray
    gamma_c: np.ndarray
    losses: np.ndarray
    rotation: int = 0

    @property
    def minimum(self) -> int:
        return int(self.residuals.min())

    @property
    def feasible(self) -> bool:
        return self.minimum >= 0


def residuals(gamma_x, cycle, q: int, patterns=None) -> ResidualReport:
    gx = np.asarray(gamma_x, dtype=np.int64)
    gc = gamma_schedule(cycle, q, patterns)
    return ResidualReport(gx - gc, gx, gc, np.zeros(q, dtype=np.int64))


def robust_residuals(gamma_x, cycle, q: int, loss_history, alphas, loss_bounds,
                     patterns=None) -> ResidualReport:
    gx = np.asarray(gamma_x, dtype=np.int64)
    gc = gamma_schedule(cycle, q, patterns)
    n = worst_case_losses(gc, loss_history, alphas, loss_bounds)
    return ResidualReport(gx - gc - n, gx, gc, n)


def best_rotation(gamma_x, cycle, q: int, patterns=None, loss_history=None,
                  alphas=None, loss_bounds=None, aggregate=None) -> ResidualReport:
    """Rotation maximizing the aggregated residual (default: the minimum).

    Ties go to the smallest rotation index. With loss data the robust
    residuals are used.
    """
    aggregate = aggregate or (lambda r: int(r.min()))
    best, best_val = None, None
    for j in range(len(cycle)):
        rc = rotate(cycle, j)
        if loss_bounds is not None:
            rep = robust_residuals(gamma_x, rc, q, loss_history or [], alphas, loss_bounds, patterns)
        else:
            rep = residuals(gamma_x, rc, q, patterns)
        rep.rotation = j
        val = aggregate(rep.residuals)
        if best is None or val > best_val:
            best, best_val = rep, val
    return best


# -- deadlines ---------------------------------------------------------------------


def deadline_lower_bound(alphas, last_connect, t: int) -> np.ndarray:
    """Deadline implied by the safe time intervals alone: ``alpha - (t - tau)``
    with ``tau`` the last successful slot before ``t``."""
    return np.asarray(alphas) - (t - np.asarray(last_connect))


# -- policies ----------------------------------------------------------------------


@dataclass
class OnlineState:
    t: int
    last_connect: np.ndarray
    loss_history: list
    deadlines: np.ndarray | None = None


class _PolicyBase:
    def __init__(self, instance, baseline: CyclicSchedule, loss_bounds=None):
        if isinstance(instance, P3Instance):
            self.base = instance.base
            self.loss_bounds = instance.loss_bounds
        else:
            self.base = instance
            self.loss_bounds = loss_bounds
        self.baseline = baseline
        self.patterns = self.base.patterns if baseline.kind == "patterns" else None
        self.q = self.base.q
        self.alphas = np.asarray(self.base.alphas)
        self.state = OnlineState(0, np.zeros(self.q, dtype=np.int64), [])
        self.last_report: ResidualReport | None = None

    def members(self, element) -> frozenset:
        return self.baseline.members(element, self.patterns)

    def observe(self, element, lost: bool):
        """Record the outcome of the current slot."""
        st = self.state
        st.loss_history.append(int(bool(lost)))
        if not lost:
            for i in self.members(element):
                st.last_connect[i] = st.t

    def _deadlines(self, deadlines):
        if deadlines is None:
            return deadlines_or_bound(self.alphas, self.state)
        return np.asarray(deadlines, dtype=np.int64)

    def _report(self, gx, cycle):
        if self.loss_bounds is None:
            return residuals(gx, cycle, self.q, self.patterns)
        return robust_residuals(gx, cycle, self.q, self.state.loss_history, self.alphas,
                                self.loss_bounds, self.patterns)

    def clone(self):
        return copy.deepcopy(self)


def deadlines_or_bound(alphas, state: OnlineState) -> np.ndarray:
    return deadline_lower_bound(alphas, state.last_connect, state.t)


class FixedPolicy(_PolicyBase):
    """Play the baseline as is (losses are not retransmitted)."""

    def step(self, deadlines=None):
        self.state.t += 1
        pos = self._position()
        gx = self._deadlines(deadlines)
        self.last_report = self._report(gx, self._cycle_from(pos))
        return self.baseline.slot(self.state.t)

    def _position(self):
        return self.state.t

    def _cycle_from(self, t):
        n = len(self.baseline.prefix) + self.baseline.period
        return tuple(self.baseline.slot(t + k) for k in range(n))


class ShiftedPolicy(FixedPolicy):
    """Retransmit after every loss: the baseline is delayed by the loss count."""

    def _position(self):
        return self.state.t - sum(self.state.loss_history)

    def step(self, deadlines=None):
        self.state.t += 1
        pos = self._position()
        gx = self._deadlines(deadlines)
        self.last_report = self._report(gx, self._cycle_from(pos))
        return self.baseline.slot(pos)


class RotationPolicy(_PolicyBase):
    """Each slot, play the first element of the best rotation of the cycle."""

    def __init__(self, instance, baseline: CyclicSchedule, loss_bounds=None, aggregate=None):
        super().__init__(instance, baseline, loss_bounds)
        self.aggregate = aggregate

    def step(self, deadlines=None):
        self.state.t += 1
        gx = self._deadlines(deadlines)
        cyc = self.baseline.cycle
        if self.loss_bounds is None:
            rep = best_rotation(gx, cyc, self.q, self.patterns, aggregate=self.aggregate)
        else:
            rep = best_rotation(gx, cyc, self.q, self.patterns, self.state.loss_history,
                                self.alphas, self.loss_bounds, self.aggregate)
        self.last_report = rep
        return cyc[rep.rotation]


def algorithm3(inst: P3Instance, pp_solver: str = "exact", tighten: bool = False,
               **budget) -> RotationPolicy | None:
    """Robust online policy: solve the shrunken-window instance for a
    baseline cycle, then rotate it online on robust residuals.

    With ``tighten`` the windows shrink by the jointly attainable losses
    (:func:`effective_loss_bounds`) instead of the raw bounds.
    """
    if tighten:
        inst = P3Instance(inst.base, effective_loss_bounds(inst.alphas, inst.loss_bounds))
    reduced = beta_transform(inst)
    if reduced is None:
        return None
    if pp_solver == "exact_p1":
        sched = exact_p1(reduced, **budget)
    else:
        sched = algorithm1(reduced, "exact" if pp_solver == "exact" else "double_integer", **budget)
    if sched is None:
        return None
    return RotationPolicy(inst, sched)


def policy_trace_csv(rows) -> str:
    """CSV of per-slot policy data: ``t, pattern, nu`` then per-agent
    ``gamma_x``, ``gamma_c`` and residual columns."""
    rows = list(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not rows:
        return ""
    q = len(rows[0]["gamma_x"])
    w.writerow(["t", "pattern", "nu"] + [f"gamma_x_{i + 1}" for i in range(q)]
               + [f"gamma_c_{i + 1}" for i in range(q)] + [f"residual_{i + 1}" for i in range(q)])
    for r in rows:
        w.writerow([r["t"], r["pattern"], r["nu"], *map(int, r["gamma_x"]),
                    *map(int, r["gamma_c"]), *map(int, r["residuals"])])
    return buf.getvalue()


# -- exact loss game ----------------------------------------------------------------


def loss_game_decide(inst: P3Instance) -> bool:
    """Exact decision of the lossy problem as a safety game.

    The scheduler picks a pattern, then the adversary decides whether the
    slot is lost, subject to every agent's window budget given the recent
    loss history. The scheduler wins if no agent ever waits ``alpha_i``
    slots without a successful service. Solved as a greatest fixed point.
    """
    alphas = np.asarray(inst.alphas)
    bounds = inst.loss_bounds
    q = len(alphas)
    W = int(alphas.max())
    pats = [frozenset(p) for p in inst.base.patterns]

    def succ(state, j, lost):
        d, hist = state
        hist2 = (hist + (int(lost),))[-(W - 1):] if W > 1 else ()
        nd = tuple(0 if (not lost and i in pats[j]) else d[i] + 1 for i in range(q))
        return nd, hist2

    def can_lose(hist):
        seq = list(hist) + [1]
        return _windows_ok(seq, alphas.tolist(), bounds)

    def ok(d):
        return all(d[i] <= alphas[i] - 1 for i in range(q))

    start = (tuple([0] * q), tuple([0] * (W - 1)))
    states, frontier = {start}, [start]
    edges = {}
    while frontier:
        s = frontier.pop()
        opts = []
        for j in range(len(pats)):
            outs = [succ(s, j, False)]
            if can_lose(s[1]):
                outs.append(succ(s, j, True))
            if all(ok(o[0]) for o in outs):
                opts.append(outs)
                for o in outs:
                    if o not in states:
                        states.add(o)
                        frontier.append(o)
        edges[s] = opts
    alive = set(states)
    changed = True
    while changed:
        changed = False
        for s in list(alive):
            if not any(all(o in alive for o in outs) for outs in edges[s]):
                alive.discard(s)
                changed = True
    return start in alive


def admissible_loss_sequences(length: int, alphas, loss_bounds, history=()):
    """All loss sequences of ``length`` slots allowed by the window budgets."""
    for bits in itertools.product((0, 1), repeat=length):
        seq = list(history)
        good = True
        for b in bits:
            seq.append(b)
            if b and not _windows_ok(seq, alphas, loss_bounds):
                good = False
                break
        if good:
            yield bits
