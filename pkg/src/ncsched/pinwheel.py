"""Pinwheel scheduling: density tests, exact decision, heuristic, verifier.

A pinwheel instance is a list of integers ``alphas``; a schedule is an
infinite sequence of slots in which agent ``i`` is served at least once in
every window of ``alphas[i]`` consecutive slots. Agents are 0-based here;
the text formats are 1-based.

The exact decision works on *d-vectors*: ``d[i]`` counts the slots since
agent ``i`` was last served and must stay below ``alphas[i]``. Starting from
the all-zero vector, the reachable d-vectors form a finite graph; the
instance is feasible iff the start lies in its greatest subgraph where every
node keeps an outgoing edge.
"""
from __future__ import annotations

import enum
import itertools
import math
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

DEFAULT_MAX_PRODUCT = 10**8
DEFAULT_MAX_STATES = 5_000_000


class BudgetExceeded(RuntimeError):
    """The exact search would exceed its state or time budget."""


class Verdict(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


# -- schedules -----------------------------------------------------------------


@dataclass(frozen=True)
class CyclicSchedule:
    """Eventually periodic schedule: ``prefix`` once, then ``cycle`` forever.

    ``kind`` tells how slots are read: ``"symbols"`` (one agent index per
    slot), ``"patterns"`` (an index into a pattern list) or ``"tuples"`` (a
    tuple of agent indices served together).
    """

    prefix: tuple
    cycle: tuple
    kind: str = "symbols"

    def __post_init__(self):
        if len(self.cycle) == 0:
            raise ValueError("cycle must be non-empty")
        if self.kind not in ("symbols", "patterns", "tuples"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "cycle", tuple(self.cycle))

    @property
    def period(self) -> int:
        return len(self.cycle)

    def slot(self, t: int):
        """Element used at slot ``t`` (slots are numbered from 1)."""
        if t < 1:
            raise ValueError("slots are numbered from 1")
        k = t - 1
        if k < len(self.prefix):
            return self.prefix[k]
        return self.cycle[(k - len(self.prefix)) % len(self.cycle)]

    def take(self, n: int) -> list:
        return [self.slot(t) for t in range(1, n + 1)]

    def members(self, element, patterns=None) -> frozenset:
        if self.kind == "symbols":
            return frozenset([int(element)])
        if self.kind == "tuples":
            return frozenset(int(a) for a in element)
        if patterns is None:
            raise ValueError("pattern schedules need the pattern list")
        return frozenset(patterns[element])

    def to_text(self) -> str:
        def fmt(e):
            if self.kind == "tuples":
                return "(" + ",".join(str(a + 1) for a in e) + ")"
            return str(e + 1)

        cycle = " ".join(map(fmt, self.cycle))
        if not self.prefix:
            return cycle
        return " ".join(map(fmt, self.prefix)) + " ; " + cycle

    @classmethod
    def from_text(cls, text: str, kind: str = "symbols") -> CyclicSchedule:
        if ";" not in text:
            pre, cyc = "", text
        else:
            pre, cyc = text.split(";", 1)

        def parse(part):
            if kind == "tuples":
                return [tuple(int(a) - 1 for a in re.split(r"[,\s]+", m.strip()) if a)
                        for m in re.findall(r"\(([^)]*)\)", part)]
            return [int(tok) - 1 for tok in part.split()]

        return cls(tuple(parse(pre)), tuple(parse(cyc)), kind)


def density(alphas) -> Fraction:
    """Sum of ``1/alpha`` as an exact fraction.

    >>> density([2, 3, 12])
    Fraction(11, 12)
    """
    return sum((Fraction(1, int(a)) for a in alphas), Fraction(0))


def threshold_check(alphas) -> Verdict:
    """Density-based verdict; ``UNKNOWN`` when no known condition applies."""
    alphas = [int(a) for a in alphas]
    rho = density(alphas)
    if rho > 1:
        return Verdict.INFEASIBLE
    if rho <= Fraction(3, 4):
        return Verdict.FEASIBLE
    if rho <= Fraction(5, 6) and 2 in alphas:
        return Verdict.FEASIBLE
    if rho <= Fraction(5, 6) and len(alphas) == 3:
        return Verdict.FEASIBLE
    if len(alphas) == 2:
        return Verdict.FEASIBLE
    return Verdict.UNKNOWN


def verify_schedule(alphas, schedule: CyclicSchedule, patterns=None) -> bool:
    """Check that every agent is served within its window forever.

    The d-vector is simulated from all zeros over the prefix and two passes
    of the cycle. Each agent must occur in the cycle; after one pass the
    d-vector is then periodic, so the second pass covers the steady state.
    """
    alphas = np.asarray([int(a) for a in alphas])
    q = len(alphas)
    cycle_sets = [schedule.members(e, patterns) for e in schedule.cycle]
    seen = frozenset().union(*cycle_sets)
    if any(i not in seen for i in range(q)):
        return False
    if any(a < 0 or a >= q for s in cycle_sets for a in s):
        return False
    d = np.zeros(q, dtype=np.int64)
    for e in list(schedule.prefix) + list(schedule.cycle) * 2:
        served = schedule.members(e, patterns)
        if any(a < 0 or a >= q for a in served):
            return False
        d += 1
        d[list(served)] = 0
        if np.any(d > alphas - 1):
            return False
    return True


def window_scan(alphas, sequence, patterns=None, kind="symbols") -> bool:
    """Brute-force check of a finite periodic sequence: every cyclic window of
    ``alpha_i`` slots contains agent ``i``."""
    sched = CyclicSchedule((), tuple(sequence), kind)
    sets = [sched.members(e, patterns) for e in sequence]
    T = len(sets)
    for i, a in enumerate(alphas):
        for start in range(T):
            if not any(i in sets[(start + k) % T] for k in range(a)):
                return False
    return True


# -- exact search ---------------------------------------------------------------


@dataclass
class SearchResult:
    feasible: bool
    schedule: CyclicSchedule | None
    n_states: int
    n_alive: int
    stats: dict = field(default_factory=dict)


def _action_masks(actions, q: int) -> np.ndarray:
    masks = np.zeros((len(actions), q), dtype=bool)
    for j, members in enumerate(actions):
        masks[j, list(members)] = True
    return masks


def safe_state_search(alphas, actions, kind: str = "symbols", symmetric: bool = False,
                      max_product: int = DEFAULT_MAX_PRODUCT,
                      max_states: int = DEFAULT_MAX_STATES,
                      budget_ms: float | None = None) -> SearchResult:
    """Greatest-fixed-point search over d-vectors.

    ``actions`` lists, per action, the agents it serves. With ``symmetric``
    set, agents sharing an ``alpha`` are interchangeable (valid only for
    singleton actions) and d-vectors are sorted within such groups.
    """
    t0 = time.perf_counter()
    alphas = np.asarray([int(a) for a in alphas], dtype=np.int64)
    q = len(alphas)
    if q == 0:
        return SearchResult(True, None, 1, 1)
    if np.any(alphas < 1):
        raise ValueError("alphas must be positive integers")
    if math.prod(int(a) for a in alphas) > max_product:
        raise BudgetExceeded(f"state space {math.prod(int(a) for a in alphas)} exceeds {max_product}")
    masks = _action_masks(actions, q)
    if not np.all(masks.any(axis=0)):
        return SearchResult(False, None, 0, 0, {"reason": "agent not covered"})

    weights = np.cumprod(np.concatenate([[1], alphas[:-1]])).astype(np.int64)
    groups = []
    if symmetric:
        for a in np.unique(alphas):
            idx = np.flatnonzero(alphas == a)
            if idx.size > 1:
                groups.append(idx)

    def canon(D):
        for idx in groups:
            D[:, idx] = np.sort(D[:, idx], axis=1)
        return D

    def check_budget():
        if budget_ms is not None and (time.perf_counter() - t0) * 1e3 > budget_ms:
            raise BudgetExceeded("time budget exhausted")

    limit = alphas - 1
    frontier = np.zeros((1, q), dtype=np.int64)
    known = np.zeros(1, dtype=np.int64)
    layer_codes, layer_succ = [], []
    while frontier.shape[0]:
        check_budget()
        succ = np.full((frontier.shape[0], len(masks)), -1, dtype=np.int64)
        for j, m in enumerate(masks):
            D = np.where(m, 0, frontier + 1)
            ok = np.all(D <= limit, axis=1)
            if groups:
                D = canon(D)
            succ[ok, j] = D[ok] @ weights
        layer_codes.append(frontier @ weights)
        layer_succ.append(succ)
        cand = np.unique(succ[succ >= 0])
        new = np.setdiff1d(cand, known, assume_unique=True)
        known = np.union1d(known, new)
        if known.size > max_states:
            raise BudgetExceeded(f"more than {max_states} reachable states")
        frontier = (new[:, None] // weights) % alphas

    codes = np.concatenate(layer_codes)
    succ_codes = np.concatenate(layer_succ)
    order = np.argsort(codes)
    codes = codes[order]
    succ_codes = succ_codes[order]
    succ = np.where(succ_codes >= 0, np.searchsorted(codes, succ_codes), -1)

    alive = np.ones(codes.size, dtype=bool)
    valid = succ >= 0
    safe_idx = np.where(valid, succ, 0)
    while True:
        check_budget()
        keep = alive & np.any(valid & alive[safe_idx], axis=1)
        if np.array_equal(keep, alive):
            break
        alive = keep
    start = int(np.searchsorted(codes, 0))
    stats = {"millis": (time.perf_counter() - t0) * 1e3}
    if not alive[start]:
        return SearchResult(False, None, int(codes.size), int(alive.sum()), stats)

    def is_alive(d):
        c = canon(d[None, :].copy())[0] @ weights if groups else d @ weights
        k = np.searchsorted(codes, c)
        return k < codes.size and codes[k] == c and alive[k]

    schedule = _extract_cycle(alphas, masks, is_alive, kind, actions)
    short = _short_cycle(alphas, masks, kind, actions, schedule.period + len(schedule.prefix))
    return SearchResult(True, short or schedule, int(codes.size), int(alive.sum()), stats)


def _short_cycle(alphas, masks, kind, actions, longer_than: int,
                 max_candidates: int = 50_000) -> CyclicSchedule | None:
    """Shortest action cycle whose circular gaps fit every window.

    Periods are tried in increasing order while the number of candidate
    cycles stays within ``max_candidates``; the first valid cycle in
    lexicographic action order wins. Such a cycle is valid from slot 1.
    """
    n_act = len(masks)
    spent = 0
    for period in range(1, longer_than):
        spent += n_act ** period
        if spent > max_candidates:
            return None
        for combo in itertools.product(range(n_act), repeat=period):
            if combo[0] != min(combo):
                continue  # some rotation starts with a smaller action
            served = masks[list(combo)]
            if _circular_gaps_ok(served, alphas):
                labels = [_label(actions[j], j, kind) for j in combo]
                return CyclicSchedule((), tuple(labels), kind)
    return None


def _circular_gaps_ok(served: np.ndarray, alphas) -> bool:
    period = served.shape[0]
    for i, a in enumerate(alphas):
        pos = np.flatnonzero(served[:, i])
        if pos.size == 0:
            return False
        gaps = np.diff(np.append(pos, pos[0] + period))
        if gaps.max() > a:
            return False
    return True


def _extract_cycle(alphas, masks, is_alive, kind, actions) -> CyclicSchedule:
    """Walk from the zero state through live states until a state repeats.

    At each step the live successor serving the tightest agent is taken
    (smallest remaining slack, ties to the lowest action index). Agents
    served in the previous slot do not count towards an action's urgency.
    """
    q = len(alphas)
    big = int(alphas.max()) + 1
    d = np.zeros(q, dtype=np.int64)
    seen = {d.tobytes(): 0}
    taken = []
    while True:
        slack = np.where(d > 0, alphas - 1 - d, big)
        keys = [(int(slack[m].min()), j) for j, m in enumerate(masks)]
        for _, j in sorted(keys):
            nxt = np.where(masks[j], 0, d + 1)
            if np.all(nxt <= alphas - 1) and is_alive(nxt):
                break
        else:  # pragma: no cover - the live set guarantees a successor
            raise RuntimeError("live state without live successor")
        taken.append(j)
        d = nxt
        key = d.tobytes()
        if key in seen:
            i = seen[key]
            labels = [_label(actions[j], j, kind) for j in taken]
            return CyclicSchedule(tuple(labels[:i]), tuple(labels[i:]), kind)
        seen[key] = len(taken)


def _label(members, j, kind):
    if kind == "symbols":
        return int(next(iter(members)))
    if kind == "tuples":
        return tuple(sorted(int(a) for a in members))
    return j


def decide_exact(alphas, max_product: int = DEFAULT_MAX_PRODUCT,
                 max_states: int = DEFAULT_MAX_STATES,
                 budget_ms: float | None = None,
                 symmetric: bool = True) -> CyclicSchedule | None:
    """Exact pinwheel decision; returns a cyclic schedule or ``None``.

    Raises ``BudgetExceeded`` when the search exceeds its budget.
    """
    alphas = [int(a) for a in alphas]
    if density(alphas) > 1:
        return None
    res = safe_state_search(alphas, [(i,) for i in range(len(alphas))], "symbols",
                            symmetric=symmetric, max_product=max_product,
                            max_states=max_states, budget_ms=budget_ms)
    return res.schedule if res.feasible else None


def double_integer_heuristic(alphas) -> CyclicSchedule | None:
    """Schedule via rounding each alpha down to a power of two.

    Agents are packed into residue classes modulo their rounded window, which
    always works when the rounded density is at most one.
    """
    alphas = [int(a) for a in alphas]
    if not alphas:
        return None
    rounded = [1 << (a.bit_length() - 1) for a in alphas]
    if density(rounded) > 1:
        return None
    period = max(rounded)
    free = [(0, 1)]  # (residue, modulus)
    owner = [None] * period
    for i in sorted(range(len(alphas)), key=lambda i: (rounded[i], i)):
        m = rounded[i]
        cands = [c for c in free if c[1] <= m]
        r, mod = max(cands, key=lambda c: (c[1], -c[0]))
        free.remove((r, mod))
        while mod < m:
            free.append((r + mod, 2 * mod))
            mod *= 2
        for t in range(r, period, m):
            owner[t] = i
    filler = min(range(len(alphas)), key=lambda i: (rounded[i], i))
    cycle = tuple(filler if o is None else o for o in owner)
    return CyclicSchedule((), cycle, "symbols")


def instance_to_text(alphas) -> str:
    return " ".join(str(int(a)) for a in alphas)


def instance_from_text(text: str) -> list[int]:
    vals = [int(tok) for tok in text.split()]
    if any(v < 1 for v in vals):
        raise ValueError("alphas must be positive integers")
    return vals
