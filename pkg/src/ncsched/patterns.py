"""Scheduling over arbitrary connection patterns.

A *connection pattern* is a set of agents that may communicate in the same
slot. Given the patterns and a window ``alpha_i`` per agent, a schedule picks
one pattern per slot so that each agent is served at least once in every
``alpha_i`` consecutive slots.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .pinwheel import (
    BudgetExceeded,
    CyclicSchedule,
    decide_exact,
    density,
    double_integer_heuristic,
    safe_state_search,
    threshold_check,
    verify_schedule,
    Verdict,
    DEFAULT_MAX_PRODUCT,
    DEFAULT_MAX_STATES,
)
from .windows import WspInstance, wsp_exact, wsp_thresholds, wsp_via_pp


@dataclass(frozen=True)
class P1Instance:
    alphas: tuple
    patterns: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(int(a) for a in self.alphas))
        pats = tuple(frozenset(int(a) for a in p) for p in self.patterns)
        object.__setattr__(self, "patterns", pats)
        if any(a < 1 for a in self.alphas):
            raise ValueError("alphas must be positive integers")
        for p in pats:
            if not p:
                raise ValueError("patterns must be non-empty")
            if min(p) < 0 or max(p) >= self.q:
                raise ValueError(f"pattern {sorted(p)} refers to unknown agents")

    @property
    def q(self) -> int:
        return len(self.alphas)

    @property
    def covered(self) -> bool:
        """Every agent belongs to some pattern."""
        return frozenset().union(*self.patterns) == frozenset(range(self.q)) if self.patterns else self.q == 0

    def verify(self, schedule: CyclicSchedule) -> bool:
        return verify_schedule(self.alphas, schedule, self.patterns)

    def to_text(self) -> str:
        lines = [str(self.q), " ".join(map(str, self.alphas))]
        lines += [" ".join(str(a + 1) for a in sorted(p)) for p in self.patterns]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> P1Instance:
        lines = [ln for ln in (s.strip() for s in text.splitlines()) if ln and not ln.startswith("#")]
        q = int(lines[0])
        alphas = tuple(int(t) for t in lines[1].split())
        if len(alphas) != q:
            raise ValueError(f"expected {q} alphas, got {len(alphas)}")
        pats = tuple(tuple(int(t) - 1 for t in ln.split()) for ln in lines[2:])
        return cls(alphas, pats)

    @classmethod
    def singletons(cls, alphas) -> P1Instance:
        return cls(tuple(alphas), tuple((i,) for i in range(len(alphas))))


@dataclass
class Assignment:
    """Which pattern is responsible for each agent.

    ``owner[i]`` is the pattern index serving agent ``i``; ``rho_hat[j]`` is
    the density pattern ``j`` must be scheduled with (0 when unused).
    """

    owner: tuple
    rho_hat: tuple
    exact: bool = True

    @property
    def eta(self) -> np.ndarray:
        l = len(self.rho_hat)
        E = np.zeros((len(self.owner), l), dtype=int)
        for i, j in enumerate(self.owner):
            E[i, j] = 1
        return E

    @property
    def used(self) -> list[int]:
        return [j for j, r in enumerate(self.rho_hat) if r > 0]

    @property
    def alpha_hat(self) -> dict:
        return {j: int(1 / self.rho_hat[j]) for j in self.used}

    @property
    def total(self) -> Fraction:
        return sum(self.rho_hat, Fraction(0))


def assign_patterns(inst: P1Instance, max_nodes: int = 2_000_000) -> Assignment:
    """Minimum total density assignment of agents to covering patterns.

    Depth-first branch and bound: agents are placed in order of decreasing
    demand, each into one pattern that contains it; a pattern's density is
    the largest ``1/alpha`` among its agents. Ties on the total go to fewer
    used patterns, then to the lexicographically smallest density vector.
    Falls back to a greedy assignment (``exact=False``) past ``max_nodes``.
    """
    q, l = inst.q, len(inst.patterns)
    options = [[j for j, p in enumerate(inst.patterns) if i in p] for i in range(q)]
    if any(not o for o in options):
        raise ValueError("some agent is not covered by any pattern")
    order = sorted(range(q), key=lambda i: (inst.alphas[i], i))
    inv = [Fraction(1, a) for a in inst.alphas]

    best = {"key": None, "owner": None}
    owner = [None] * q
    rho = [Fraction(0)] * l
    nodes = 0

    def key_of(r):
        return (sum(r, Fraction(0)), sum(1 for x in r if x > 0), tuple(r))

    def dfs(k, total, used):
        nonlocal nodes
        nodes += 1
        if nodes > max_nodes:
            raise BudgetExceeded
        if best["key"] is not None and (total, used) > best["key"][:2]:
            return
        if k == q:
            key = key_of(rho)
            if best["key"] is None or key < best["key"]:
                best["key"], best["owner"] = key, tuple(owner)
            return
        i = order[k]
        for j in options[i]:
            old = rho[j]
            new = max(old, inv[i])
            rho[j] = new
            owner[i] = j
            dfs(k + 1, total + new - old, used + (old == 0))
            rho[j] = old
        owner[i] = None

    try:
        dfs(0, Fraction(0), 0)
        exact = True
        chosen = best["owner"]
    except BudgetExceeded:
        exact = False
        chosen = _greedy_owner(inst, options, order, inv)
    r = [Fraction(0)] * l
    for i, j in enumerate(chosen):
        r[j] = max(r[j], inv[i])
    return Assignment(tuple(chosen), tuple(r), exact)


def _greedy_owner(inst, options, order, inv):
    rho = [Fraction(0)] * len(inst.patterns)
    owner = [None] * inst.q
    for i in order:
        j = min(options[i], key=lambda j: (max(rho[j], inv[i]) - rho[j], j))
        rho[j] = max(rho[j], inv[i])
        owner[i] = j
    return owner


def algorithm1(inst: P1Instance, pp_solver: str = "exact", **budget) -> CyclicSchedule | None:
    """Assign agents to patterns, then solve the pinwheel instance of the
    used patterns and replay it as a pattern schedule."""
    asg = assign_patterns(inst)
    used = asg.used
    alpha_hat = [asg.alpha_hat[j] for j in used]
    if pp_solver == "exact":
        pp = decide_exact(alpha_hat, **budget)
    elif pp_solver == "double_integer":
        pp = double_integer_heuristic(alpha_hat)
    else:
        raise ValueError(f"unknown pinwheel solver {pp_solver!r}")
    if pp is None:
        return None
    sched = CyclicSchedule(tuple(used[s] for s in pp.prefix), tuple(used[s] for s in pp.cycle), "patterns")
    if not inst.verify(sched):  # pragma: no cover - guaranteed by construction
        raise RuntimeError("pattern schedule failed verification")
    return sched


def exact_p1(inst: P1Instance, max_product: int = DEFAULT_MAX_PRODUCT,
             max_states: int = DEFAULT_MAX_STATES,
             budget_ms: float | None = None) -> CyclicSchedule | None:
    """Exact decision: safe-state search with the patterns as actions."""
    if not inst.covered:
        return None
    res = safe_state_search(inst.alphas, [sorted(p) for p in inst.patterns], "patterns",
                            max_product=max_product, max_states=max_states, budget_ms=budget_ms)
    return res.schedule if res.feasible else None


# -- random instances and benchmarks -----------------------------------------------

SECTION_A = {"q_range": (2, 4), "alpha_range": (2, 8), "pattern_count_range": (1, 4), "m_c_mode": None}
SECTION_A_LARGE = {"q_range": (2, 11), "alpha_range": (2, 21), "pattern_count_range": (1, 11), "m_c_mode": None}
SECTION_B = {"q_range": (5, 5), "alpha_range": (2, 7), "m_c_mode": "min"}


def random_instance(params: dict, seed):
    """Seeded random instance.

    With ``m_c_mode`` unset, a pattern instance: random non-empty patterns,
    and any agent left uncovered is added to a random pattern so every
    instance is meaningful. With ``m_c_mode="min"``, a windows instance using
    the smallest channel count the density allows.
    """
    rng = np.random.default_rng(seed)
    q = int(rng.integers(params["q_range"][0], params["q_range"][1] + 1))
    lo, hi = params["alpha_range"]
    alphas = tuple(int(a) for a in rng.integers(lo, hi + 1, size=q))
    if params.get("m_c_mode"):
        m_c = math.ceil(density(alphas))
        return WspInstance(max(m_c, 1), alphas)
    l = int(rng.integers(params["pattern_count_range"][0], params["pattern_count_range"][1] + 1))
    pats = []
    for _ in range(l):
        mask = rng.random(q) < 0.5
        if not mask.any():
            mask[rng.integers(q)] = True
        pats.append(set(np.flatnonzero(mask).tolist()))
    for i in range(q):
        if not any(i in p for p in pats):
            pats[int(rng.integers(l))].add(i)
    return P1Instance(alphas, tuple(tuple(sorted(p)) for p in pats))


METHODS = ("M1", "M2", "M3")


@dataclass
class MethodResult:
    instance_id: int
    method: str
    verdict: str
    millis: float
    cycle_len: int | None
    schedule: CyclicSchedule | None = None
    extra: dict = field(default_factory=dict)


def run_method(inst, method: str, budget: dict):
    """Returns (schedule or None, undecided flag)."""
    try:
        if isinstance(inst, WspInstance):
            if method == "M1":
                return wsp_exact(inst, **budget), False
            if method == "M2":
                return wsp_via_pp(inst, **budget), False
            return wsp_via_pp(inst, pp_solver=double_integer_heuristic), False
        if method == "M1":
            return exact_p1(inst, **budget), False
        if method == "M2":
            return algorithm1(inst, "exact", **budget), False
        return algorithm1(inst, "double_integer"), False
    except BudgetExceeded:
        return None, True


def _verify_any(inst, sched) -> bool:
    if isinstance(inst, WspInstance):
        from .windows import verify_wsp
        return verify_wsp(inst, sched)
    return inst.verify(sched)


def evaluate_instance(k: int, inst, methods=METHODS, budget: dict | None = None) -> list[MethodResult]:
    budget = budget or {}
    out = []
    for m in methods:
        t0 = time.perf_counter()
        sched, undecided = run_method(inst, m, budget)
        ms = (time.perf_counter() - t0) * 1e3
        if undecided:
            verdict = "undecided"
        elif sched is None:
            verdict = "rejected"
        else:
            verdict = "accepted" if _verify_any(inst, sched) else "false_positive"
        extra = {}
        if isinstance(inst, P1Instance):
            try:
                extra["rho_hat"] = assign_patterns(inst).total
            except ValueError:
                extra["rho_hat"] = None
        else:
            extra["threshold"] = wsp_thresholds(inst)
        out.append(MethodResult(k, m, verdict, ms, sched.period if sched else None, sched, extra))
    return out


@dataclass
class BenchReport:
    results: list

    def counts(self) -> dict:
        c = {m: {"accepted": 0, "rejected": 0, "undecided": 0, "false_positive": 0} for m in METHODS}
        for r in self.results:
            c[r.method][r.verdict] += 1
        return c

    def accepted(self, method: str) -> set:
        return {r.instance_id for r in self.results if r.method == method and r.verdict == "accepted"}

    def with_verdict(self, method: str, verdict: str) -> set:
        return {r.instance_id for r in self.results if r.method == method and r.verdict == verdict}

    def nesting_holds(self) -> bool:
        """No instance accepted by a weaker method is rejected by a stronger one.

        An undecided stronger method does not contradict the nesting.
        """
        for weak, strong in (("M3", "M2"), ("M2", "M1"), ("M3", "M1")):
            if self.accepted(weak) & self.with_verdict(strong, "rejected"):
                return False
        return True

    def false_positives(self) -> int:
        return sum(r.verdict == "false_positive" for r in self.results)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance_id", "method", "verdict", "millis", "cycle_len"])
        for r in sorted(self.results, key=lambda r: (r.instance_id, METHODS.index(r.method))):
            w.writerow([r.instance_id, r.method, r.verdict, f"{r.millis:.3f}",
                        "" if r.cycle_len is None else r.cycle_len])
        return buf.getvalue()


def compare_methods(instances, methods=METHODS, budget: dict | None = None, jobs: int = 1) -> BenchReport:
    """Run every method on every instance and collect verdicts.

    Any schedule a method returns is re-verified; a failing one is reported
    as ``false_positive``.
    """
    instances = list(instances)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(lambda kv: evaluate_instance(kv[0], kv[1], methods, budget),
                                enumerate(instances)))
    else:
        parts = [evaluate_instance(k, inst, methods, budget) for k, inst in enumerate(instances)]
    return BenchReport([r for p in parts for r in p])


def threshold_consistent(inst) -> bool | None:
    """Does the density verdict agree with the exact decision?

    Pattern instances are judged on the assigned pattern windows, where only
    a feasible verdict is conclusive. ``None`` when the exact decision ran
    out of budget.
    """
    try:
        if isinstance(inst, WspInstance):
            verdict = wsp_thresholds(inst)
            feasible = wsp_exact(inst) is not None
        else:
            verdict = threshold_check(assign_patterns(inst).alpha_hat.values())
            if verdict is not Verdict.FEASIBLE:
                return True
            feasible = exact_p1(inst) is not None
    except BudgetExceeded:
        return None
    if verdict is Verdict.FEASIBLE:
        return feasible
    if verdict is Verdict.INFEASIBLE:
        return not feasible
    return True
