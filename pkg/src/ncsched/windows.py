"""Windows scheduling: pinwheel scheduling over ``m_c`` parallel channels.

Each slot serves a tuple of at most ``m_c`` agents. The main tool is the
reduction that multiplies every window by ``m_c``, solves a single-channel
pinwheel instance and cuts its symbol stream into consecutive ``m_c``-tuples.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations


from .pinwheel import (
    BudgetExceeded,
    CyclicSchedule,
    Verdict,
    decide_exact,
    density,
    safe_state_search,
    threshold_check,
    verify_schedule,
    DEFAULT_MAX_PRODUCT,
    DEFAULT_MAX_STATES,
)


@dataclass(frozen=True)
class WspInstance:
    m_c: int
    alphas: tuple

    def __post_init__(self):
        if int(self.m_c) < 1:
            raise ValueError("m_c must be at least 1")
        object.__setattr__(self, "m_c", int(self.m_c))
        object.__setattr__(self, "alphas", tuple(int(a) for a in self.alphas))
        if any(a < 1 for a in self.alphas):
            raise ValueError("alphas must be positive integers")

    @property
    def q(self) -> int:
        return len(self.alphas)

    @property
    def density(self) -> Fraction:
        return density(self.alphas)

    def to_text(self) -> str:
        return f"{self.m_c} : " + " ".join(map(str, self.alphas))

    @classmethod
    def from_text(cls, text: str) -> WspInstance:
        m, _, rest = text.partition(":")
        if not rest.strip():
            raise ValueError("expected 'm_c : a1 a2 ...'")
        return cls(int(m), tuple(int(t) for t in rest.split()))


@dataclass(frozen=True)
class ChannelAllocation:
    """``channels[k]`` lists the agents that always use channel ``k``."""

    channels: tuple

    def assignment(self) -> dict:
        return {a: k for k, ch in enumerate(self.channels) for a in ch}


@dataclass
class PerfectSchedule:
    allocation: ChannelAllocation
    schedules: list  # one pinwheel schedule per channel, in original agent indices

    def to_tuple_schedule(self) -> CyclicSchedule:
        """Merge the channel schedules slot by slot."""
        used = [s for s in self.schedules if s is not None]
        pre = max(len(s.prefix) for s in used)
        period = math.lcm(*(s.period for s in used))
        slots = [tuple(sorted({s.slot(t) for s in used})) for t in range(1, pre + period + 1)]
        return CyclicSchedule(tuple(slots[:pre]), tuple(slots[pre:]), "tuples")


def wsp_thresholds(inst: WspInstance) -> Verdict:
    """Density verdict for a multi-channel instance."""
    if inst.m_c == 1:
        return threshold_check(inst.alphas)
    rho, m = inst.density, inst.m_c
    if rho > m:
        return Verdict.INFEASIBLE
    if rho <= Fraction(3, 4) * m:
        return Verdict.FEASIBLE
    if inst.q == 3 and rho <= Fraction(5, 6) * m:
        return Verdict.FEASIBLE
    return Verdict.UNKNOWN


def reduce_to_pp(inst: WspInstance) -> list[int]:
    """Single-channel windows ``m_c * alpha``."""
    return [inst.m_c * a for a in inst.alphas]


def chunk_schedule(pp: CyclicSchedule, m_c: int) -> CyclicSchedule:
    """Cut a symbol schedule into consecutive ``m_c``-tuples.

    Repeated symbols inside one tuple collapse. The tuple stream becomes
    periodic once the symbol prefix is consumed, with period
    ``L / gcd(L, m_c)`` tuples for a symbol cycle of length ``L``.
    """
    L = pp.period
    n_pre = -(-len(pp.prefix) // m_c)
    n_cyc = L // math.gcd(L, m_c)
    stream = pp.take(m_c * (n_pre + n_cyc))
    tuples = [tuple(sorted(set(stream[m_c * k:m_c * (k + 1)]))) for k in range(n_pre + n_cyc)]
    return CyclicSchedule(tuple(tuples[:n_pre]), tuple(tuples[n_pre:]), "tuples")


def verify_wsp(inst: WspInstance, schedule: CyclicSchedule) -> bool:
    """Windows-schedule check: tuples hold at most ``m_c`` agents and every
    agent is served within its window."""
    if schedule.kind != "tuples":
        raise ValueError("expected a tuple schedule")
    for e in schedule.prefix + schedule.cycle:
        if len(set(e)) > inst.m_c:
            return False
    return verify_schedule(inst.alphas, schedule)


def wsp_via_pp(inst: WspInstance, pp_solver=None, **budget) -> CyclicSchedule | None:
    """Scale the windows by ``m_c``, solve the pinwheel instance, chunk it."""
    solver = pp_solver or (lambda a: decide_exact(a, **budget))
    pp = solver(reduce_to_pp(inst))
    if pp is None:
        return None
    sched = chunk_schedule(pp, inst.m_c)
    if not verify_wsp(inst, sched):  # pragma: no cover - guaranteed by construction
        raise RuntimeError("chunked schedule failed verification")
    return sched


def zeta_instance(inst: WspInstance) -> list[int]:
    a = sorted(inst.alphas)
    m = inst.m_c
    return [m * x if i < m else m * x + m - 1 for i, x in enumerate(a)]


def zeta_necessary(inst: WspInstance, **budget) -> bool | None:
    """Necessary condition for windows feasibility.

    Returns ``False`` when the condition certifies infeasibility, ``True``
    when it does not, and ``None`` when the check ran out of budget.
    """
    zeta = zeta_instance(inst)
    try:
        return decide_exact(zeta, **budget) is not None
    except BudgetExceeded:
        return None


def wsp_exact(inst: WspInstance, max_product: int = DEFAULT_MAX_PRODUCT,
              max_states: int = DEFAULT_MAX_STATES,
              budget_ms: float | None = None) -> CyclicSchedule | None:
    """Exact decision by searching over all ``m_c``-subsets per slot."""
    if inst.density > inst.m_c:
        return None
    k = min(inst.m_c, inst.q)
    actions = list(combinations(range(inst.q), k))
    res = safe_state_search(inst.alphas, actions, "tuples", max_product=max_product,
                            max_states=max_states, budget_ms=budget_ms)
    return res.schedule if res.feasible else None


def _set_partitions(items, k):
    """Partitions of ``items`` into at most ``k`` unlabeled blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest, k):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        if len(part) < k:
            yield [[first]] + part


def channel_allocations(inst: WspInstance, distinct_values: bool = False):
    """Allocations of agents to channels with every channel density at most 1.

    With ``distinct_values`` set, allocations that differ only by swapping
    agents with equal windows are reported once.
    """
    seen = set()
    for part in _set_partitions(list(range(inst.q)), inst.m_c):
        if any(density([inst.alphas[a] for a in block]) > 1 for block in part):
            continue
        if distinct_values:
            key = tuple(sorted(tuple(sorted(inst.alphas[a] for a in b)) for b in part))
            if key in seen:
                continue
            seen.add(key)
        yield ChannelAllocation(tuple(tuple(b) for b in part))


def perfect_schedule_decide(inst: WspInstance, max_q: int = 20, **budget) -> PerfectSchedule | None:
    """Search for a schedule in which no agent changes channel."""
    if inst.q > max_q:
        raise BudgetExceeded(f"{inst.q} agents exceed the enumeration limit {max_q}")
    cache = {}
    for alloc in channel_allocations(inst, distinct_values=True):
        for block in alloc.channels:
            key = tuple(sorted(inst.alphas[a] for a in block))
            if key not in cache:
                cache[key] = decide_exact(list(key), **budget)
            if cache[key] is None:
                break
        else:
            return _perfect_witness(inst, alloc)
    return None


def _perfect_witness(inst: WspInstance, alloc: ChannelAllocation) -> PerfectSchedule:
    out = []
    for block in alloc.channels:
        s = decide_exact([inst.alphas[a] for a in block])
        out.append(CyclicSchedule(tuple(block[e] for e in s.prefix),
                                  tuple(block[e] for e in s.cycle), "symbols"))
    return PerfectSchedule(alloc, out)


def tuples_from_text(text: str) -> list[tuple]:
    return [tuple(int(a) - 1 for a in re.split(r"[,\s]+", m.strip()) if a)
            for m in re.findall(r"\(([^)]*)\)", text)]
