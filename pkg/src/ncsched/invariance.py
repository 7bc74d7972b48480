"""Robust invariant sets, reachable sets and safe time intervals.

An agent switches between two affine update laws: the *connected* law, used
when its packet gets through, and the *disconnected* law otherwise. The safe
time interval of an agent is the longest run of disconnected steps that can
follow one connected step without leaving the maximal robust invariant set.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    EPS_CON,
    GeometryError,
    Polytope,
    canonicalize,
    contains,
    equal,
    intersect,
    is_empty,
    minkowski_sum,
    affine_image,
)

DEFAULT_MAX_ITER = 500
DEFAULT_CAP = 1000
DIVERGENCE_LIMIT = 1e6


class DivergedError(GeometryError):
    pass


class InvarianceStatus(enum.Enum):
    CONVERGED = "converged"
    NOT_CONVERGED = "not_converged"
    DEGENERATE = "degenerate"
    EMPTY = "empty"


@dataclass(frozen=True)
class AffineLaw:
    """``z+ = M z + E v + c``."""

    M: np.ndarray
    E: np.ndarray
    c: np.ndarray | None = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        E = np.asarray(self.E, dtype=float)
        if E.ndim == 1:
            E = E.reshape(-1, 1)
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"state matrix must be square, got {M.shape}")
        if E.shape[0] != M.shape[0]:
            raise ValueError(f"disturbance matrix has {E.shape[0]} rows, expected {M.shape[0]}")
        c = np.zeros(M.shape[0]) if self.c is None else np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def __call__(self, z, v) -> np.ndarray:
        return self.M @ z + self.E @ np.atleast_1d(v) + self.c


@dataclass(frozen=True)
class ModePair:
    """Connected and disconnected update laws of one agent.

    ``admissible`` is the constraint set the invariant set is carved from;
    ``blocks`` names the slices of the augmented state (``x``, ``xhat``, ...).
    """

    connected: AffineLaw
    disconnected: AffineLaw
    disturbance_set: Polytope
    admissible: Polytope
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.connected.dim
        if self.disconnected.dim != n:
            raise ValueError("connected and disconnected laws differ in dimension")
        p = self.disturbance_set.dim
        for law in (self.connected, self.disconnected):
            if law.E.shape[1] != p:
                raise ValueError(f"disturbance matrix has {law.E.shape[1]} columns, set has dim {p}")
        if self.admissible.dim != n:
            raise ValueError("admissible set dimension does not match the state")
        if not self.disturbance_set.is_bounded() or is_empty(self.disturbance_set):
            raise ValueError("disturbance set must be bounded and non-empty")
        if not self.disturbance_set.contains_point(np.zeros(p)):
            warnings.warn("disturbance set does not contain the origin", stacklevel=2)

    @property
    def dim_z(self) -> int:
        return self.connected.dim

    def law(self, connected: bool) -> AffineLaw:
        return self.connected if connected else self.disconnected


@dataclass
class InvariantResult:
    polytope: Polytope
    status: InvarianceStatus
    iterations: int

    @property
    def converged(self) -> bool:
        return self.status is InvarianceStatus.CONVERGED


@dataclass
class SafeTimeResult:
    alpha: int
    witness_chain: list
    invariant_set: Polytope
    capped: bool = False


# -- sets defined through their support function -----------------------------


class ReachSet:
    """``{M x + c + sum_k G_k v_k : x in base, v_k in V_k}`` kept implicit.

    Support queries are exact and cheap; vertices and an H-representation are
    produced on demand.
    """

    def __init__(self, base: Polytope, M=None, c=None, generators=()):
        self.base = base
        self.M = np.eye(base.dim) if M is None else np.asarray(M, dtype=float)
        self.c = np.zeros(self.M.shape[0]) if c is None else np.asarray(c, dtype=float)
        self.generators = list(generators)
        self._vertices = []

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def step(self, law: AffineLaw, V: Polytope) -> ReachSet:
        gens = [(law.M @ G, W) for G, W in self.generators]
        if np.any(law.E):
            gens.append((law.E, V))
        return ReachSet(self.base, law.M @ self.M, law.M @ self.c + law.c, gens)

    def support(self, direction) -> float:
        a = np.asarray(direction, dtype=float)
        value = self.base.support(self.M.T @ a) + float(a @ self.c)
        for G, W in self.generators:
            value += W.support(G.T @ a)
        return value

    def vertices(self) -> np.ndarray:
        if not self._vertices:
            P = affine_image(self.base, self.M, self.c)
            for G, W in self.generators:
                P = minkowski_sum(P, affine_image(W, G))
            self._vertices.append(P.vertices())
        return self._vertices[0]

    def to_polytope(self) -> Polytope:
        return Polytope.from_vertices(self.vertices())


# -- operations --------------------------------------------------------------


def _disturbance_shift(rows: np.ndarray, E: np.ndarray, V: Polytope) -> np.ndarray:
    Vv = V.vertices()
    return np.max(rows @ E @ Vv.T, axis=1)


def pre_set(S: Polytope, law: AffineLaw, V: Polytope) -> Polytope:
    """States mapped into ``S`` by ``law`` for every disturbance in ``V``."""
    if is_empty(S):
        return Polytope.empty(law.dim)
    shift = _disturbance_shift(S.A, law.E, V)
    return Polytope(S.A @ law.M, S.b - shift - S.A @ law.c)


def _chebyshev_radius(P: Polytope) -> float:
    return P.chebyshev_ball()[1]


def max_robust_invariant(admissible: Polytope, law: AffineLaw, V: Polytope,
                         max_iter: int = DEFAULT_MAX_ITER,
                         degenerate_radius: float = 1e-6) -> InvariantResult:
    """Largest subset of ``admissible`` kept invariant by ``law`` under ``V``.

    Iterates ``S <- pre_set(S) & S`` until the pre-set no longer cuts ``S``.
    A set whose inscribed ball is below ``degenerate_radius`` is reported as
    ``DEGENERATE``: it has no interior left and can only converge in the
    limit, or it passes the containment test only through the tolerance.
    """
    if not admissible.is_bounded():
        raise GeometryError("admissible set must be bounded")
    S = canonicalize(admissible)
    if is_empty(S):
        return InvariantResult(S, InvarianceStatus.EMPTY, 0)
    for k in range(max_iter):
        P = pre_set(S, law, V)
        if contains(P, S):
            if k > 0 and _chebyshev_radius(S) < degenerate_radius:
                return InvariantResult(S, InvarianceStatus.DEGENERATE, k)
            return InvariantResult(S, InvarianceStatus.CONVERGED, k)
        S = canonicalize(intersect(S, P))
        if is_empty(S):
            return InvariantResult(S, InvarianceStatus.EMPTY, k + 1)
        if _chebyshev_radius(S) < degenerate_radius:
            return InvariantResult(S, InvarianceStatus.DEGENERATE, k + 1)
    return InvariantResult(S, InvarianceStatus.NOT_CONVERGED, max_iter)


def is_robust_invariant(S: Polytope, law: AffineLaw, V: Polytope, tol: float = EPS_CON) -> bool:
    return contains(S, ReachSet(S).step(law, V), tol)


def reach_set(O: Polytope, law: AffineLaw, V: Polytope, t: int) -> ReachSet:
    R = ReachSet(O)
    for _ in range(t):
        R = R.step(law, V)
    return R


def reach(O: Polytope, law: AffineLaw, V: Polytope, t: int) -> Polytope:
    """Explicit ``t``-step reachable set of ``O``.

    Raises ``DivergedError`` when the set grows beyond ``DIVERGENCE_LIMIT``
    in any coordinate direction.
    """
    if t < 1:
        raise ValueError("t must be a positive integer")
    if is_empty(O):
        raise GeometryError("empty initial set")
    EV = affine_image(V, law.E)
    P = O
    for _ in range(t):
        P = minkowski_sum(affine_image(P, law.M, law.c), EV)
        if np.max(np.abs(P.vertices())) > DIVERGENCE_LIMIT:
            raise DivergedError("reachable set exceeded the divergence limit")
    return P


def _support_rows(S: Polytope, D: np.ndarray) -> np.ndarray:
    """``h_S(d)`` for every row ``d`` of ``D``."""
    if S._vertices:
        return np.max(D @ S._vertices[0].T, axis=1)
    return np.array([S.support(d) for d in D])


def _with_vertices(S: Polytope) -> Polytope:
    try:
        S.vertices()
    except GeometryError:
        pass
    return S


def safe_time_interval(mp: ModePair, S_inf: Polytope, cap: int = DEFAULT_CAP,
                       tol: float = EPS_CON, check_invariance: bool = True) -> SafeTimeResult:
    """Safe time interval of an agent and the reachable-set chain witnessing it.

    ``alpha - 1`` is the number of disconnected steps that may follow a
    connected step from ``S_inf`` before the reachable set first leaves
    ``S_inf``. ``witness_chain[k]`` is the set after the connected step and
    ``k`` disconnected steps; its last element is the first one not contained
    (absent when the cap is hit).
    """
    F, Fh, V = mp.connected, mp.disconnected, mp.disturbance_set
    if check_invariance and not is_robust_invariant(S_inf, F, V, tol):
        raise GeometryError("S_inf is not robust invariant for the connected law")
    S = _with_vertices(S_inf)
    A, b = S.A, S.b
    Vv = V.vertices()

    # rows pulled back through k disconnected steps; acc holds the disturbance
    # inflation collected along the way
    D = A.copy()
    acc = np.zeros(A.shape[0])
    chain = []
    R = ReachSet(S).step(F, V)
    for tau in range(cap):
        lhs = (_support_rows(S, D @ F.M) + np.max(D @ F.E @ Vv.T, axis=1)
               + D @ F.c + acc)
        chain.append(R)
        if np.any(lhs > b + tol):
            return SafeTimeResult(max(tau, 1), chain, S_inf)
        acc = acc + np.max(D @ Fh.E @ Vv.T, axis=1) + D @ Fh.c
        D = D @ Fh.M
        R = R.step(Fh, V)
    return SafeTimeResult(cap, chain, S_inf, capped=True)


def online_deadline(O, mp: ModePair, S_inf: Polytope, cap: int = DEFAULT_CAP,
                    tol: float = EPS_CON) -> int:
    """Number of disconnected steps the observation set ``O`` can take inside ``S_inf``.

    Returns -1 when ``O`` is not contained in ``S_inf`` to begin with.
    """
    if isinstance(O, Polytope) and is_empty(O):
        raise GeometryError("empty observation set")
    S = _with_vertices(S_inf)
    if not contains(S, O, tol):
        return -1
    Fh, V = mp.disconnected, mp.disturbance_set
    R = ReachSet(O) if isinstance(O, Polytope) else O
    for t in range(1, cap + 1):
        R = R.step(Fh, V)
        if not contains(S, R, tol):
            return t - 1
    return cap


class PointDeadline:
    """Fast deadlines for exactly known states.

    For a point observation the reachable set after ``k`` disconnected steps
    is the propagated point inflated by a state-independent disturbance term,
    so that term is tabulated once per row of ``S_inf``.
    """

    def __init__(self, mp: ModePair, S_inf: Polytope, cap: int = DEFAULT_CAP, tol: float = EPS_CON):
        self.mp = mp
        self.S = S_inf
        self.cap = cap
        self.tol = tol
        Fh, V = mp.disconnected, mp.disturbance_set
        Vv = V.vertices()
        A, b = S_inf.A, S_inf.b
        rows, inflation = [A.copy()], [np.zeros(A.shape[0])]
        D, acc = A.copy(), np.zeros(A.shape[0])
        for _ in range(cap):
            acc = acc + np.max(D @ Fh.E @ Vv.T, axis=1) + D @ Fh.c
            D = D @ Fh.M
            rows.append(D)
            inflation.append(acc.copy())
        self._rows = np.stack(rows)          # (k, m, n)
        self._slack = b[None, :] - np.stack(inflation) + tol   # (k, m)

    def __call__(self, z) -> int:
        z = np.asarray(z, dtype=float)
        ok = np.all(self._rows @ z <= self._slack, axis=1)
        if not ok[0]:
            return -1
        bad = np.flatnonzero(~ok)
        if bad.size == 0:
            return min(self.cap, len(ok) - 1)
        return int(bad[0]) - 1


# -- observation sets ----------------------------------------------------------


def observe_exact(z) -> Polytope:
    return Polytope.point(z)


def observe_propagated(mp: ModePair, S_inf: Polytope, steps_since_connect: int) -> ReachSet:
    """Set known to contain the state ``steps_since_connect`` steps after a connection."""
    R = ReachSet(S_inf).step(mp.connected, mp.disturbance_set)
    for _ in range(max(steps_since_connect - 1, 0)):
        R = R.step(mp.disconnected, mp.disturbance_set)
    return R


def observe_noisy(measurement, noise_set: Polytope, rest) -> Polytope:
    """Noisy plant measurement combined with exactly known remaining components.

    The first block is ``measurement - w`` for ``w`` in ``noise_set``; ``rest``
    is the (known) value of the remaining state components.
    """
    measurement = np.atleast_1d(np.asarray(measurement, dtype=float))
    rest = np.atleast_1d(np.asarray(rest, dtype=float))
    n, m = measurement.size, rest.size
    A = np.zeros((noise_set.n_rows + 2 * m, n + m))
    b = np.zeros(noise_set.n_rows + 2 * m)
    # x = y - w, w in W  <=>  -W_A (x - y) <= W_b
    A[:noise_set.n_rows, :n] = -noise_set.A
    b[:noise_set.n_rows] = noise_set.b - noise_set.A @ measurement
    A[noise_set.n_rows:noise_set.n_rows + m, n:] = np.eye(m)
    A[noise_set.n_rows + m:, n:] = -np.eye(m)
    b[noise_set.n_rows:noise_set.n_rows + m] = rest
    b[noise_set.n_rows + m:] = -rest
    return Polytope(A, b)


def invariant_set(mp: ModePair, max_iter: int = DEFAULT_MAX_ITER) -> InvariantResult:
    return max_robust_invariant(mp.admissible, mp.connected, mp.disturbance_set, max_iter)


def sets_equal(P: Polytope, Q: Polytope, tol: float = EPS_CON) -> bool:
    return equal(P, Q, tol)
