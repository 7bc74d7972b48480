"""Polytope calculus in half-space representation.

All set operations used by the invariance computations live here. Every
question about a polytope is ultimately answered by a linear program
(``solve_lp``) or, when vertices are cheap to obtain, by checking vertices
against inequalities.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

EPS_LP = 1e-9
EPS_CON = 1e-7

MAX_VERTEX_DIM = 10
MAX_VERTICES = 10_000

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": EPS_LP,
    "dual_feasibility_tolerance": EPS_LP,
}


class GeometryError(ValueError):
    pass


class EmptySetError(GeometryError):
    pass


class UnboundedError(GeometryError):
    pass


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    value: float
    point: np.ndarray | None = None


def solve_lp(c, A_ub, b_ub, A_eq=None, b_eq=None, bounds=None) -> LpSolution:
    """Maximize ``c @ x`` subject to ``A_ub @ x <= b_ub`` (and equalities).

    Variables are free unless ``bounds`` says otherwise.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    if bounds is None:
        bounds = [(None, None)] * n
    A_ub = np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.asarray(b_ub, dtype=float).ravel()
    if A_ub.shape[0] == 0 and A_eq is None:
        if np.allclose(c, 0.0):
            return LpSolution(LpStatus.OPTIMAL, 0.0, np.zeros(n))
        return LpSolution(LpStatus.UNBOUNDED, np.inf)
    res = linprog(
        -c,
        A_ub=A_ub if A_ub.shape[0] else None,
        b_ub=b_ub if A_ub.shape[0] else None,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    if res.status == 0:
        return LpSolution(LpStatus.OPTIMAL, float(-res.fun), np.asarray(res.x))
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, -np.inf)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, np.inf)
    # HiGHS occasionally reports "infeasible or unbounded" (status 4); settle it
    # with a pure feasibility problem.
    feas = linprog(np.zeros(n), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=bounds, method="highs", options=_HIGHS_OPTIONS)
    if feas.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, -np.inf)
    if feas.status == 0 and res.status == 4:
        return LpSolution(LpStatus.UNBOUNDED, np.inf)
    raise GeometryError(f"LP solver failed: {res.message}")


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex set ``{x : A x <= b}``.

    Instances are treated as immutable. Vertices, once computed, are cached on
    the instance.
    """

    A: np.ndarray
    b: np.ndarray
    _vertices: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        b = np.array(self.b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise GeometryError(f"{A.shape[0]} rows in A but {b.size} offsets")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    # -- constructors -------------------------------------------------------

    @classmethod
    def box(cls, lower, upper) -> Polytope:
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        n = lower.size
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    @classmethod
    def symmetric_box(cls, radius) -> Polytope:
        radius = np.atleast_1d(np.asarray(radius, dtype=float))
        return cls.box(-radius, radius)

    @classmethod
    def point(cls, x) -> Polytope:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = cls.box(x, x)
        p._vertices.append(x.reshape(1, -1).copy())
        return p

    @classmethod
    def empty(cls, dim: int) -> Polytope:
        A = np.zeros((1, dim))
        A[0, 0] = 1.0
        return cls(np.vstack([A, -A]), np.array([-1.0, 0.0]))

    @classmethod
    def from_vertices(cls, points) -> Polytope:
        """Convex hull of a finite point set, as a polytope."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        A, b, verts = _hull_hrep(points)
        p = cls(A, b)
        p._vertices.append(verts)
        return p

    # -- queries ------------------------------------------------------------

    def support(self, direction) -> float:
        return support(self, direction)

    def contains_point(self, x, tol: float = EPS_CON) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x <= self.b + tol))

    def is_empty(self) -> bool:
        return is_empty(self)

    def vertices(self) -> np.ndarray:
        if not self._vertices:
            self._vertices.append(enumerate_vertices(self))
        return self._vertices[0]

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(self.dim)
        upper = np.array([support(self, e) for e in eye])
        lower = -np.array([support(self, -e) for e in eye])
        return lower, upper

    def is_bounded(self) -> bool:
        try:
            lo, hi = self.bounding_box()
        except UnboundedError:
            return False
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    def chebyshev_ball(self) -> tuple[np.ndarray | None, float]:
        """Center and radius of the largest inscribed ball (radius -inf if empty)."""
        norms = np.linalg.norm(self.A, axis=1)
        n = self.dim
        A = np.hstack([self.A, norms[:, None]])
        c = np.zeros(n + 1)
        c[-1] = 1.0
        bounds = [(None, None)] * n + [(0.0, None)]
        # the radius cap keeps the LP bounded for unbounded sets
        sol = solve_lp(c, A, self.b, bounds=bounds[:-1] + [(0.0, 1e6)])
        if sol.status is LpStatus.INFEASIBLE:
            return None, -np.inf
        return sol.point[:n], float(sol.point[-1])

    # -- operators ----------------------------------------------------------

    def __and__(self, other: Polytope) -> Polytope:
        return intersect(self, other)

    def __add__(self, other: Polytope) -> Polytope:
        return minkowski_sum(self, other)

    def __sub__(self, other: Polytope) -> Polytope:
        return pontryagin_diff(self, other)

    def __le__(self, other: Polytope) -> bool:
        return contains(other, self)

    def __ge__(self, other: Polytope) -> bool:
        return contains(self, other)

    def __repr__(self) -> str:
        return f"Polytope(dim={self.dim}, rows={self.n_rows})"

    # -- text form ----------------------------------------------------------

    def to_text(self) -> str:
        lines = [str(self.dim)]
        for a, bi in zip(self.A, self.b):
            lines.append(" ".join(repr(float(v)) for v in a) + " | " + repr(float(bi)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Polytope:
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise GeometryError("empty polytope text")
        dim = int(lines[0])
        rows, offsets = [], []
        for ln in lines[1:]:
            lhs, sep, rhs = ln.partition("|")
            if not sep:
                raise GeometryError(f"missing '|' in row {ln!r}")
            a = [float(tok) for tok in lhs.split()]
            if len(a) != dim:
                raise GeometryError(f"row has {len(a)} entries, expected {dim}")
            rows.append(a)
            offsets.append(float(rhs))
        return cls(np.array(rows).reshape(-1, dim), np.array(offsets))


def _check_dims(P, Q):
    if P.dim != Q.dim:
        raise GeometryError(f"dimension mismatch: {P.dim} vs {Q.dim}")


def support(P, direction) -> float:
    """``max a.x`` over ``P``; ``inf`` when unbounded in that direction."""
    a = np.asarray(direction, dtype=float).ravel()
    if a.size != P.dim:
        raise GeometryError(f"direction has size {a.size}, set has dim {P.dim}")
    if P._vertices:
        return float(np.max(P._vertices[0] @ a))
    sol = solve_lp(a, P.A, P.b)
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptySetError("empty set")
    return sol.value


def is_empty(P: Polytope) -> bool:
    if P._vertices:
        return P._vertices[0].shape[0] == 0
    sol = solve_lp(np.zeros(P.dim), P.A, P.b)
    return sol.status is LpStatus.INFEASIBLE


def contains(P: Polytope, Q, tol: float = EPS_CON) -> bool:
    """True iff ``Q`` is a subset of ``P``.

    ``Q`` may be any set exposing ``dim`` and ``support``; when ``Q`` carries
    vertices they are checked directly against the rows of ``P``.
    """
    _check_dims(P, Q)
    verts = getattr(Q, "_vertices", None)
    if verts:
        V = verts[0]
        return bool(np.all(V @ P.A.T <= P.b + tol))
    for a, bi in zip(P.A, P.b):
        if Q.support(a) > bi + tol:
            return False
    return True


def equal(P: Polytope, Q: Polytope, tol: float = EPS_CON) -> bool:
    return contains(P, Q, tol) and contains(Q, P, tol)


def intersect(P: Polytope, Q: Polytope) -> Polytope:
    _check_dims(P, Q)
    return Polytope(np.vstack([P.A, Q.A]), np.concatenate([P.b, Q.b]))


def canonicalize(P: Polytope, tol: float = EPS_LP) -> Polytope:
    """Remove zero, duplicate and redundant rows.

    Rows are scaled to unit norm. An empty input yields ``Polytope.empty``.
    """
    A, b = P.A, P.b
    norms = np.linalg.norm(A, axis=1)
    zero = norms <= 1e-12
    if np.any(b[zero] < -tol):
        return Polytope.empty(P.dim)
    A = A[~zero] / norms[~zero, None]
    b = b[~zero] / norms[~zero]
    if A.shape[0] == 0:
        return Polytope(np.zeros((0, P.dim)), np.zeros(0))

    # duplicates: identical normals keep the tightest offset
    keys = np.round(A, 10)
    order = np.lexsort(np.vstack([b, keys.T[::-1]]))
    keep = []
    last = None
    for i in order:
        k = tuple(keys[i])
        if k != last:
            keep.append(i)
            last = k
    keep.sort()
    A, b = A[keep], b[keep]

    if solve_lp(np.zeros(P.dim), A, b).status is LpStatus.INFEASIBLE:
        return Polytope.empty(P.dim)

    active = np.ones(A.shape[0], dtype=bool)
    for i in range(A.shape[0]):
        active[i] = False
        others_A = np.vstack([A[active], A[i]])
        others_b = np.concatenate([b[active], [b[i] + 1.0]])
        sol = solve_lp(A[i], others_A, others_b)
        if sol.status is LpStatus.OPTIMAL and sol.value <= b[i] + tol:
            continue
        active[i] = True
    return Polytope(A[active], b[active])


def pontryagin_diff(P: Polytope, Q: Polytope) -> Polytope:
    """``{x : x + q in P for all q in Q}`` by offset tightening."""
    _check_dims(P, Q)
    shift = np.array([support(Q, a) for a in P.A])
    return Polytope(P.A, P.b - shift)


def affine_image(P: Polytope, M, c=None) -> Polytope:
    """``{M x + c : x in P}``.

    Invertible square maps transform the constraints directly; anything else
    goes through the vertices of ``P``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != P.dim:
        raise GeometryError(f"map expects dim {M.shape[1]}, set has dim {P.dim}")
    c = np.zeros(M.shape[0]) if c is None else np.asarray(c, dtype=float).ravel()
    if M.shape[0] == M.shape[1] and np.linalg.cond(M) < 1e10:
        Minv = np.linalg.inv(M)
        A = P.A @ Minv
        out = Polytope(A, P.b + A @ c)
        if P._vertices:
            out._vertices.append(P._vertices[0] @ M.T + c)
        return out
    if not P.is_bounded():
        raise UnboundedError("affine image of an unbounded set")
    return Polytope.from_vertices(P.vertices() @ M.T + c)


def minkowski_sum(P: Polytope, Q: Polytope) -> Polytope:
    _check_dims(P, Q)
    if is_empty(P) or is_empty(Q):
        return Polytope.empty(P.dim)
    VP, VQ = P.vertices(), Q.vertices()
    if VP.shape[0] * VQ.shape[0] > 50 * MAX_VERTICES:
        raise GeometryError("Minkowski sum too large for the vertex route")
    sums = (VP[:, None, :] + VQ[None, :, :]).reshape(-1, P.dim)
    return Polytope.from_vertices(sums)


def cartesian_product(*sets: Polytope) -> Polytope:
    dims = [S.dim for S in sets]
    rows = sum(S.n_rows for S in sets)
    A = np.zeros((rows, sum(dims)))
    b = np.zeros(rows)
    r = c = 0
    for S in sets:
        A[r:r + S.n_rows, c:c + S.dim] = S.A
        b[r:r + S.n_rows] = S.b
        r += S.n_rows
        c += S.dim
    return Polytope(A, b)


def preimage(P: Polytope, M, c=None) -> Polytope:
    """``{x : M x + c in P}``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    c = np.zeros(M.shape[0]) if c is None else np.asarray(c, dtype=float).ravel()
    return Polytope(P.A @ M, P.b - P.A @ c)


# -- vertex enumeration and hulls -------------------------------------------


def enumerate_vertices(P: Polytope) -> np.ndarray:
    """Vertices of a bounded polytope (possibly lower-dimensional)."""
    if P.dim > MAX_VERTEX_DIM:
        raise GeometryError(f"vertex enumeration limited to dim <= {MAX_VERTEX_DIM}")
    if is_empty(P):
        return np.zeros((0, P.dim))
    if not P.is_bounded():
        raise UnboundedError("cannot enumerate vertices of an unbounded set")
    V = _vertices_hrep(P.A, P.b)
    if V.shape[0] > MAX_VERTICES:
        raise GeometryError(f"more than {MAX_VERTICES} vertices")
    return V


def _vertices_hrep(A, b) -> np.ndarray:
    n = A.shape[1]
    P = Polytope(A, b)
    center, radius = P.chebyshev_ball()
    if n == 1:
        lo = -support(P, [-1.0])
        hi = support(P, [1.0])
        pts = [lo] if hi - lo <= EPS_LP else [lo, hi]
        return np.array(pts).reshape(-1, 1)
    if radius > 1e-8:
        halfspaces = np.hstack([A, -b[:, None]])
        try:
            hs = HalfspaceIntersection(halfspaces, center)
            return _unique_rows(hs.intersections)
        except QhullError:
            pass
    # lower-dimensional: find the affine hull, recurse in its coordinates
    eq_rows = []
    for a, bi in zip(A, b):
        if -support(P, -a) >= bi - 1e-8 * max(1.0, abs(bi)):
            eq_rows.append(np.append(a, bi))
    if not eq_rows:
        # numerically thin but not flat; joggle through qhull instead
        halfspaces = np.hstack([A, -b[:, None]])
        hs = HalfspaceIntersection(halfspaces, center, qhull_options="QJ")
        return _unique_rows(hs.intersections)
    E = np.array(eq_rows)
    Ae, be = E[:, :-1], E[:, -1]
    x0 = np.linalg.lstsq(Ae, be, rcond=None)[0]
    _, s, vt = np.linalg.svd(Ae)
    rank = int(np.sum(s > 1e-9 * max(1.0, s[0])))
    N = vt[rank:].T
    if N.shape[1] == 0:
        return x0.reshape(1, -1)
    A_red = A @ N
    b_red = b - A @ x0
    keep = np.linalg.norm(A_red, axis=1) > 1e-12
    Y = _vertices_hrep(A_red[keep], b_red[keep])
    return Y @ N.T + x0


def _unique_rows(X, decimals: int = 9) -> np.ndarray:
    if X.shape[0] == 0:
        return X
    _, idx = np.unique(np.round(X, decimals), axis=0, return_index=True)
    return X[np.sort(idx)]


def _hull_hrep(points):
    """H-representation and vertex set of the convex hull of ``points``."""
    points = _unique_rows(points)
    m, n = points.shape
    if m == 0:
        raise EmptySetError("hull of no points")
    center = points.mean(axis=0)
    X = points - center
    scale = max(1.0, float(np.max(np.abs(X))))
    _, s, vt = np.linalg.svd(X, full_matrices=True)
    rank = int(np.sum(s > 1e-9 * scale))
    basis, normal = vt[:rank].T, vt[rank:].T
    Y = X @ basis

    if rank == 0:
        G = np.zeros((0, 0))
        h = np.zeros(0)
        vidx = np.array([0])
    elif rank == 1:
        y = Y[:, 0]
        G = np.array([[1.0], [-1.0]])
        h = np.array([y.max(), -y.min()])
        vidx = np.array([int(np.argmin(y)), int(np.argmax(y))])
    else:
        try:
            hull = ConvexHull(Y)
        except QhullError:
            hull = ConvexHull(Y, qhull_options="QJ")
        G = hull.equations[:, :-1]
        h = -hull.equations[:, -1]
        vidx = hull.vertices

    A_parts = [G @ basis.T] if rank else []
    b_parts = [h + (G @ basis.T) @ center] if rank else []
    if normal.shape[1]:
        W = normal.T
        A_parts += [W, -W]
        b_parts += [W @ center, -(W @ center)]
    A = np.vstack(A_parts)
    b = np.concatenate(b_parts)
    # qhull triangulates facets; merge identical facet planes
    keys = np.round(np.hstack([A, b[:, None]]), 9)
    _, idx = np.unique(keys, axis=0, return_index=True)
    idx = np.sort(idx)
    return A[idx], b[idx], points[np.unique(vidx)]


def box_vertices(lower, upper) -> np.ndarray:
    lower = np.atleast_1d(lower)
    upper = np.atleast_1d(upper)
    return np.array(list(product(*zip(lower, upper))), dtype=float)
