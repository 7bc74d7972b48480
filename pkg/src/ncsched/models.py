"""Closed-loop mode pairs for networked control agents.

Three network archetypes are supported, differing in which link is shared:

* ``SC``  sensor to controller. The controller runs a predictor ``xhat``.
* ``CA``  controller to actuator. The actuator holds the last input.
* ``SCA`` both links, with a dynamic controller.

All feedback uses the convention ``u = -K xhat`` for static gains.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import Polytope, cartesian_product, intersect, preimage, canonicalize
from .invariance import AffineLaw, ModePair

# controller-state box used when none is given for a dynamic controller
DEFAULT_CONTROLLER_BOUND = 1e3


class NetworkKind(str, enum.Enum):
    SC = "SC"
    CA = "CA"
    SCA = "SCA"


class RiccatiError(RuntimeError):
    pass


@dataclass(frozen=True)
class DynamicController:
    """``w+ = Ac w + Bc x``, applied input ``u = Cc w``."""

    Ac: np.ndarray
    Bc: np.ndarray
    Cc: np.ndarray
    state_bounds: Polytope | None = None


@dataclass
class AgentSpec:
    """Plant ``x+ = A x + B u + E v`` with constraints and a controller."""

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    state_bounds: Polytope
    input_bounds: Polytope
    disturbance_bounds: Polytope
    K: np.ndarray | None = None
    controller: DynamicController | None = None
    network_kind: NetworkKind = NetworkKind.SC
    name: str = ""

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = _as_column_matrix(self.B, self.A.shape[0])
        self.E = _as_column_matrix(self.E, self.A.shape[0])
        self.network_kind = NetworkKind(self.network_kind)
        n, r, p = self.n, self.r, self.E.shape[1]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.K is not None:
            self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
            if self.K.shape != (r, n):
                raise ValueError(f"K must be {r}x{n}, got {self.K.shape}")
        if self.state_bounds.dim != n:
            raise ValueError("state bounds dimension mismatch")
        if self.input_bounds.dim != r:
            raise ValueError("input bounds dimension mismatch")
        if self.disturbance_bounds.dim != p:
            raise ValueError("disturbance bounds dimension mismatch")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.B.shape[1]


def _as_column_matrix(M, rows: int) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(rows, -1)
    if M.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got shape {M.shape}")
    return M


def _require_gain(spec: AgentSpec) -> np.ndarray:
    if spec.K is None:
        raise ValueError("a static gain K is required")
    return spec.K


def build_sc(spec: AgentSpec) -> ModePair:
    """Sensor-controller network with a model-based predictor.

    State ``z = (x, xhat)``. When connected the controller receives ``x`` and
    both the plant and the prediction advance from it; when disconnected the
    controller acts on ``xhat``, which evolves on the nominal closed loop.
    """
    K = _require_gain(spec)
    A, B, E, n = spec.A, spec.B, spec.E, spec.n
    Acl = A - B @ K
    Z = np.zeros((n, n))
    E_aug = np.vstack([E, np.zeros((n, E.shape[1]))])
    connected = AffineLaw(np.block([[Acl, Z], [Acl, Z]]), E_aug)
    disconnected = AffineLaw(np.block([[A, -B @ K], [Z, Acl]]), E_aug)
    X, U = spec.state_bounds, spec.input_bounds
    admissible = cartesian_product(X, X)
    # the input is -K x when fresh data arrives and -K xhat otherwise
    admissible = intersect(admissible, preimage(U, np.hstack([-K, np.zeros_like(K)])))
    admissible = intersect(admissible, preimage(U, np.hstack([np.zeros_like(K), -K])))
    return ModePair(connected, disconnected, spec.disturbance_bounds, canonicalize(admissible),
                    blocks={"x": slice(0, n), "xhat": slice(n, 2 * n)})


def build_ca(spec: AgentSpec) -> ModePair:
    """Controller-actuator network with a hold at the actuator.

    State ``z = (x, m)`` where ``m`` stores the last delivered input. When
    connected ``u = -K x`` is applied and stored; otherwise ``u = m`` and the
    memory is unchanged.
    """
    K = _require_gain(spec)
    A, B, E, n, r = spec.A, spec.B, spec.E, spec.n, spec.r
    E_aug = np.vstack([E, np.zeros((r, E.shape[1]))])
    connected = AffineLaw(np.block([[A - B @ K, np.zeros((n, r))],
                                    [-K, np.zeros((r, r))]]), E_aug)
    disconnected = AffineLaw(np.block([[A, B], [np.zeros((r, n)), np.eye(r)]]), E_aug)
    U = spec.input_bounds
    admissible = cartesian_product(spec.state_bounds, U)
    admissible = intersect(admissible, preimage(U, np.hstack([-K, np.zeros((r, r))])))
    return ModePair(connected, disconnected, spec.disturbance_bounds, canonicalize(admissible),
                    blocks={"x": slice(0, n), "m": slice(n, n + r)})


def build_sca(spec: AgentSpec) -> ModePair:
    """Sensor-controller-actuator network with a dynamic controller.

    State ``z = (x, m, xhat, w)``: plant, held input, controller-side
    prediction and controller state. A connection delivers ``x`` to the
    controller and ``Cc w`` to the actuator in the same slot.
    """
    ctrl = spec.controller
    if ctrl is None:
        raise ValueError("a dynamic controller is required")
    A, B, E, n, r = spec.A, spec.B, spec.E, spec.n, spec.r
    Ac = np.atleast_2d(np.asarray(ctrl.Ac, dtype=float))
    Bc = _as_column_matrix(ctrl.Bc, Ac.shape[0])
    Cc = np.atleast_2d(np.asarray(ctrl.Cc, dtype=float))
    nc = Ac.shape[0]
    if Bc.shape != (nc, n) or Cc.shape != (r, nc):
        raise ValueError("controller matrices have inconsistent shapes")
    dims = [n, r, n, nc]
    off = np.cumsum([0] + dims)
    N = off[-1]

    def blank():
        return np.zeros((N, N))

    x, m, xh, w = (slice(off[k], off[k + 1]) for k in range(4))
    Mf = blank()
    Mf[x, x] = A
    Mf[x, w] = B @ Cc
    Mf[m, w] = Cc
    Mf[xh, x] = A
    Mf[xh, w] = B @ Cc
    Mf[w, w] = Ac
    Mf[w, x] = Bc
    Mh = blank()
    Mh[x, x] = A
    Mh[x, m] = B
    Mh[m, m] = np.eye(r)
    Mh[xh, xh] = A
    Mh[xh, w] = B @ Cc
    Mh[w, w] = Ac
    Mh[w, xh] = Bc
    E_aug = np.zeros((N, E.shape[1]))
    E_aug[x] = E
    W = ctrl.state_bounds or Polytope.symmetric_box(np.full(nc, DEFAULT_CONTROLLER_BOUND))
    X, U = spec.state_bounds, spec.input_bounds
    admissible = cartesian_product(X, U, X, W)
    sel = np.zeros((r, N))
    sel[:, w] = Cc
    admissible = intersect(admissible, preimage(U, sel))
    return ModePair(AffineLaw(Mf, E_aug), AffineLaw(Mh, E_aug), spec.disturbance_bounds,
                    canonicalize(admissible), blocks={"x": x, "m": m, "xhat": xh, "w": w})


BUILDERS = {NetworkKind.SC: build_sc, NetworkKind.CA: build_ca, NetworkKind.SCA: build_sca}


def build_mode_pair(spec: AgentSpec) -> ModePair:
    return BUILDERS[spec.network_kind](spec)


def lqr_gain(A, B, Q, R) -> np.ndarray:
    """Discrete-time LQR gain ``K`` for ``u = -K x``.

    Raises ``RiccatiError`` when the Riccati equation has no stabilizing
    solution.

    Examples
    --------
    >>> float(lqr_gain([[1.0]], [[1.0]], [[1.0]], [[1.0]])[0, 0])  # doctest: +ELLIPSIS
    0.618...
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = _as_column_matrix(B, A.shape[0])
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    try:
        P = scipy.linalg.solve_discrete_are(A, B, Q, R)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise RiccatiError(f"no stabilizing Riccati solution: {exc}") from exc
    if not np.all(np.isfinite(P)):
        raise RiccatiError("no stabilizing Riccati solution")
    return np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)


def vehicle_model(h: float, tau: float):
    """Sampled longitudinal vehicle: position, velocity and lagged acceleration.

    Returns ``(A, B, E)`` with the disturbance acting on the acceleration.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    A = np.array([[1.0, h, 0.0], [0.0, 1.0, h], [0.0, 0.0, 1.0 - h / tau]])
    B = np.array([[0.0], [0.0], [h / tau]])
    E = np.array([[0.0], [0.0], [1.0]])
    return A, B, E


def tracking_error_step(A, B, E, x, x_ref, u_ref, u_fb, v):
    """One step of plant and reference, returning ``(x+, x_ref+, e+)``.

    The tracking error ``e = x - x_ref`` evolves as ``A e + B u_fb + E v``
    whatever the feed-forward ``u_ref`` is.
    """
    x_next = A @ x + B @ (u_ref + u_fb) + E @ v
    ref_next = A @ x_ref + B @ u_ref
    return x_next, ref_next, x_next - ref_next


def vehicle_spec(tau: float, v_bound: float, h: float = 0.2,
                 error_bounds=(1.0, 5.0, 10.0), input_bound: float = 10.0,
                 Q=None, R=None, name: str = "") -> AgentSpec:
    """Tracking-error agent of a remotely controlled vehicle (SC network)."""
    A, B, E = vehicle_model(h, tau)
    Q = np.diag([10.0, 1.0, 0.1]) if Q is None else np.asarray(Q, dtype=float)
    R = np.array([[0.1]]) if R is None else np.atleast_2d(R)
    K = lqr_gain(A, B, Q, R)
    return AgentSpec(A, B, E,
                     state_bounds=Polytope.symmetric_box(error_bounds),
                     input_bounds=Polytope.symmetric_box([input_bound]),
                     disturbance_bounds=Polytope.symmetric_box([v_bound]),
                     K=K, network_kind=NetworkKind.SC, name=name)
