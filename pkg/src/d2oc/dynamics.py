"""Discrete-time LTI agent models and lifted horizon predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionMismatch, NoRelativeDegree

Array = NDArray[np.float64]


def _check_dims(A: Array, B: Array, C: Array) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    if B.ndim != 2 or B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"B must have {A.shape[0]} rows, got {B.shape}")
    if C.ndim != 2 or C.shape[1] != A.shape[0]:
        raise DimensionMismatch(f"C must have {A.shape[0]} columns, got {C.shape}")


def _zero_tol(B: Array, C: Array) -> float:
    return 1e-9 * (1.0 + np.linalg.norm(C, np.inf) * np.linalg.norm(B, np.inf))


def relative_degree(A: Array, B: Array, C: Array, max_probe: int | None = None) -> int:
    """Smallest r with C A^(r-1) B nonzero.

    An entry counts as zero when its magnitude is at most
    ``1e-9 * (1 + ||C||_inf ||B||_inf)``.

    Raises:
        NoRelativeDegree: if no r <= max_probe qualifies.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    _check_dims(A, B, C)
    if max_probe is None:
        max_probe = A.shape[0]
    if max_probe < 1:
        raise ValueError("max_probe must be >= 1")
    tol = _zero_tol(B, C)
    AkB = B.copy()
    for r in range(1, max_probe + 1):
        if np.max(np.abs(C @ AkB)) > tol:
            return r
        AkB = A @ AkB
    raise NoRelativeDegree(f"C A^(l-1) B vanishes for all l <= {max_probe}")


@dataclass(frozen=True)
class LtiModel:
    """x(k+1) = A x(k) + B u(k), y(k) = C x(k), sampled every ``dt`` seconds."""

    A: Array
    B: Array
    C: Array
    dt: float
    r: int = field(init=False)

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        _check_dims(A, B, C)
        for name, M in (("A", A), ("B", B), ("C", C)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        object.__setattr__(self, "r", relative_degree(A, B, C))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def d(self) -> int:
        return self.C.shape[0]

    def step(self, x: Array, u: Array) -> Array:
        return self.A @ x + self.B @ np.asarray(u, dtype=float).reshape(-1)

    def output(self, x: Array) -> Array:
        return self.C @ x


@dataclass(frozen=True)
class LiftedSystem:
    """Stacked outputs y(k+r)..y(k+r+H-1) as ``theta @ U + phi @ x``."""

    theta: Array
    phi: Array
    horizon: int
    relative_degree: int

    def predict(self, x: Array, U: Array) -> Array:
        return self.theta @ U + self.phi @ x


def build_lifted(model: LtiModel, horizon: int) -> LiftedSystem:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    A, B, C = model.A, model.B, model.C
    _check_dims(A, B, C)
    n, m, d, r, H = model.n, model.m, model.d, model.r, horizon

    # markov[p] = C A^p B for p = r-1 .. r+H-2
    markov = []
    CA = C @ np.linalg.matrix_power(A, r - 1)
    for _ in range(H):
        markov.append(CA @ B)
        CA = CA @ A
    theta = np.zeros((d * H, m * H))
    for h in range(H):
        for l in range(h + 1):
            theta[h * d:(h + 1) * d, l * m:(l + 1) * m] = markov[h - l]

    phi = np.zeros((d * H, n))
    CA = C @ np.linalg.matrix_power(A, r)
    for h in range(H):
        phi[h * d:(h + 1) * d] = CA
        CA = CA @ A
    return LiftedSystem(theta=theta, phi=phi, horizon=H, relative_degree=r)


def make_quadcopter_model(dt: float = 0.1, g: float = 9.81, tau: float = 0.5) -> LtiModel:
    """Linearized near-hover quadcopter projected to planar position.

    State ``[p_x, v_x, theta, theta_dot, p_y, v_y, phi, phi_dot]``, one input
    per axis commanding the attitude rate through a first-order lag ``tau``.
    Each axis is the Euler discretization of p' = v, v' = g*angle,
    angle'' = (u - angle') / tau. Output is ``(p_x, p_y)``.
    """
    if dt <= 0 or g <= 0 or tau <= 0:
        raise ValueError("dt, g and tau must be positive")
    Ac = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, g, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, -1.0 / tau],
    ])
    Bc = np.array([[0.0], [0.0], [0.0], [1.0 / tau]])
    Ablk = np.eye(4) + dt * Ac
    Bblk = dt * Bc
    Z = np.zeros((4, 4))
    A = np.block([[Ablk, Z], [Z, Ablk]])
    B = np.zeros((8, 2))
    B[:4, :1] = Bblk
    B[4:, 1:] = Bblk
    C = np.zeros((2, 8))
    C[0, 0] = 1.0
    C[1, 4] = 1.0
    return LtiModel(A, B, C, dt)


def double_integrator(dt: float) -> LtiModel:
    return LtiModel(np.array([[1.0, dt], [0.0, 1.0]]), np.array([[0.0], [dt]]), np.array([[1.0, 0.0]]), dt)
