"""Closed-form nominal and feedforward-augmented QP controllers.

Both controllers minimize ``1/2 U^T Hs U + f^T U`` with

    Hs = 2((Omega Theta)^T (Omega Theta) + R)
    f  = 2 (Omega Theta)^T Omega (Phi x - Qbar)

The feedforward law adds ``Hs^{-1} (Omega Theta)^T Omega dQ`` to the nominal
minimizer, which is the minimizer of the same cost with the target shifted by
half the stacked drift ``dQ``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_factor, cho_solve

from .dynamics import LiftedSystem
from .errors import NotPositiveDefinite, UndefinedRatio
from .reference import VelocityField, velocity_at
from .transport import LocalAssignment

Array = NDArray[np.float64]

RATIO_FLOOR = 1e-12


def build_omega(pi_sums, d: int) -> Array:
    sums = np.asarray(pi_sums, dtype=float).reshape(-1)
    if np.any(sums < 0):
        raise ValueError("weight sums must be non-negative")
    return np.kron(np.diag(np.sqrt(sums)), np.eye(d))


def predict_drift(assignment: LocalAssignment, positions: Array, vf: VelocityField,
                  dt: float, k: int, centroid: Array | None = None) -> Array:
    """One-step barycenter drift under a frozen assignment.

    ``centroid`` is the cloud centroid, used by rigid waypoint fields.
    """
    q = positions[assignment.indices]
    v = velocity_at(vf, q, k, centroid=centroid)
    pi = assignment.pi
    return dt * (pi @ v) / pi.sum()


@dataclass(frozen=True)
class HorizonReference:
    qbar_stack: Array
    drift_stack: Array

    @classmethod
    def nominal(cls, qbar: Array, horizon: int) -> "HorizonReference":
        qbar = np.asarray(qbar, dtype=float)
        return cls(np.tile(qbar, horizon), np.zeros(qbar.size * horizon))

    @classmethod
    def feedforward(cls, qbar: Array, drift: Array, horizon: int) -> "HorizonReference":
        """Current barycenter held over the horizon plus a linear drift ramp."""
        qbar = np.asarray(qbar, dtype=float)
        drift = np.asarray(drift, dtype=float)
        ramp = np.concatenate([(h + 1) * drift for h in range(horizon)])
        return cls(np.tile(qbar, horizon), ramp)


@dataclass(frozen=True)
class QpProblem:
    hessian: Array
    gradient: Array
    omega: Array
    chol: tuple

    def solve(self, rhs: Array) -> Array:
        return cho_solve(self.chol, rhs)


def _factor(Hs: Array):
    try:
        return cho_factor(Hs, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def input_penalty(scale: float, size: int) -> Array:
    return scale * np.eye(size)


def assemble_qp(lifted: LiftedSystem, omega: Array, x: Array, reference: HorizonReference,
                R: Array) -> QpProblem:
    OT = omega @ lifted.theta
    Hs = 2.0 * (OT.T @ OT + R)
    Hs = 0.5 * (Hs + Hs.T)
    gamma = lifted.phi @ x - reference.qbar_stack
    f = 2.0 * OT.T @ (omega @ gamma)
    return QpProblem(Hs, f, omega, _factor(Hs))


def solve_nominal(qp: QpProblem) -> Array:
    return qp.solve(-qp.gradient)


def feedforward_term(qp: QpProblem, lifted: LiftedSystem, omega: Array, drift_stack: Array) -> Array:
    OT = omega @ lifted.theta
    return qp.solve(OT.T @ (omega @ drift_stack))


def solve_feedforward(qp: QpProblem, lifted: LiftedSystem, omega: Array, drift_stack: Array) -> Array:
    """Reactive minimizer plus the drift-driven feedforward correction."""
    if not np.any(drift_stack):
        return solve_nominal(qp)
    return solve_nominal(qp) + feedforward_term(qp, lifted, omega, drift_stack)


def qp_cost(U: Array, lifted: LiftedSystem, omega: Array, x: Array, target: Array, R: Array) -> float:
    """||Omega (Theta U + Phi x - target)||^2 + U^T R U."""
    e = omega @ (lifted.theta @ U + lifted.phi @ x - target)
    return float(e @ e + U @ R @ U)


def projection(lifted: LiftedSystem, omega: Array, qp: QpProblem) -> Array:
    OT = omega @ lifted.theta
    P = 2.0 * OT @ qp.solve(OT.T)
    return 0.5 * (P + P.T)


def spectral_norms(P: Array) -> tuple[float, float]:
    """(||I - P||_2, ||P||_2) for symmetric P."""
    ev = np.linalg.eigvalsh(P)
    return float(np.max(np.abs(1.0 - ev))), float(np.max(np.abs(ev)))


@dataclass(frozen=True)
class ErrorReport:
    e_w: Array
    e0_total: Array
    ratio: float | None
    p_norm: float
    lam: float
    P: Array

    @property
    def ratio_defined(self) -> bool:
        return self.ratio is not None


def error_decomposition(lifted: LiftedSystem, omega: Array, x: Array, qbar_stack: Array,
                        drift_stack: Array, R: Array, *, qp: QpProblem | None = None,
                        strict: bool = False) -> ErrorReport:
    """Weighted horizon errors of the feedforward and purely reactive laws.

    ``e_w`` is the closed-loop weighted error under the feedforward input and
    ``e0_total`` the uncompensated nominal error. The identity
    ``e_w = e0_total + (I + P/2) Omega dQ`` is checked before returning.

    With ``strict`` an :class:`UndefinedRatio` is raised when ``||e0_total||``
    is below 1e-12; otherwise ``ratio`` is None in that case.
    """
    if qp is None:
        qp = assemble_qp(lifted, omega, x, HorizonReference(qbar_stack, drift_stack), R)
    P = projection(lifted, omega, qp)
    I = np.eye(P.shape[0])
    gamma = omega @ (lifted.phi @ x - qbar_stack)
    od = omega @ drift_stack

    # realized weighted error of Y = Theta U_ff + Phi x against Qbar
    U = solve_feedforward(qp, lifted, omega, drift_stack)
    e_w = omega @ (lifted.theta @ U + lifted.phi @ x - qbar_stack)
    e0 = (I - P) @ gamma - od

    resid = e_w - (e0 + (I + 0.5 * P) @ od)
    scale = 1.0 + np.linalg.norm(gamma) + np.linalg.norm(od)
    if np.linalg.norm(resid) > 1e-9 * scale:
        raise ArithmeticError(f"lag decomposition identity violated: {np.linalg.norm(resid):.3e}")

    lam, p_norm = spectral_norms(P)
    n0 = np.linalg.norm(e0)
    if n0 < RATIO_FLOOR:
        if strict:
            raise UndefinedRatio(f"||E0|| = {n0:.3e}")
        ratio = None
    else:
        ratio = float(np.linalg.norm(e_w) / n0)
    return ErrorReport(e_w, e0, ratio, p_norm, lam, P)
