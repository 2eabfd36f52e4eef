"""Ultimate-bound machinery for the feedforward tracking error."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import NoContraction, NotSymmetric

Array = NDArray[np.float64]


@dataclass(frozen=True)
class BoundInputs:
    lam: float
    p_norm: float
    zeta: float
    delta: float
    c_bar: float


@dataclass(frozen=True)
class BoundReport:
    lam: float
    p_norm: float
    zeta: float
    delta: float
    c_bar: float
    bound: float | None
    passed: bool
    entry_step: int | None
    max_excess: float
    first_violation: int | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["pass"] = d.pop("passed")
        return d


def contraction_factor(P: Array, tol: float = 1e-9) -> tuple[float, float]:
    """Return ``(||I - P||_2, ||P||_2)`` for a symmetric projection-like matrix."""
    P = np.asarray(P, dtype=float)
    if np.max(np.abs(P - P.T), initial=0.0) > tol:
        raise NotSymmetric("P is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (P + P.T))
    return float(np.max(np.abs(1.0 - ev))), float(np.max(np.abs(ev)))


def perturbations(qbar: Sequence[Array], drift: Sequence[Array]) -> Array:
    """Per-step barycenter motion not explained by the predicted drift.

    Row k is ``(qbar[k+1] - qbar[k]) - drift[k]``; there is one fewer row than steps.
    """
    qbar = np.asarray(qbar, dtype=float)
    drift = np.asarray(drift, dtype=float)
    return np.diff(qbar, axis=0) - drift[:-1]


def estimate_disturbances(qbar: Sequence[Array], drift: Sequence[Array],
                          drift_stacks: Sequence[Array], horizon: int,
                          omega: Array | None = None) -> tuple[float, float]:
    """Empirical ``(zeta, delta)`` from realized barycenters.

    The per-step perturbation is repeated over the ``horizon`` blocks before
    weighting, matching how the stacked barycenter reference shifts.
    """
    if len(qbar) < 2:
        raise ValueError("need at least two steps")
    pert = perturbations(qbar, drift)
    stacks = np.asarray(drift_stacks, dtype=float)
    if omega is None:
        omega = np.eye(stacks.shape[1])
    zeta = max(float(np.linalg.norm(omega @ np.tile(h, horizon))) for h in pert)
    delta = max(float(np.linalg.norm(omega @ s)) for s in stacks)
    return zeta, delta


def ultimate_bound(inputs: BoundInputs) -> float:
    """Asymptotic ceiling on the local Wasserstein distance.

    Raises:
        NoContraction: when ``lam >= 1``.
    """
    if inputs.lam >= 1.0:
        raise NoContraction(f"lambda = {inputs.lam:.6g} >= 1")
    e_max = (inputs.lam * inputs.zeta + 0.5 * inputs.p_norm * inputs.delta) / (1.0 - inputs.lam)
    return float(np.sqrt(e_max ** 2 + inputs.c_bar))


def verify_bound(values: Sequence[float], bound: float, settle_fraction: float = 0.2) -> dict:
    """Check ``values[k] <= bound`` for every k past the settle point.

    ``entry_step`` is the first step after which the series stays within the
    bound for the rest of the run (None if it never settles inside).
    """
    if not 0 < settle_fraction < 1:
        raise ValueError("settle_fraction must be in (0, 1)")
    w = np.asarray(values, dtype=float)
    n = w.size
    settle = int(np.ceil(settle_fraction * n))
    above = w > bound
    post = above[settle:]
    violations = np.flatnonzero(post) + settle
    if above.any():
        last = int(np.flatnonzero(above)[-1])
        entry = last + 1 if last + 1 < n else None
    else:
        entry = 0
    excess = float(np.max(w[settle:] - bound)) if n > settle else float("-inf")
    return {
        "passed": violations.size == 0,
        "entry_step": entry,
        "max_excess": excess,
        "first_violation": int(violations[0]) if violations.size else None,
        "settle_step": settle,
    }


def recursion_residuals(e_w: Sequence[Array], pert_stacked: Sequence[Array],
                        drift_stacks: Sequence[Array], P: Array, omega: Array,
                        mask: Sequence[bool] | None = None) -> Array:
    """Norms of ``e_w[k+1] - [(I-P)(e_w[k] - Omega H[k]) + 1/2 P Omega dQ[k]]``.

    ``mask[k]`` selects which transitions k -> k+1 to evaluate; excluded
    transitions are reported as NaN.
    """
    e_w = np.asarray(e_w, dtype=float)
    n = e_w.shape[0] - 1
    I = np.eye(P.shape[0])
    out = np.full(n, np.nan)
    for k in range(n):
        if mask is not None and not mask[k]:
            continue
        pred = (I - P) @ (e_w[k] - omega @ pert_stacked[k]) + 0.5 * P @ (omega @ drift_stacks[k])
        out[k] = np.linalg.norm(e_w[k + 1] - pred)
    return out


def frozen_mask(indices: Sequence[Array]) -> Array:
    """True for transitions k -> k+1 where the selected sample set is unchanged."""
    return np.array([np.array_equal(np.sort(indices[k]), np.sort(indices[k + 1]))
                     for k in range(len(indices) - 1)], dtype=bool)


def write_bound_report(path: str | Path, reports: dict[str, dict]) -> None:
    with open(path, "w") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")


def analyze_log(log, horizon: int, settle_fraction: float = 0.2) -> dict[str, BoundReport]:
    """Estimate bound inputs per (controller, agent) and check each W series.

    Fills ``bound_estimate`` on the log's records. Keys are ``"<controller>/<agent>"``.
    """
    reports: dict[str, BoundReport] = {}
    for ctrl, agent in log.keys():
        series = log.series(ctrl, agent)
        P = log.projections[(ctrl, agent)]
        lam, p_norm = contraction_factor(P)
        if len(series) >= 2:
            zeta, delta = estimate_disturbances([r.qbar for r in series], [r.drift for r in series],
                                                [r.drift_stack for r in series], horizon)
        else:
            zeta = 0.0
            delta = max((float(np.linalg.norm(r.drift_stack)) for r in series), default=0.0)
        c_bar = max(r.variance for r in series)
        inputs = BoundInputs(lam, p_norm, zeta, delta, c_bar)
        try:
            bound = ultimate_bound(inputs)
        except NoContraction:
            bound = None
        if bound is None:
            check = {"passed": False, "entry_step": None, "max_excess": float("inf"),
                     "first_violation": None}
        else:
            check = verify_bound([r.wasserstein for r in series], bound, settle_fraction)
            for r in series:
                r.bound_estimate = bound
        reports[f"{ctrl}/{agent}"] = BoundReport(
            lam, p_norm, zeta, delta, c_bar, bound, check["passed"], check["entry_step"],
            check["max_excess"], check["first_violation"])
    return reports


def recursion_check(log, controller: str, agent: int, horizon: int,
                    drift_tol: float = 1e-9) -> Array:
    """Recursion residuals of one agent over transitions with an unchanged sample set.

    Transitions where the selected set changes, or the predicted drift
    changes by more than ``drift_tol`` (waypoint switches), are NaN.
    """
    series = log.series(controller, agent)
    P = log.projections[(controller, agent)]
    omega = np.eye(P.shape[0])
    pert = perturbations([r.qbar for r in series], [r.drift for r in series])
    stacked = [np.tile(h, horizon) for h in pert]
    mask = frozen_mask([r.indices for r in series])
    same_drift = np.array([np.linalg.norm(series[k + 1].drift_stack - series[k].drift_stack) <= drift_tol
                           for k in range(len(series) - 1)], dtype=bool)
    return recursion_residuals([r.e_w for r in series], stacked, [r.drift_stack for r in series],
                               P, omega, mask & same_drift)
