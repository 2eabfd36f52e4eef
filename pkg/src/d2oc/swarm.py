"""Multi-agent density tracking loop.

One step of :func:`simulate_step`:

1. advance the shared reference cloud along the velocity field;
2. per agent: select local samples, weight them, form the local barycenter,
   predict its drift, solve the (nominal or feedforward) QP, apply the input
   and decay the agent's private weight map around its new position;
3. min-consensus between every pair of agents within communication range;
4. emit one :class:`StepRecord` per agent.

In ``both`` mode two populations, one per controller, share the cloud but
never exchange weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .config import ScenarioConfig
from .control import (
    HorizonReference,
    assemble_qp,
    build_omega,
    error_decomposition,
    input_penalty,
    predict_drift,
    solve_feedforward,
    solve_nominal,
)
from .dynamics import LiftedSystem, LtiModel, build_lifted, make_quadcopter_model
from .errors import LengthMismatch, NoLiveSamples
from .reference import (
    STREAM_AGENTS,
    Domain,
    SampleCloud,
    VelocityField,
    advance_samples,
    gaussian_cloud,
    rng_for,
)
from .transport import barycenter_and_variance, local_wasserstein, select_local, transport_weights

Array = NDArray[np.float64]

CSV_COLUMNS = ["step", "agent", "controller", "wasserstein", "e_w_norm", "e0_norm",
               "ratio", "lambda", "p_norm", "bound_estimate"]


def update_weights(weight_map: Array, y: Array, positions: Array, gamma: float,
                   sigma_c: float) -> Array:
    """Decay remaining weights by a Gaussian coverage kernel centred on ``y``."""
    d2 = np.sum((positions - y) ** 2, axis=1)
    out = weight_map * (1.0 - gamma * np.exp(-d2 / (2.0 * sigma_c ** 2)))
    return np.maximum(out, 0.0)


def consensus_merge(map_a: Array, map_b: Array) -> tuple[Array, Array]:
    if len(map_a) != len(map_b):
        raise LengthMismatch(f"weight maps differ in length: {len(map_a)} vs {len(map_b)}")
    m = np.minimum(map_a, map_b)
    return m, m.copy()


@dataclass
class Agent:
    id: int
    x: Array
    weight_map: Array
    plan: list = field(default_factory=list)


@dataclass
class StepRecord:
    step: int
    agent: int
    controller: str
    wasserstein: float
    e_w_norm: float
    e0_norm: float
    ratio: float | None
    lam: float
    p_norm: float
    y: Array
    qbar: Array
    variance: float
    drift: Array
    indices: Array
    e_w: Array
    drift_stack: Array
    replanned: bool
    bound_estimate: float | None = None


@dataclass
class MetricsLog:
    records: list[StepRecord] = field(default_factory=list)
    # per-(controller, agent) projection matrix; constant because the omega
    # blocks are sqrt(sum pi) = 1 for normalized assignments
    projections: dict[tuple[str, int], Array] = field(default_factory=dict)
    snapshots: list[dict] = field(default_factory=list)
    completed: bool = True

    def series(self, controller: str, agent: int) -> list[StepRecord]:
        return [r for r in self.records if r.controller == controller and r.agent == agent]

    def keys(self) -> list[tuple[str, int]]:
        seen: dict[tuple[str, int], None] = {}
        for r in self.records:
            seen.setdefault((r.controller, r.agent), None)
        return list(seen)


@dataclass
class World:
    k: int
    cloud: SampleCloud
    field: VelocityField
    populations: dict[str, list[Agent]]


@dataclass(frozen=True)
class _Plant:
    model: LtiModel
    lifted: LiftedSystem
    R: Array
    omega: Array


def _controllers(mode: str) -> list[str]:
    return ["nominal", "ff"] if mode == "both" else [mode]


def make_field(cfg: ScenarioConfig) -> VelocityField:
    p = cfg.plume
    return VelocityField(kind=p.field, velocity=tuple(p.velocity), speed=p.speed,
                         waypoints=tuple(tuple(w) for w in p.waypoints),
                         switch_radius=p.switch_radius, rigid=p.rigid, gain=p.gain,
                         center=tuple(p.center), v_max=p.v_max)


def make_domain(cfg: ScenarioConfig) -> Domain:
    x0, y0, x1, y1 = cfg.plume.domain
    return Domain((x0, y0), (x1, y1))


def _plant(cfg: ScenarioConfig) -> _Plant:
    model = make_quadcopter_model(cfg.horizon.dt, cfg.agents.g, cfg.agents.tau)
    lifted = build_lifted(model, cfg.horizon.H)
    R = input_penalty(cfg.controller.r_scale, model.m * cfg.horizon.H)
    omega = build_omega(np.ones(cfg.horizon.H), model.d)
    return _Plant(model, lifted, R, omega)


def initial_world(cfg: ScenarioConfig, model: LtiModel | None = None) -> World:
    model = model or make_quadcopter_model(cfg.horizon.dt, cfg.agents.g, cfg.agents.tau)
    p = cfg.plume
    cloud = gaussian_cloud(cfg.seed, p.n_samples, p.mean, p.sigma)
    domain = make_domain(cfg)
    cloud = SampleCloud(domain.clamp(cloud.positions), cloud.beta)
    rng = rng_for(cfg.seed, STREAM_AGENTS)
    lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
    starts = lo + (hi - lo) * rng.random((cfg.agents.n_agents, model.d))
    Cpinv = np.linalg.pinv(model.C)
    pops = {}
    for ctrl in _controllers(cfg.controller.mode):
        pops[ctrl] = [Agent(i, Cpinv @ s, cloud.beta.copy()) for i, s in enumerate(starts)]
    return World(0, cloud, make_field(cfg), pops)


def _consensus(agents: list[Agent], model: LtiModel, comm_range: float) -> None:
    """Pairwise min-merges within range, swept until nothing changes."""
    ys = [model.output(a.x) for a in agents]
    pairs = [(i, j) for i in range(len(agents)) for j in range(i + 1, len(agents))
             if np.linalg.norm(ys[i] - ys[j]) <= comm_range]
    for _ in range(max(1, len(agents) - 1)):
        changed = False
        for i, j in pairs:
            a, b = agents[i], agents[j]
            if not np.array_equal(a.weight_map, b.weight_map):
                a.weight_map, b.weight_map = consensus_merge(a.weight_map, b.weight_map)
                changed = True
        if not changed:
            break


def simulate_step(world: World, cfg: ScenarioConfig, plant: _Plant | None = None,
                  log: MetricsLog | None = None) -> tuple[World, list[StepRecord]]:
    """Advance the world by one step.

    Raises:
        NoLiveSamples: some agent's weight map is exhausted (scenario complete).
    """
    plant = plant or _plant(cfg)
    model, lifted, R, omega = plant.model, plant.lifted, plant.R, plant.omega
    ctrl_cfg, H, dt = cfg.controller, cfg.horizon.H, cfg.horizon.dt
    k = world.k
    domain = make_domain(cfg)

    vf = world.field.advance_waypoint(world.cloud.centroid())
    cloud = advance_samples(world.cloud, vf, dt, k, domain)
    positions = cloud.positions
    centroid = cloud.centroid()

    records: list[StepRecord] = []
    for ctrl, agents in world.populations.items():
        for agent in agents:
            y = model.output(agent.x)
            idx = select_local(positions, agent.weight_map, y, ctrl_cfg.k_nearest,
                               ctrl_cfg.radius, ctrl_cfg.beta_min)
            asg = transport_weights(idx, agent.weight_map)
            qbar, var = barycenter_and_variance(asg, positions)
            w = local_wasserstein(y, asg, positions)
            drift = predict_drift(asg, positions, vf, dt, k, centroid=centroid)

            ref = HorizonReference.feedforward(qbar, drift, H)
            qp = assemble_qp(lifted, omega, agent.x, ref, R)
            rep = error_decomposition(lifted, omega, agent.x, ref.qbar_stack,
                                      ref.drift_stack, R, qp=qp)
            if log is not None:
                log.projections.setdefault((ctrl, agent.id), rep.P)

            replanned = ctrl_cfg.receding or not agent.plan
            if replanned:
                U = solve_feedforward(qp, lifted, omega, ref.drift_stack) if ctrl == "ff" \
                    else solve_nominal(qp)
                steps = U.reshape(H, model.m)
                agent.plan = [steps[0]] if ctrl_cfg.receding else list(steps)
            u = agent.plan.pop(0)
            agent.x = model.step(agent.x, u)
            agent.weight_map = update_weights(agent.weight_map, model.output(agent.x), positions,
                                              cfg.weights.gamma, cfg.weights.sigma_c)

            records.append(StepRecord(
                step=k, agent=agent.id, controller=ctrl, wasserstein=w,
                e_w_norm=float(np.linalg.norm(rep.e_w)), e0_norm=float(np.linalg.norm(rep.e0_total)),
                ratio=rep.ratio, lam=rep.lam, p_norm=rep.p_norm, y=y, qbar=qbar, variance=var,
                drift=drift, indices=asg.indices, e_w=rep.e_w, drift_stack=ref.drift_stack,
                replanned=replanned,
            ))
        _consensus(agents, model, cfg.agents.comm_range)

    return World(k + 1, cloud, vf, world.populations), records


def run_simulation(cfg: ScenarioConfig) -> MetricsLog:
    """Run the configured scenario to completion; deterministic in ``cfg``."""
    cfg.validate()
    plant = _plant(cfg)
    world = initial_world(cfg, plant.model)
    log = MetricsLog()
    every = cfg.output.snapshot_every
    for k in range(cfg.horizon.steps):
        if every and k % every == 0:
            log.snapshots.append(_snapshot(world, plant.model))
        try:
            world, recs = simulate_step(world, cfg, plant, log)
        except NoLiveSamples:
            log.completed = False
            break
        log.records.extend(recs)
    return log


def _snapshot(world: World, model: LtiModel) -> dict:
    return {
        "step": world.k,
        "cloud": SampleCloud(world.cloud.positions.copy(), world.cloud.beta.copy()),
        "agents": {ctrl: [(a.id, model.output(a.x)) for a in agents]
                   for ctrl, agents in world.populations.items()},
    }


def _fmt(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_metrics_csv(path: str | Path, log: MetricsLog) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in log.records:
            w.writerow([r.step, r.agent, r.controller, _fmt(r.wasserstein), _fmt(r.e_w_norm),
                        _fmt(r.e0_norm), _fmt(r.ratio), _fmt(r.lam), _fmt(r.p_norm),
                        _fmt(r.bound_estimate)])


def write_snapshot_csv(path: str | Path, snap: dict) -> None:
    """Agent and sample positions at one step; ``kind`` is ``sample`` or a controller name."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "kind", "id", "x", "y", "beta"])
        cloud = snap["cloud"]
        for j, (p, b) in enumerate(zip(cloud.positions, cloud.beta)):
            w.writerow([snap["step"], "sample", j, repr(float(p[0])), repr(float(p[1])), repr(float(b))])
        for ctrl, agents in snap["agents"].items():
            for i, y in agents:
                w.writerow([snap["step"], ctrl, i, repr(float(y[0])), repr(float(y[1])), ""])
