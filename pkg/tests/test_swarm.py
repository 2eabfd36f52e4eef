import itertools
from dataclasses import replace

import numpy as np
import pytest

from d2oc.config import ScenarioConfig
from d2oc.errors import LengthMismatch
from d2oc.swarm import (
    _consensus,
    _plant,
    consensus_merge,
    initial_world,
    run_simulation,
    simulate_step,
    update_weights,
)


def small_cfg(**kw) -> ScenarioConfig:
    cfg = ScenarioConfig()
    cfg = replace(cfg, plume=replace(cfg.plume, n_samples=kw.pop("n_samples", 40)),
                  horizon=replace(cfg.horizon, steps=kw.pop("steps", 30), H=kw.pop("H", 6)),
                  agents=replace(cfg.agents, n_agents=kw.pop("n_agents", 2)),
                  controller=replace(cfg.controller, mode=kw.pop("mode", "both")))
    return cfg.with_overrides(**kw)


def test_update_weights_examples():
    pos = np.array([[0.0, 0.0], [10.0, 0.0]])
    out = update_weights(np.array([1.0, 1.0]), np.zeros(2), pos, 0.5, 1.0)
    assert out[0] == pytest.approx(0.5)
    assert out[1] == pytest.approx(1.0 - 0.5 * np.exp(-50.0))
    np.testing.assert_array_equal(update_weights(np.ones(2), np.zeros(2), pos, 0.0, 1.0), [1, 1])
    assert update_weights(np.ones(2), np.zeros(2), pos, 1.0, 1.0)[0] == 0.0


def test_update_weights_bounds(rng):
    for _ in range(50):
        beta = rng.random(20)
        out = update_weights(beta, rng.uniform(0, 10, 2), rng.uniform(0, 10, (20, 2)),
                             rng.random(), rng.uniform(0.1, 5))
        assert np.all(out >= 0) and np.all(out <= beta)


def test_consensus_examples():
    a, b = consensus_merge(np.array([0.8, 0.2, 1.0]), np.array([0.5, 0.6, 1.0]))
    np.testing.assert_array_equal(a, [0.5, 0.2, 1.0])
    np.testing.assert_array_equal(b, a)
    a, b = consensus_merge(np.ones(3), np.ones(3))
    np.testing.assert_array_equal(a, np.ones(3))
    with pytest.raises(LengthMismatch):
        consensus_merge(np.ones(3), np.ones(4))


def test_consensus_order_independent(rng):
    maps = [rng.random(10) for _ in range(3)]
    results = set()
    for order in itertools.permutations(range(3)):
        cur = [m.copy() for m in maps]
        for i, j in itertools.combinations(order, 2):
            cur[i], cur[j] = consensus_merge(cur[i], cur[j])
        results.add(tuple(np.minimum.reduce(cur)))
        np.testing.assert_array_equal(np.minimum.reduce(cur), np.minimum.reduce(maps))
    assert len(results) == 1


def test_consensus_respects_range():
    cfg = small_cfg(n_agents=3, mode="nominal")
    plant = _plant(cfg)
    world = initial_world(cfg, plant.model)
    agents = world.populations["nominal"]
    xs = np.zeros((3, 8))
    xs[1, 0] = 10.0
    xs[2, 0] = 90.0
    for a, x in zip(agents, xs):
        a.x = x
    agents[0].weight_map = np.full(40, 0.2)
    agents[1].weight_map = np.full(40, 0.5)
    agents[2].weight_map = np.full(40, 0.1)
    _consensus(agents, plant.model, 25.0)
    np.testing.assert_array_equal(agents[1].weight_map, np.full(40, 0.2))
    np.testing.assert_array_equal(agents[2].weight_map, np.full(40, 0.1))


def test_single_agent_single_sample():
    cfg = small_cfg(n_samples=1, n_agents=1, mode="nominal", steps=1)
    plant = _plant(cfg)
    world = initial_world(cfg, plant.model)
    world, recs = simulate_step(world, cfg, plant)
    (rec,) = recs
    np.testing.assert_array_equal(rec.indices, [0])
    np.testing.assert_allclose(rec.qbar, world.cloud.positions[0])
    assert rec.variance == 0.0
    assert rec.wasserstein == pytest.approx(np.linalg.norm(rec.y - rec.qbar))


def test_both_mode_shares_cloud():
    cfg = small_cfg(steps=10)
    log = run_simulation(cfg)
    for ctrl in ("nominal", "ff"):
        assert len(log.series(ctrl, 0)) == 10
    # same initial position for both populations at step 0
    np.testing.assert_array_equal(log.series("nominal", 0)[0].y, log.series("ff", 0)[0].y)
    for snap in log.snapshots:
        assert set(snap["agents"]) == {"nominal", "ff"}
    ref = run_simulation(small_cfg(steps=10, mode="nominal"))
    np.testing.assert_array_equal([r.wasserstein for r in ref.series("nominal", 1)],
                                  [r.wasserstein for r in log.series("nominal", 1)])


def test_agents_in_range_end_with_equal_maps():
    cfg = small_cfg(n_agents=2, mode="nominal", steps=1)
    plant = _plant(cfg)
    world = initial_world(cfg, plant.model)
    for a in world.populations["nominal"]:
        a.x = np.zeros(8)
        a.x[[0, 4]] = 30.0
    world.populations["nominal"][1].x[0] += 5.0
    world, _ = simulate_step(world, cfg, plant)
    a, b = world.populations["nominal"]
    np.testing.assert_array_equal(a.weight_map, b.weight_map)


def test_zero_steps():
    log = run_simulation(small_cfg(steps=0))
    assert log.records == [] and log.snapshots == [] and log.completed


def test_deterministic():
    a = run_simulation(small_cfg(steps=25))
    b = run_simulation(small_cfg(steps=25))
    assert [(r.wasserstein, r.ratio) for r in a.records] == [(r.wasserstein, r.ratio) for r in b.records]


def test_weights_monotone_non_increasing():
    cfg = small_cfg(steps=20, mode="ff")
    plant = _plant(cfg)
    world = initial_world(cfg, plant.model)
    prev = [a.weight_map.copy() for a in world.populations["ff"]]
    for _ in range(20):
        world, _ = simulate_step(world, cfg, plant)
        cur = [a.weight_map.copy() for a in world.populations["ff"]]
        for p, c in zip(prev, cur):
            assert np.all(c <= p)
        prev = cur


def test_full_application_replans_every_horizon():
    log = run_simulation(small_cfg(steps=13, H=6, mode="ff"))
    flags = [r.replanned for r in log.series("ff", 0)]
    assert flags == [k % 6 == 0 for k in range(13)]
    rec = run_simulation(small_cfg(steps=5, H=6, mode="ff", receding=True))
    assert all(r.replanned for r in rec.records)
