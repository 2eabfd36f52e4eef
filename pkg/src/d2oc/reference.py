"""Time-varying reference sample clouds moved by a velocity field."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

# Seed-stream tags; each consumer derives its generator from (seed, tag).
STREAM_CLOUD = 0
STREAM_AGENTS = 1


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for an independent named stream of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


@dataclass(frozen=True)
class Domain:
    lo: tuple[float, ...] = (0.0, 0.0)
    hi: tuple[float, ...] = (100.0, 100.0)

    def clamp(self, pts: Array) -> Array:
        return np.clip(pts, self.lo, self.hi)


@dataclass(frozen=True)
class SampleCloud:
    positions: Array  # (N, d)
    beta: Array  # (N,)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def centroid(self) -> Array:
        return self.positions.mean(axis=0)


def gaussian_cloud(seed: int, n: int, mean, sigma: float) -> SampleCloud:
    if n < 1 or sigma < 0:
        raise ValueError("need n >= 1 and sigma >= 0")
    mean = np.asarray(mean, dtype=float)
    rng = rng_for(seed, STREAM_CLOUD)
    pts = mean + sigma * rng.standard_normal((n, mean.size))
    return SampleCloud(pts, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class VelocityField:
    """Reference flow.

    ``kind`` selects the law:

    * ``constant``: ``velocity`` everywhere.
    * ``waypoint``: ``speed`` toward the active waypoint. With ``rigid`` the
      direction is taken from the cloud centroid and applied to every sample,
      otherwise per sample position.
    * ``vortex``: ``gain`` times the rotated offset from ``center``.

    Magnitudes are clipped to ``v_max`` when it is set.
    """

    kind: Literal["constant", "waypoint", "vortex"] = "constant"
    velocity: tuple[float, ...] = (0.0, 0.0)
    speed: float = 0.0
    waypoints: tuple[tuple[float, ...], ...] = ()
    active: int = 0
    switch_radius: float = 1.0
    rigid: bool = True
    gain: float = 0.0
    center: tuple[float, ...] = (0.0, 0.0)
    v_max: float | None = None

    def advance_waypoint(self, centroid: Array) -> "VelocityField":
        """Move to the next waypoint (cyclically) once the centroid is close."""
        if self.kind != "waypoint" or not self.waypoints:
            return self
        w = np.asarray(self.waypoints[self.active])
        if np.linalg.norm(w - centroid) <= self.switch_radius:
            return replace(self, active=(self.active + 1) % len(self.waypoints))
        return self


def _toward(target: Array, origin: Array, speed: float) -> Array:
    diff = target - origin
    dist = np.linalg.norm(diff, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(dist > 0, speed * diff / np.where(dist > 0, dist, 1.0), 0.0)
    return out


def velocity_at(vf: VelocityField, x, k: int = 0, centroid=None) -> Array:
    """Evaluate the field at point(s) ``x`` (shape ``(d,)`` or ``(N, d)``) at step ``k``."""
    x = np.asarray(x, dtype=float)
    if vf.kind == "constant":
        v = np.broadcast_to(np.asarray(vf.velocity, dtype=float), x.shape).copy()
    elif vf.kind == "waypoint":
        if not vf.waypoints:
            return np.zeros_like(x)
        w = np.asarray(vf.waypoints[vf.active], dtype=float)
        if vf.rigid:
            c = x if centroid is None and x.ndim == 1 else centroid
            if c is None:
                c = x.mean(axis=0)
            v = np.broadcast_to(_toward(w, np.asarray(c, dtype=float), vf.speed), x.shape).copy()
        else:
            v = _toward(w, x, vf.speed)
    elif vf.kind == "vortex":
        off = x - np.asarray(vf.center, dtype=float)
        v = vf.gain * np.stack([-off[..., 1], off[..., 0]], axis=-1)
    else:
        raise ValueError(f"unknown field kind {vf.kind!r}")
    if vf.v_max is not None:
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        scale = np.where(norm > vf.v_max, vf.v_max / np.where(norm > 0, norm, 1.0), 1.0)
        v = v * scale
    return v


def cloud_velocities(cloud: SampleCloud, vf: VelocityField, k: int) -> Array:
    return velocity_at(vf, cloud.positions, k, centroid=cloud.centroid())


def advance_samples(cloud: SampleCloud, vf: VelocityField, dt: float, k: int,
                    domain: Domain | None = None) -> SampleCloud:
    """One forward-Euler Lagrangian step ``q <- q + dt v(q, k)``; weights untouched."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    pts = cloud.positions + dt * cloud_velocities(cloud, vf, k)
    if domain is not None:
        pts = domain.clamp(pts)
    return SampleCloud(pts, cloud.beta)


def write_cloud_csv(path: str | Path, cloud: SampleCloud) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "x", "y", "beta"])
        for j, (p, b) in enumerate(zip(cloud.positions, cloud.beta)):
            w.writerow([j, repr(float(p[0])), repr(float(p[1])), repr(float(b))])


def read_cloud_csv(path: str | Path) -> SampleCloud:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["j"]))
    pts = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    beta = np.array([float(r["beta"]) for r in rows])
    return SampleCloud(pts, beta)
