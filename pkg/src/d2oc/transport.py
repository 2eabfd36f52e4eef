"""Local sample assignment, barycenters and small exact optimal transport."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateWeights, InfeasibleMarginals, NoLiveSamples

Array = NDArray[np.float64]

DEFAULT_BETA_MIN = 1e-4


@dataclass(frozen=True)
class LocalAssignment:
    indices: NDArray[np.int64]
    pi: Array


@dataclass(frozen=True)
class TransportPlan:
    matrix: Array
    cost: float

    @property
    def w2(self) -> float:
        return float(np.sqrt(max(self.cost, 0.0)))


def select_local(positions: Array, beta: Array, y: Array, k_nearest: int,
                 radius: float, beta_min: float = DEFAULT_BETA_MIN) -> NDArray[np.int64]:
    """Ids of up to ``k_nearest`` live samples within ``radius`` of ``y``.

    Ordered by distance, ties by ascending id. If no live sample lies within
    the radius, the ``k_nearest`` globally nearest live samples are returned.

    Raises:
        NoLiveSamples: every weight is <= beta_min.
    """
    if k_nearest < 1:
        raise ValueError("k_nearest must be >= 1")
    live = np.flatnonzero(beta > beta_min)
    if live.size == 0:
        raise NoLiveSamples("all sample weights exhausted")
    d2 = np.sum((positions[live] - y) ** 2, axis=1)
    order = np.lexsort((live, d2))
    inside = order[d2[order] <= radius * radius]
    chosen = inside if inside.size else order
    return live[chosen[:k_nearest]]


def transport_weights(indices, beta: Array) -> LocalAssignment:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("indices must be nonempty")
    b = np.asarray(beta, dtype=float)[indices]
    total = b.sum()
    if not total > 0:
        raise DegenerateWeights("selected weights sum to zero")
    return LocalAssignment(indices, b / total)


def barycenter_and_variance(assignment: LocalAssignment, positions: Array) -> tuple[Array, float]:
    """Weighted barycenter of the assigned samples and the weighted spread around it."""
    q = positions[assignment.indices]
    pi = assignment.pi
    qbar = pi @ q / pi.sum()
    spread = float(pi @ np.sum((q - qbar) ** 2, axis=1))
    return qbar, spread


def local_wasserstein(y: Array, assignment: LocalAssignment, positions: Array) -> float:
    q = positions[assignment.indices]
    return float(np.sqrt(assignment.pi @ np.sum((q - y) ** 2, axis=1)))


def _basis_plan(cells, a: Array, b: Array) -> Array | None:
    """Solve for the plan supported on ``cells`` if they form a spanning tree."""
    M, N = a.size, b.size
    parent = list(range(M + N))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for i, j in cells:
        ri, rj = find(i), find(M + j)
        if ri == rj:
            return None
        parent[ri] = rj

    # peel leaves: a row or column touching a single remaining cell fixes it
    plan = np.zeros((M, N))
    ra, rb = a.copy(), b.copy()
    remaining = set(cells)
    while remaining:
        rows: dict[int, list] = {}
        cols: dict[int, list] = {}
        for c in remaining:
            rows.setdefault(c[0], []).append(c)
            cols.setdefault(c[1], []).append(c)
        leaf = next((v[0] for v in rows.values() if len(v) == 1), None)
        if leaf is not None:
            i, j = leaf
            t = ra[i]
        else:
            leaf = next(v[0] for v in cols.values() if len(v) == 1)
            i, j = leaf
            t = rb[j]
        plan[i, j] = t
        ra[i] -= t
        rb[j] -= t
        remaining.discard(leaf)
    if plan.min() < -1e-12 or np.abs(ra).max() > 1e-9 or np.abs(rb).max() > 1e-9:
        return None
    return np.maximum(plan, 0.0)


def _vertex_plans(a: Array, b: Array):
    """Every basic feasible plan: spanning-tree supports of M + N - 1 cells."""
    M, N = a.size, b.size
    grid = [(i, j) for i in range(M) for j in range(N)]
    for cells in itertools.combinations(grid, M + N - 1):
        plan = _basis_plan(cells, a, b)
        if plan is not None:
            yield plan


def exact_ot_small(points_a, mass_a, points_b, mass_b) -> TransportPlan:
    """Exact squared-Euclidean optimal transport by vertex enumeration.

    Exponential; intended as a reference on tiny instances only (<= 8 points a side).
    """
    pa = np.atleast_2d(np.asarray(points_a, dtype=float))
    pb = np.atleast_2d(np.asarray(points_b, dtype=float))
    a = np.asarray(mass_a, dtype=float)
    b = np.asarray(mass_b, dtype=float)
    if pa.shape[0] > 8 or pb.shape[0] > 8:
        raise ValueError("exact_ot_small supports at most 8 points per side")
    if abs(a.sum() - b.sum()) > 1e-9 or abs(a.sum() - 1.0) > 1e-9:
        raise InfeasibleMarginals(f"mass sums {a.sum()} and {b.sum()} must both be 1")
    cost = np.sum((pa[:, None, :] - pb[None, :, :]) ** 2, axis=2)

    M, N = a.size, b.size
    if M == N and np.allclose(a, 1.0 / M) and np.allclose(b, 1.0 / N):
        # uniform square case: Birkhoff says a permutation is optimal
        best_perm, best = None, np.inf
        for perm in itertools.permutations(range(N)):
            c = cost[np.arange(M), perm].sum() / M
            if c < best:
                best, best_perm = c, perm
        plan = np.zeros((M, N))
        plan[np.arange(M), best_perm] = 1.0 / M
        return TransportPlan(plan, float(best))

    if M * N > 20:
        raise ValueError("non-uniform exact transport limited to M * N <= 20")
    best_plan, best = None, np.inf
    for plan in _vertex_plans(a, b):
        c = float(np.sum(plan * cost))
        if c < best:
            best, best_plan = c, plan
    return TransportPlan(best_plan, best)
