"""Capacitated assignment of N points to m generators (capacity n = N/m):
the greedy least-cost heuristic and an exact oracle for small instances."""

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class AssignmentPlan:
    assignment: np.ndarray  # (N,) region indices
    capacity: int
    cost: float  # total squared distance (sum, not mean)

    def __post_init__(self):
        object.__setattr__(self, "assignment",
                           np.asarray(self.assignment, dtype=int))

    @property
    def size(self):
        return len(self.assignment)

    def to_json(self):
        return json.dumps({"capacity": self.capacity,
                           "assignment": self.assignment.tolist(),
                           "cost": self.cost})

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(assignment=np.array(obj["assignment"]),
                   capacity=obj["capacity"], cost=obj["cost"])


def distance_matrix(points, generators):
    """Squared Euclidean distances, shape (N, m); N must divide by m."""
    points = np.asarray(points, dtype=float)
    generators = np.asarray(generators, dtype=float)
    if points.shape[1] != generators.shape[1]:
        raise ValueError("dimension mismatch")
    if len(points) % len(generators) != 0:
        raise ValueError(f"{len(points)} points not divisible by {len(generators)} generators")
    d2 = ((points * points).sum(axis=1)[:, None]
          + (generators * generators).sum(axis=1)[None, :]
          - 2.0 * points @ generators.T)
    return np.maximum(d2, 0.0)


def _finalize(points, generators, assignment, capacity):
    counts = np.bincount(assignment, minlength=len(generators))
    assert np.all(counts == capacity), "infeasible plan: capacities violated"
    cost = float(((points - generators[assignment]) ** 2).sum())
    return AssignmentPlan(assignment=assignment, capacity=capacity, cost=cost)


def lcm_assign(points, generators, capacity):
    """Greedy least-cost assignment: repeatedly take the globally smallest
    unmasked distance entry (ties by smaller row, then smaller column),
    assign the point, mask its row, and mask a column once it holds
    `capacity` points."""
    m = len(generators)
    n_points = len(points)
    if n_points != capacity * m:
        raise ValueError("need N = capacity * m")
    dmat = distance_matrix(points, generators)
    # stable argsort of the row-major flattening realizes the
    # (value, i, j) lexicographic tie-break
    order = np.argsort(dmat, axis=None, kind="stable").tolist()
    assignment = np.full(n_points, -1, dtype=int)
    row_free = [True] * n_points
    col_slots = [capacity] * m
    remaining = n_points
    for flat in order:
        i, j = divmod(flat, m)
        if row_free[i] and col_slots[j]:
            assignment[i] = j
            row_free[i] = False
            col_slots[j] -= 1
            remaining -= 1
            if remaining == 0:
                break
    return _finalize(np.asarray(points, dtype=float),
                     np.asarray(generators, dtype=float), assignment, capacity)


def optimal_assign(points, generators, capacity):
    """Exact minimum-cost plan: duplicates each generator `capacity` times
    and solves the resulting square assignment problem. N <= 256."""
    points = np.asarray(points, dtype=float)
    generators = np.asarray(generators, dtype=float)
    m = len(generators)
    n_points = len(points)
    if n_points != capacity * m:
        raise ValueError("need N = capacity * m")
    if n_points > 256:
        raise ValueError("optimal_assign limited to N <= 256")
    dmat = distance_matrix(points, generators)
    big = np.repeat(dmat, capacity, axis=1)  # column block j*capacity..(j+1)*capacity-1 = region j
    rows, cols = linear_sum_assignment(big)
    assignment = np.empty(n_points, dtype=int)
    assignment[rows] = cols // capacity
    return _finalize(points, generators, assignment, capacity)
