"""Exact minimum-cost bipartite matching with power costs.

The main entry point is matching_cost(X, Y, params): the minimum of
sum |X_i - Y_sigma(i)|^p over injections from the smaller cloud into the
larger one. The solver is exact (assignment on the dense cost matrix, via
a shortest-augmenting-path implementation with node potentials), because
the inequality suites assert sharp constants and a heuristic would produce
false violations. Two independent oracles live alongside it: exhaustive
injection enumeration for tiny instances and the classical sorted order
statistics matching in dimension 1 for convex costs.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .geometry import PointCloud

__all__ = [
    "CostParams",
    "SolveResult",
    "SizeLimitError",
    "cost_matrix",
    "assignment_min_cost",
    "matching_cost",
    "brute_force_matching",
    "monotone_matching_1d",
]

# Exhaustive enumeration guard: factorial blowup beyond this side size.
BRUTE_FORCE_MAX_SIDE = 8
_BRUTE_FORCE_MAX_INJECTIONS = 2_000_000


class SizeLimitError(ValueError):
    """An exact solver refused an instance above its size guard."""


@dataclass(frozen=True)
class CostParams:
    """Cost exponent p, derived boundary weight q = min(2^(p-1), 1), penalty eps."""

    p: float
    eps: float = 0.0

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("exponent p must be positive")
        if self.eps < 0:
            raise ValueError("penalty eps must be non-negative")

    @property
    def q(self) -> float:
        return min(2.0 ** (self.p - 1.0), 1.0)


@dataclass
class SolveResult:
    """Certificate returned by every solver.

    matched holds the edges of the solution graph as (i into X, j into Y)
    pairs; boundary_x/boundary_y list points assigned to the region boundary
    (penalized variants only); unmatched_x/unmatched_y list leftovers of the
    larger side in plain matching. Each index appears exactly once per side.
    """

    cost: float
    matched: list[tuple[int, int]] = field(default_factory=list)
    boundary_x: list[int] = field(default_factory=list)
    boundary_y: list[int] = field(default_factory=list)
    unmatched_x: list[int] = field(default_factory=list)
    unmatched_y: list[int] = field(default_factory=list)
    exact: bool = True

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "cost": self.cost,
            "matched": [[int(i), int(j)] for i, j in self.matched],
            "boundary_x": [int(i) for i in self.boundary_x],
            "boundary_y": [int(j) for j in self.boundary_y],
            "unmatched_x": [int(i) for i in self.unmatched_x],
            "unmatched_y": [int(j) for j in self.unmatched_y],
            "exact": self.exact,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def cost_matrix(x: PointCloud, y: PointCloud, params: CostParams) -> np.ndarray:
    """Dense matrix of |X_i - Y_j|^p."""
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if len(x) == 0 or len(y) == 0:
        return np.zeros((len(x), len(y)))
    d = cdist(x.points, y.points)
    return d if params.p == 1.0 else d ** params.p


def assignment_min_cost(costs: np.ndarray) -> tuple[np.ndarray, float]:
    """Optimal permutation for a square cost matrix and its total cost."""
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {costs.shape}")
    if costs.size and not np.all(np.isfinite(costs)):
        raise ValueError("cost matrix entries must be finite")
    rows, cols = linear_sum_assignment(costs)
    perm = np.empty(costs.shape[0], dtype=np.intp)
    perm[rows] = cols
    return perm, float(costs[rows, cols].sum())


def _solve_rectangular(costs: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Assignment on an m x n matrix (m <= n): match every row optimally."""
    if costs.size and not np.all(np.isfinite(costs)):
        raise ValueError("cost matrix entries must be finite")
    rows, cols = linear_sum_assignment(costs)
    return rows, cols, float(costs[rows, cols].sum())


def _canonical_order(x: PointCloud, y: PointCloud) -> bool:
    """True when (x, y) should be swapped so equal inputs solve identically."""
    if len(x) != len(y):
        return len(y) < len(x)
    return y.points.tobytes() < x.points.tobytes()


def matching_cost(x: PointCloud, y: PointCloud, params: CostParams) -> SolveResult:
    """Minimum power-cost matching of the smaller cloud into the larger one.

    Symmetric in (x, y) with bit-identical cost, zero when either side is
    empty, and exact: the certificate cost is the true minimum.
    """
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    swapped = _canonical_order(x, y)
    a, b = (y, x) if swapped else (x, y)
    costs = cost_matrix(a, b, params)
    if len(a) == 0:
        pairs: list[tuple[int, int]] = []
        total = 0.0
        used_b: set[int] = set()
    else:
        rows, cols, total = _solve_rectangular(costs)
        pairs = list(zip(rows.tolist(), cols.tolist()))
        used_b = set(cols.tolist())
    unmatched_b = [j for j in range(len(b)) if j not in used_b]
    if swapped:
        matched = sorted((j, i) for i, j in pairs)
        return SolveResult(cost=total, matched=matched, unmatched_y=[], unmatched_x=unmatched_b)
    return SolveResult(cost=total, matched=sorted(pairs), unmatched_y=unmatched_b)


def brute_force_matching(x: PointCloud, y: PointCloud, params: CostParams) -> SolveResult:
    """Exhaustive minimum over all injections; the reference oracle."""
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    m, n = len(x), len(y)
    if min(m, n) > BRUTE_FORCE_MAX_SIDE:
        raise SizeLimitError(f"brute force limited to min side <= {BRUTE_FORCE_MAX_SIDE}")
    swapped = n < m
    a, b = (y, x) if swapped else (x, y)
    ka, kb = len(a), len(b)
    if ka == 0:
        result = SolveResult(cost=0.0, unmatched_y=list(range(kb)))
    else:
        count = 1
        for v in range(kb, kb - ka, -1):
            count *= v
        if count > _BRUTE_FORCE_MAX_INJECTIONS:
            raise SizeLimitError(f"too many injections to enumerate ({count})")
        costs = cost_matrix(a, b, params)
        injections = np.array(list(itertools.permutations(range(kb), ka)), dtype=np.intp)
        totals = costs[np.arange(ka)[None, :], injections].sum(axis=1)
        best = int(np.argmin(totals))
        cols = injections[best]
        pairs = list(zip(range(ka), cols.tolist()))
        unmatched_b = [j for j in range(kb) if j not in set(cols.tolist())]
        result = SolveResult(cost=float(totals[best]), matched=pairs, unmatched_y=unmatched_b)
    if swapped:
        return SolveResult(
            cost=result.cost,
            matched=sorted((j, i) for i, j in result.matched),
            unmatched_x=result.unmatched_y,
        )
    return result


def monotone_matching_1d(x: PointCloud, y: PointCloud, params: CostParams) -> SolveResult:
    """Sorted order statistics matching; optimal in d = 1 for p >= 1."""
    if x.dim != 1 or y.dim != 1:
        raise ValueError("monotone matching requires dimension 1")
    if len(x) != len(y):
        raise ValueError("monotone matching requires equal cardinalities")
    if params.p < 1:
        raise ValueError("monotone matching is an oracle for p >= 1 only")
    ix = np.argsort(x.points[:, 0], kind="stable")
    iy = np.argsort(y.points[:, 0], kind="stable")
    gaps = np.abs(x.points[ix, 0] - y.points[iy, 0])
    total = float((gaps ** params.p).sum())
    return SolveResult(cost=total, matched=sorted(zip(ix.tolist(), iy.tolist())))
