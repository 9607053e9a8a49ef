"""Dyadic partition machinery: subadditive upper bounds, the superadditive
boundary lower bound, and the empirical size-bound check."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import boundary_matching_cost
from .geometry import BoxRegion, PointCloud, dyadic_partition
from .graphs import GraphFamily, generic_cost
from .matching import CostParams, matching_cost

__all__ = [
    "CellTerm",
    "PartitionBoundReport",
    "partition_upper_bound",
    "boundary_lower_bound",
    "SizeBoundReport",
    "size_bound_check",
]

_TOL = 1e-9


@dataclass
class CellTerm:
    cell: int
    count_x: int
    count_y: int
    cost: float
    excess_term: float


@dataclass
class PartitionBoundReport:
    total_cost: float
    bound: float
    per_cell: list[CellTerm]
    holds: bool

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "total_cost": self.total_cost,
            "bound": self.bound,
            "holds": self.holds,
            "per_cell": [vars(t) for t in self.per_cell],
        }


def _cell_instances(x: PointCloud, y: PointCloud, root: BoxRegion, level: int):
    part = dyadic_partition(root, level)
    split_x = part.split(x)
    split_y = part.split(y)
    for cell in range(part.num_cells):
        yield cell, part.cell_box(cell), x.subset(split_x[cell]), y.subset(split_y[cell])


def partition_upper_bound(x: PointCloud, y: PointCloud, root: BoxRegion, level: int,
                          family: GraphFamily | None = None,
                          params: CostParams | None = None,
                          constant: float | None = None) -> PartitionBoundReport:
    """Realized subadditive decomposition over a dyadic partition.

    bound = sum_P L(X n P, Y n P)
          + C * diam(root)^p * sum_P 1{P nonempty} * (1 + |X(P) - Y(P)|)
    and the report verifies L(X, Y) <= bound.
    """
    if params is None:
        raise ValueError("cost params required")
    family = family or GraphFamily.matching()
    if constant is None:
        constant = family.subadd_constant

    def solve(a: PointCloud, b: PointCloud) -> float:
        if family.kind == "matching":
            return matching_cost(a, b, params).cost
        return generic_cost(a, b, family, params).cost

    diam_term = constant * root.diameter ** params.p
    per_cell = []
    bound = 0.0
    for cell, _, cx, cy in _cell_instances(x, y, root, level):
        cost = solve(cx, cy)
        active = 1 if (len(cx) + len(cy)) > 0 else 0
        excess = diam_term * active * (1 + abs(len(cx) - len(cy)))
        per_cell.append(CellTerm(cell, len(cx), len(cy), cost, excess))
        bound += cost + excess
    total = solve(x, y)
    return PartitionBoundReport(total_cost=total, bound=bound,
                                per_cell=per_cell, holds=total <= bound + _TOL)


def boundary_lower_bound(x: PointCloud, y: PointCloud, root: BoxRegion, level: int,
                         params: CostParams) -> PartitionBoundReport:
    """Superadditive decomposition: sum of per-cell boundary costs is a
    lower bound on the boundary cost at the root."""
    per_cell = []
    bound = 0.0
    for cell, box, cx, cy in _cell_instances(x, y, root, level):
        cost = boundary_matching_cost(cx, cy, params, box).cost
        per_cell.append(CellTerm(cell, len(cx), len(cy), cost, 0.0))
        bound += cost
    total = boundary_matching_cost(x, y, params, root).cost
    return PartitionBoundReport(total_cost=total, bound=bound,
                                per_cell=per_cell, holds=total >= bound - _TOL)


@dataclass
class SizeBoundReport:
    rows: list[dict]
    max_ratio: float
    slope: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "rows": self.rows,
            "max_ratio": self.max_ratio,
            "slope": self.slope,
            "holds": self.holds,
        }


def size_bound_check(groups: list[tuple[float, list[tuple[PointCloud, PointCloud]]]],
                     box: BoxRegion, params: CostParams,
                     slope_tol: float = 0.02) -> SizeBoundReport:
    """Empirical boundedness of E L(nu) / (diam^p * min(nu, nu^(1-p/d))).

    groups pairs each total intensity nu(Q) with sampled instances on the
    common box Q. Boundedness is asserted as a log-log least-squares slope
    of the ratio at most slope_tol.
    """
    d = box.dim
    p = params.p
    rows = []
    for intensity, instances in groups:
        if intensity <= 0 or not instances:
            raise ValueError("each group needs a positive intensity and instances")
        costs = [matching_cost(cx, cy, params).cost for cx, cy in instances]
        mean = float(np.mean(costs))
        denom = box.diameter ** p * min(intensity, intensity ** (1.0 - p / d))
        rows.append({"intensity": intensity, "mean_cost": mean,
                     "ratio": mean / denom, "trials": len(costs)})
    ratios = np.array([r["ratio"] for r in rows])
    intensities = np.array([r["intensity"] for r in rows])
    if len(rows) >= 2 and np.all(ratios > 0):
        slope = float(np.polyfit(np.log(intensities), np.log(ratios), 1)[0])
    else:
        slope = 0.0
    return SizeBoundReport(rows=rows, max_ratio=float(ratios.max()),
                           slope=slope, holds=slope <= slope_tol)
