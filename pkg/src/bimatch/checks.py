"""Randomized inequality checks for the optimization functionals.

Each check evaluates a constant-bearing inequality on a corpus of seeded
adversarial instances (clusters, near-boundary points, coincident points,
unbalanced cardinalities). A violation beyond the float-noise slack is a
hard failure: the functionals are exact, so the inequalities must hold on
every instance. Failing instances are shrunk to a minimal counterexample
by greedy point removal and serialized for replay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .boundary import boundary_matching_cost
from .bounds import boundary_lower_bound
from .geometry import BoxRegion, PointCloud
from .graphs import GraphFamily, generic_cost
from .matching import CostParams, matching_cost
from .sampling import rng_stream

__all__ = [
    "CheckReport",
    "Violation",
    "check_subadditivity_matching",
    "check_regularity_matching",
    "check_subadditivity_generic",
    "check_inverse_subadd_matching",
    "check_inverse_subadd_tsp",
    "check_homogeneity",
    "check_boundary_superadditivity",
    "serialize_instance",
    "load_instance",
]

TOL = 1e-9


@dataclass
class Violation:
    margin: float
    instance: dict

    def to_dict(self) -> dict:
        return {"schema_version": 1, "margin": self.margin, "instance": self.instance}


@dataclass
class CheckReport:
    name: str
    instances: int
    violations: list[Violation] = field(default_factory=list)
    max_margin: float = -np.inf

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "name": self.name,
            "instances": self.instances,
            "passed": self.passed,
            "max_margin": self.max_margin,
            "violations": [v.to_dict() for v in self.violations],
        }


# ---------------------------------------------------------------------------
# instance plumbing


def serialize_instance(instance: dict) -> dict:
    out = {}
    for key, value in instance.items():
        if key == "clouds":
            out[key] = {name: np.asarray(c.points).tolist() if len(c) else []
                        for name, c in value.items()}
            out["cloud_dims"] = {name: c.dim for name, c in value.items()}
        elif isinstance(value, BoxRegion):
            out[key] = {"lo": value.lo.tolist(), "hi": value.hi.tolist()}
        elif isinstance(value, np.ndarray):
            out[key] = value.tolist()
        elif isinstance(value, GraphFamily):
            out[key] = {"kind": value.kind, "param": value.param}
        else:
            out[key] = value
    return out


def load_instance(payload: dict) -> dict:
    instance = {}
    dims = payload.get("cloud_dims", {})
    for key, value in payload.items():
        if key == "clouds":
            instance[key] = {
                name: PointCloud(rows, dim=dims.get(name)) if rows
                else PointCloud.empty(int(dims[name]))
                for name, rows in value.items()
            }
        elif key == "cloud_dims":
            continue
        elif key == "box" and value is not None:
            instance[key] = BoxRegion(np.array(value["lo"]), np.array(value["hi"]))
        elif key == "family" and isinstance(value, dict):
            instance[key] = GraphFamily(value["kind"], value.get("param"))
        elif key in ("a",) and isinstance(value, list):
            instance[key] = np.array(value)
        else:
            instance[key] = value
    return instance


def _shrink(instance: dict, margin_of: Callable[[dict], float]) -> dict:
    """Greedy point removal keeping the violation alive."""
    current = instance
    while True:
        removed = False
        for name in sorted(current["clouds"]):
            cloud = current["clouds"][name]
            for i in range(len(cloud)):
                keep = [k for k in range(len(cloud)) if k != i]
                cand = dict(current)
                cand["clouds"] = dict(current["clouds"])
                cand["clouds"][name] = cloud.subset(keep) if keep else PointCloud.empty(cloud.dim)
                try:
                    if margin_of(cand) > TOL:
                        current = cand
                        removed = True
                        break
                except ValueError:
                    continue
            if removed:
                break
        if not removed:
            return current


def _run(name: str, instances: list[dict], margin_of: Callable[[dict], float]) -> CheckReport:
    report = CheckReport(name=name, instances=len(instances))
    for instance in instances:
        margin = margin_of(instance)
        report.max_margin = max(report.max_margin, margin)
        if margin > TOL:
            minimal = _shrink(instance, margin_of)
            report.violations.append(
                Violation(margin=float(margin_of(minimal)),
                          instance=serialize_instance(minimal)))
    return report


# ---------------------------------------------------------------------------
# adversarial generators


def _adversarial_cloud(rng: np.random.Generator, box: BoxRegion, size: int) -> PointCloud:
    d = box.dim
    if size == 0:
        return PointCloud.empty(d)
    pts: list[np.ndarray] = []
    centers = box.sample_uniform(rng, max(1, size // 3))
    while len(pts) < size:
        roll = rng.random()
        if roll < 0.35:
            center = centers[rng.integers(len(centers))]
            pt = center + 0.02 * box.side * rng.standard_normal(d)
            pt = np.clip(pt, box.lo, box.hi)
        elif roll < 0.55:
            pt = box.sample_uniform(rng, 1)[0]
            axis = int(rng.integers(d))
            pt[axis] = box.lo[axis] if rng.random() < 0.5 else box.hi[axis]
        elif roll < 0.7 and pts:
            pt = pts[int(rng.integers(len(pts)))].copy()
        else:
            pt = box.sample_uniform(rng, 1)[0]
        pts.append(pt)
    return PointCloud(np.array(pts), dim=d)


def _random_box(rng: np.random.Generator) -> BoxRegion:
    d = int(rng.integers(1, 4))
    lo = rng.uniform(-1.0, 1.0, size=d)
    side = rng.uniform(0.4, 2.0)
    return BoxRegion(lo, lo + side)


def _pick_p(rng: np.random.Generator, values) -> float:
    return float(values[int(rng.integers(len(values)))])


# ---------------------------------------------------------------------------
# the checks


def check_subadditivity_matching(instances: list[dict] | None = None,
                                 n_instances: int = 500, seed: int = 101) -> CheckReport:
    """Union matching cost vs per-group costs plus the half-diameter excess
    term over the cardinality mismatches."""

    def margin_of(inst: dict) -> float:
        params = CostParams(inst["p"])
        box = inst["box"]
        k = inst["k"]
        groups = [(inst["clouds"][f"x{i}"], inst["clouds"][f"y{i}"]) for i in range(k)]
        ux = groups[0][0]
        uy = groups[0][1]
        for gx, gy in groups[1:]:
            ux = ux.union(gx)
            uy = uy.union(gy)
        lhs = matching_cost(ux, uy, params).cost
        rhs = sum(matching_cost(gx, gy, params).cost for gx, gy in groups)
        rhs += 0.5 * box.diameter ** params.p * sum(
            abs(len(gx) - len(gy)) for gx, gy in groups)
        return lhs - rhs

    if instances is None:
        instances = []
        for idx in range(n_instances):
            rng = rng_stream(seed, idx)
            box = _random_box(rng)
            k = int(rng.integers(2, 5))
            clouds = {}
            for i in range(k):
                clouds[f"x{i}"] = _adversarial_cloud(rng, box, int(rng.integers(0, 7)))
                clouds[f"y{i}"] = _adversarial_cloud(rng, box, int(rng.integers(0, 7)))
            instances.append({"p": _pick_p(rng, (0.5, 1.0, 2.0)), "box": box,
                              "k": k, "clouds": clouds})
    return _run("subadditivity_matching", instances, margin_of)


def check_regularity_matching(instances: list[dict] | None = None,
                              n_instances: int = 500, seed: int = 102) -> CheckReport:
    """Swapping one added pair of multisets for another costs at most
    diam^p per added or removed point."""

    def margin_of(inst: dict) -> float:
        params = CostParams(inst["p"])
        box = inst["box"]
        c = inst["clouds"]
        lhs = matching_cost(c["x"].union(c["x1"]), c["y"].union(c["y1"]), params).cost
        rhs = matching_cost(c["x"].union(c["x2"]), c["y"].union(c["y2"]), params).cost
        rhs += box.diameter ** params.p * (
            len(c["x1"]) + len(c["x2"]) + len(c["y1"]) + len(c["y2"]))
        return lhs - rhs

    if instances is None:
        instances = []
        for idx in range(n_instances):
            rng = rng_stream(seed, idx)
            box = _random_box(rng)
            clouds = {name: _adversarial_cloud(rng, box, int(rng.integers(0, 7)))
                      for name in ("x", "y", "x1", "y1", "x2", "y2")}
            instances.append({"p": _pick_p(rng, (0.5, 1.0, 2.0)), "box": box,
                              "clouds": clouds})
    return _run("regularity_matching", instances, margin_of)


def check_subadditivity_generic(family: GraphFamily,
                                instances: list[dict] | None = None,
                                n_instances: int = 200, seed: int = 103) -> CheckReport:
    """Generic-family subadditivity with constant (3 + kappa0) * kappa / 2."""

    constant = family.subadd_constant

    def margin_of(inst: dict) -> float:
        params = CostParams(inst["p"])
        box = inst["box"]
        k = inst["k"]
        groups = [(inst["clouds"][f"x{i}"], inst["clouds"][f"y{i}"]) for i in range(k)]
        ux, uy = groups[0]
        for gx, gy in groups[1:]:
            ux = ux.union(gx)
            uy = uy.union(gy)
        lhs = generic_cost(ux, uy, family, params).cost
        rhs = sum(generic_cost(gx, gy, family, params).cost for gx, gy in groups)
        rhs += constant * box.diameter ** params.p * sum(
            1 + abs(len(gx) - len(gy)) for gx, gy in groups)
        return lhs - rhs

    if instances is None:
        instances = []
        for idx in range(n_instances):
            rng = rng_stream(seed, idx)
            box = _random_box(rng)
            k = 2 if rng.random() < 0.7 else 3
            clouds = {}
            for i in range(k):
                clouds[f"x{i}"] = _adversarial_cloud(rng, box, int(rng.integers(0, 4)))
                clouds[f"y{i}"] = _adversarial_cloud(rng, box, int(rng.integers(0, 4)))
            instances.append({"p": _pick_p(rng, (0.5, 1.0, 2.0)), "box": box,
                              "k": k, "clouds": clouds,
                              "family": family})
    return _run(f"subadditivity_{family.label()}", instances, margin_of)


def check_inverse_subadd_matching(instances: list[dict] | None = None,
                                  n_instances: int = 500, seed: int = 104) -> CheckReport:
    """Cost of one pair vs the merged instance plus the other pair, p <= 1."""

    def margin_of(inst: dict) -> float:
        if inst["p"] > 1:
            raise ValueError("inverse subadditivity is only proven for p <= 1")
        params = CostParams(inst["p"])
        box = inst["box"]
        c = inst["clouds"]
        lhs = matching_cost(c["x1"], c["y1"], params).cost
        rhs = matching_cost(c["x1"].union(c["x2"]), c["y1"].union(c["y2"]), params).cost
        rhs += matching_cost(c["x2"], c["y2"], params).cost
        rhs += box.diameter ** params.p * (
            abs(len(c["x1"]) - len(c["y1"])) + 2 * abs(len(c["x2"]) - len(c["y2"])))
        return lhs - rhs

    if instances is None:
        instances = []
        for idx in range(n_instances):
            rng = rng_stream(seed, idx)
            box = _random_box(rng)
            clouds = {name: _adversarial_cloud(rng, box, int(rng.integers(0, 8)))
                      for name in ("x1", "y1", "x2", "y2")}
            instances.append({"p": _pick_p(rng, (0.5, 0.8, 1.0)), "box": box,
                              "clouds": clouds})
    return _run("inverse_subadditivity_matching", instances, margin_of)


def check_inverse_subadd_tsp(instances: list[dict] | None = None,
                             n_instances: int = 200, seed: int = 105) -> CheckReport:
    """Tour cost of one pair vs merged plus other, constant 2, p <= 1."""

    family = GraphFamily.tsp_tour()

    def margin_of(inst: dict) -> float:
        if inst["p"] > 1:
            raise ValueError("inverse subadditivity is only proven for p <= 1")
        params = CostParams(inst["p"])
        box = inst["box"]
        c = inst["clouds"]
        lhs = generic_cost(c["x1"], c["y1"], family, params).cost
        rhs = generic_cost(c["x1"].union(c["x2"]), c["y1"].union(c["y2"]),
                           family, params).cost
        rhs += generic_cost(c["x2"], c["y2"], family, params).cost
        rhs += 2.0 * box.diameter ** params.p * (
            1 + abs(len(c["x1"]) - len(c["y1"])) + abs(len(c["x2"]) - len(c["y2"])))
        return lhs - rhs

    if instances is None:
        instances = []
        for idx in range(n_instances):
            rng = rng_stream(seed, idx)
            box = _random_box(rng)
            clouds = {name: _adversarial_cloud(rng, box, int(rng.integers(0, 5)))
                      for name in ("x1", "y1", "x2", "y2")}
            instances.append({"p": _pick_p(rng, (0.5, 1.0)), "box": box,
                              "clouds": clouds})
    return _run("inverse_subadditivity_tsp", instances, margin_of)


def check_homogeneity(family: GraphFamily | None = None,
                      instances: list[dict] | None = None,
                      n_instances: int = 500, seed: int = 106) -> CheckReport:
    """L(a + lam X, a + lam Y) = lam^p L(X, Y) within 1e-9 relative."""

    family = family or GraphFamily.matching()

    def solve(a: PointCloud, b: PointCloud, params: CostParams) -> float:
        return generic_cost(a, b, family, params).cost

    def margin_of(inst: dict) -> float:
        params = CostParams(inst["p"])
        c = inst["clouds"]
        lam = inst["lam"]
        a = np.asarray(inst["a"])
        base = solve(c["x"], c["y"], params)
        scaled = solve(c["x"].affine(a, lam), c["y"].affine(a, lam), params)
        expected = lam ** params.p * base
        return abs(scaled - expected) - TOL * max(1.0, abs(expected))

    if instances is None:
        lams = (0.5, 1.0, 2.0, 7.3)
        instances = []
        max_side = 8 if family.kind == "matching" else 5
        for idx in range(n_instances):
            rng = rng_stream(seed, idx)
            box = _random_box(rng)
            clouds = {
                "x": _adversarial_cloud(rng, box, int(rng.integers(0, max_side))),
                "y": _adversarial_cloud(rng, box, int(rng.integers(0, max_side))),
            }
            instances.append({
                "p": _pick_p(rng, (0.7, 1.0, 2.0)),
                "lam": float(lams[idx % len(lams)]),
                "a": rng.uniform(-3, 3, size=box.dim),
                "clouds": clouds,
            })
    return _run(f"homogeneity_{family.label()}", instances, margin_of)


def check_boundary_superadditivity(instances: list[dict] | None = None,
                                   n_instances: int = 500, seed: int = 107) -> CheckReport:
    """Boundary cost at the root dominates the sum over partition cells."""

    def margin_of(inst: dict) -> float:
        params = CostParams(inst["p"])
        report = boundary_lower_bound(inst["clouds"]["x"], inst["clouds"]["y"],
                                      inst["box"], inst["level"], params)
        return report.bound - report.total_cost

    if instances is None:
        instances = []
        for idx in range(n_instances):
            rng = rng_stream(seed, idx)
            box = _random_box(rng)
            clouds = {
                "x": _adversarial_cloud(rng, box, int(rng.integers(0, 14))),
                "y": _adversarial_cloud(rng, box, int(rng.integers(0, 14))),
            }
            instances.append({"p": _pick_p(rng, (0.5, 1.0, 2.0)), "box": box,
                              "level": int(rng.integers(1, 3)), "clouds": clouds})
    return _run("boundary_superadditivity", instances, margin_of)


def write_violations(report: CheckReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, violation in enumerate(report.violations):
        path = out / f"{report.name}_violation_{i}.json"
        path.write_text(json.dumps(violation.to_dict(), sort_keys=True, indent=1))
        paths.append(path)
    return paths
