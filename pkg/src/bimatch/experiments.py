"""Monte Carlo harness for the n^(1-p/d) scaling-limit studies.

Every run is deterministic under (config, seed): trial t of the schedule
entry with index i draws from stream (seed, i, t), results are reduced in
fixed trial order, and CSV floats are written with shortest round-trip
formatting, so outputs are byte-identical across reruns and thread counts.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import log
from pathlib import Path

import numpy as np

from .boundary import boundary_matching_cost
from .geometry import BoxRegion, PointCloud
from .graphs import tsp_heuristic
from .matching import CostParams, matching_cost
from .sampling import (
    BlockDensity,
    CantorMeasure,
    HeavyTailRadial,
    MeasureSpec,
    Mixture,
    SingularSegment,
    UniformBox,
    max_radius,
    rng_stream,
)

__all__ = [
    "ExperimentConfig",
    "EstimateRecord",
    "BetaEstimate",
    "run_convergence",
    "estimate_beta",
    "density_functional",
    "run_density_limit",
    "run_singular_decay",
    "run_poissonization_gap",
    "run_tail_max",
    "run_concentration",
    "run_average_monotonicity",
    "write_records_csv",
]

FUNCTIONALS = ("matching", "tsp-heuristic")


@dataclass(frozen=True)
class ExperimentConfig:
    measure: MeasureSpec
    n_schedule: tuple[float, ...]
    trials: tuple[int, ...]
    params: CostParams = CostParams(1.0)
    functional: str = "matching"
    seed: int = 0
    poissonized: bool = True
    boundary: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.functional not in FUNCTIONALS:
            raise ValueError(f"functional must be one of {FUNCTIONALS}")
        sched = tuple(float(n) for n in self.n_schedule)
        if not sched or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("n_schedule must be non-empty and strictly increasing")
        trials = tuple(int(t) for t in self.trials)
        if len(trials) == 1:
            trials = trials * len(sched)
        if len(trials) != len(sched) or any(t < 1 for t in trials):
            raise ValueError("trials must give a positive count per schedule entry")
        object.__setattr__(self, "n_schedule", sched)
        object.__setattr__(self, "trials", trials)
        if self.functional == "tsp-heuristic":
            if self.poissonized:
                raise ValueError("the tour heuristic needs equal sides; use poissonized=false")
            if self.boundary:
                raise ValueError("no scalable boundary solver for tours")
        if self.boundary and self.measure.support_box() is None:
            raise ValueError("boundary runs need a measure supported on a box")
        if not self.in_theory:
            warnings.warn(
                f"d = {self.dim} <= 2p = {2 * self.params.p}: outside the proven "
                "scaling regime; results are tagged out-of-theory", stacklevel=2)

    @property
    def dim(self) -> int:
        return self.measure.dim

    @property
    def in_theory(self) -> bool:
        return self.dim > 2 * self.params.p


@dataclass(frozen=True)
class EstimateRecord:
    n: float
    trials: int
    mean: float
    stderr: float
    ratio: float


@dataclass(frozen=True)
class BetaEstimate:
    beta_hat: float
    uncertainty: float
    beta_fit: float


def _scaling(n: float, p: float, d: int) -> float:
    return n ** (1.0 - p / d)


def _trial_cost(cfg: ExperimentConfig, n: float, n_idx: int, trial: int) -> float:
    rng = rng_stream(cfg.seed, n_idx, trial)
    if cfg.poissonized:
        n1, n2 = int(rng.poisson(n)), int(rng.poisson(n))
    else:
        n1 = n2 = int(n)
    dim = cfg.measure.dim
    x = PointCloud(cfg.measure.sample(rng, n1), dim=dim)
    y = PointCloud(cfg.measure.sample(rng, n2), dim=dim)
    if cfg.functional == "tsp-heuristic":
        if len(x) < 2:
            return 0.0
        return tsp_heuristic(x, y, cfg.params).cost
    if cfg.boundary:
        return boundary_matching_cost(x, y, cfg.params, cfg.measure.support_box()).cost
    return matching_cost(x, y, cfg.params).cost


def _trial_costs(cfg: ExperimentConfig, n_idx: int) -> np.ndarray:
    n = cfg.n_schedule[n_idx]
    count = cfg.trials[n_idx]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            costs = list(pool.map(lambda t: _trial_cost(cfg, n, n_idx, t), range(count)))
    else:
        costs = [_trial_cost(cfg, n, n_idx, t) for t in range(count)]
    return np.asarray(costs)


def _summarize(n: float, costs: np.ndarray, p: float, d: int) -> EstimateRecord:
    mean = float(np.mean(costs))
    stderr = float(np.std(costs, ddof=1) / np.sqrt(len(costs))) if len(costs) > 1 else 0.0
    return EstimateRecord(n=n, trials=len(costs), mean=mean, stderr=stderr,
                          ratio=mean / _scaling(n, p, d))


def run_convergence(cfg: ExperimentConfig) -> list[EstimateRecord]:
    """Per-n Monte Carlo mean cost and scaling ratio mean / n^(1-p/d)."""
    records = []
    for n_idx, n in enumerate(cfg.n_schedule):
        costs = _trial_costs(cfg, n_idx)
        records.append(_summarize(n, costs, cfg.params.p, cfg.dim))
    return records


def estimate_beta(records: list[EstimateRecord]) -> BetaEstimate:
    """Scaling constant estimate: the ratio at the largest n, with an
    uncertainty combining its confidence interval and the last step change.

    A secondary extrapolation fits ratio ~ beta + c * n^(-1/d)-style decay
    and reports the intercept.
    """
    if len(records) < 3:
        raise ValueError("beta estimation needs at least 3 schedule points")
    recs = sorted(records, key=lambda r: r.n)
    last, prev = recs[-1], recs[-2]
    ratio_stderr = last.stderr * last.ratio / last.mean if last.mean else 0.0
    uncertainty = max(1.96 * ratio_stderr, abs(last.ratio - prev.ratio))
    ns = np.array([r.n for r in recs])
    ratios = np.array([r.ratio for r in recs])
    # correction regressor ~ n^(-1/3); the intercept extrapolates n -> inf
    x = ns ** (-1.0 / 3.0)
    slope, intercept = np.polyfit(x, ratios, 1)
    return BetaEstimate(beta_hat=last.ratio, uncertainty=float(uncertainty),
                        beta_fit=float(intercept))


# ---------------------------------------------------------------------------
# closed-form density integral


def density_functional(measure: MeasureSpec, p: float, d: int) -> float:
    """Exact integral of f^(1-p/d) for the absolutely continuous part."""
    if measure.dim != d:
        raise ValueError("dimension mismatch")
    expo = 1.0 - p / d
    if isinstance(measure, UniformBox):
        return measure.box.volume ** (p / d)
    if isinstance(measure, BlockDensity):
        total = 0.0
        for c in range(measure.partition.num_cells):
            vol = measure.partition.cell_box(c).volume
            w = float(measure.weights[c])
            if w > 0:
                total += vol * (w / vol) ** expo
        return total
    if isinstance(measure, (SingularSegment, CantorMeasure)):
        return 0.0
    if isinstance(measure, Mixture):
        boxes = []
        total = 0.0
        for w, comp in measure.components:
            if isinstance(comp, (SingularSegment, CantorMeasure)):
                continue
            if not isinstance(comp, (UniformBox, BlockDensity)):
                raise ValueError(f"no closed form for mixture component {type(comp).__name__}")
            box = comp.support_box()
            for other in boxes:
                overlap = np.minimum(box.hi, other.hi) - np.maximum(box.lo, other.lo)
                if np.all(overlap > 0):
                    raise ValueError("mixture density components must have disjoint supports")
            boxes.append(box)
            total += w ** expo * density_functional(comp, p, d)
        return total
    raise ValueError(f"no closed form for measure kind {type(measure).__name__}")


# ---------------------------------------------------------------------------
# experiment reports


@dataclass
class DensityLimitReport:
    block_records: list[EstimateRecord]
    uniform_plain: list[EstimateRecord]
    uniform_boundary: list[EstimateRecord]
    integral: float
    lower: float
    upper: float
    ratio: float
    within: bool

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "integral": self.integral,
            "lower": self.lower,
            "upper": self.upper,
            "ratio": self.ratio,
            "within": self.within,
        }


def run_density_limit(cfg: ExperimentConfig) -> DensityLimitReport:
    """Sandwich the block-density ratio between boundary- and plain-cube
    calibrations scaled by the closed-form integral of f^(1-p/d)."""
    if not cfg.in_theory:
        raise ValueError("density-limit runs require d > 2p")
    integral = density_functional(cfg.measure, cfg.params.p, cfg.dim)
    unit = UniformBox(BoxRegion.unit_cube(cfg.dim))
    plain_cfg = replace(cfg, measure=unit, boundary=False)
    bound_cfg = replace(cfg, measure=unit, boundary=True)
    block_cfg = replace(cfg, boundary=False)
    uniform_plain = run_convergence(plain_cfg)
    uniform_boundary = run_convergence(bound_cfg)
    block_records = run_convergence(block_cfg)
    rb = block_records[-1]
    rp = uniform_plain[-1]
    rq = uniform_boundary[-1]
    scale = _scaling(rb.n, cfg.params.p, cfg.dim)
    sigma_up = float(np.hypot(rb.stderr / scale, integral * rp.stderr / scale))
    sigma_low = float(np.hypot(rb.stderr / scale, integral * rq.stderr / scale))
    lower = rq.ratio * integral - 3 * sigma_low
    upper = rp.ratio * integral + 3 * sigma_up
    within = lower <= rb.ratio <= upper
    return DensityLimitReport(block_records=block_records, uniform_plain=uniform_plain,
                              uniform_boundary=uniform_boundary, integral=integral,
                              lower=lower, upper=upper, ratio=rb.ratio, within=within)


@dataclass
class SingularDecayReport:
    records: list[EstimateRecord]
    decreasing: bool
    halved: bool
    ac_integral: float

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "ratios": [r.ratio for r in self.records],
            "decreasing": self.decreasing,
            "halved": self.halved,
            "ac_integral": self.ac_integral,
        }


def run_singular_decay(cfg: ExperimentConfig) -> SingularDecayReport:
    """Scaling ratios for a singular (or part-singular) measure.

    The hard assertion is ratio(n_max) < 0.5 * ratio(n_min); with a pure
    segment support the observed decay is about n^(-1/6), so the schedule
    must span a wide n range for the halving to be achievable.
    """
    if not cfg.in_theory:
        raise ValueError("singular-decay runs require d > 2p")
    records = run_convergence(cfg)
    ratios = [r.ratio for r in records]
    decreasing = all(b <= a for a, b in zip(ratios, ratios[1:]))
    halved = ratios[-1] < 0.5 * ratios[0]
    try:
        ac = density_functional(cfg.measure, cfg.params.p, cfg.dim)
    except ValueError:
        ac = float("nan")
    return SingularDecayReport(records=records, decreasing=decreasing,
                               halved=halved, ac_integral=ac)


@dataclass
class PoissonGapReport:
    rows: list[dict]
    monotone_up_to_one_inversion: bool

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "rows": self.rows,
            "monotone_up_to_one_inversion": self.monotone_up_to_one_inversion,
        }


def run_poissonization_gap(cfg: ExperimentConfig) -> PoissonGapReport:
    """Coupled fixed-n vs Poisson(n) runs sharing the same point streams."""
    if cfg.functional != "matching":
        raise ValueError("the poissonization gap experiment uses the matching functional")
    p, d = cfg.params.p, cfg.dim
    rows = []
    for n_idx, n in enumerate(cfg.n_schedule):
        n_int = int(n)
        if n_int != n:
            raise ValueError("poissonization gap needs integer n values")
        fixed = np.zeros(cfg.trials[n_idx])
        poisson = np.zeros(cfg.trials[n_idx])
        for t in range(cfg.trials[n_idx]):
            rng = rng_stream(cfg.seed, n_idx, t)
            n1, n2 = int(rng.poisson(n_int)), int(rng.poisson(n_int))
            dim = cfg.measure.dim
            x_all = cfg.measure.sample(rng, max(n_int, n1))
            y_all = cfg.measure.sample(rng, max(n_int, n2))
            fixed[t] = matching_cost(PointCloud(x_all[:n_int], dim=dim),
                                     PointCloud(y_all[:n_int], dim=dim), cfg.params).cost
            poisson[t] = matching_cost(PointCloud(x_all[:n1], dim=dim),
                                       PointCloud(y_all[:n2], dim=dim), cfg.params).cost
        gap = abs(float(np.mean(fixed)) - float(np.mean(poisson))) / _scaling(n, p, d)
        rows.append({"n": n, "trials": cfg.trials[n_idx],
                     "mean_fixed": float(np.mean(fixed)),
                     "mean_poisson": float(np.mean(poisson)),
                     "normalized_gap": gap})
    gaps = [r["normalized_gap"] for r in rows]
    inversions = sum(1 for a, b in zip(gaps, gaps[1:]) if b > a)
    return PoissonGapReport(rows=rows, monotone_up_to_one_inversion=inversions <= 1)


@dataclass
class TailMaxReport:
    rows: list[dict]
    slope: float
    ratio_slope: float
    alpha: float
    gamma: float

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "rows": self.rows,
            "slope": self.slope,
            "ratio_slope": self.ratio_slope,
            "alpha": self.alpha,
            "gamma": self.gamma,
        }


def run_tail_max(alpha: float, gamma: float, n_schedule, trials: int, seed: int = 0,
                 dim: int = 3, poissonized: bool = True,
                 measure: MeasureSpec | None = None) -> TailMaxReport:
    """Growth of (E T_n^gamma)^(1/gamma) where T_n is the largest point norm."""
    if not 0 < gamma < alpha:
        raise ValueError("need 0 < gamma < alpha")
    measure = measure or HeavyTailRadial(alpha, dim)
    rows = []
    for n_idx, n in enumerate(n_schedule):
        moments = np.zeros(trials)
        for t in range(trials):
            rng = rng_stream(seed, n_idx, t)
            if poissonized:
                n1, n2 = int(rng.poisson(n)), int(rng.poisson(n))
            else:
                n1 = n2 = int(n)
            x = PointCloud(measure.sample(rng, n1), dim=measure.dim)
            y = PointCloud(measure.sample(rng, n2), dim=measure.dim)
            moments[t] = max_radius((x, y)) ** gamma
        value = float(np.mean(moments)) ** (1.0 / gamma)
        rows.append({"n": float(n), "value": value,
                     "ratio": value / float(n) ** (1.0 / alpha)})
    ns = np.array([r["n"] for r in rows])
    vals = np.array([r["value"] for r in rows])
    slope = float(np.polyfit(np.log(ns), np.log(vals), 1)[0])
    return TailMaxReport(rows=rows, slope=slope, ratio_slope=slope - 1.0 / alpha,
                         alpha=alpha, gamma=gamma)


@dataclass
class ConcentrationReport:
    rows: list[dict]
    holds: bool

    def to_dict(self) -> dict:
        return {"schema_version": 1, "rows": self.rows, "holds": self.holds}


def run_concentration(cfg: ExperimentConfig) -> ConcentrationReport:
    """Empirical std of the cost against the bounded-difference envelope
    4 * C * diam^p * sqrt(2 n log 2) (median-level martingale tail)."""
    diam = cfg.measure.support_diameter()
    if diam is None:
        raise ValueError("concentration runs need a bounded-support measure")
    if min(cfg.trials) < 30:
        raise ValueError("concentration estimates need at least 30 trials per n")
    regularity_constant = 1.0
    rows = []
    holds = True
    for n_idx, n in enumerate(cfg.n_schedule):
        costs = _trial_costs(cfg, n_idx)
        std = float(np.std(costs, ddof=1))
        envelope = 4.0 * regularity_constant * diam ** cfg.params.p * np.sqrt(2.0 * n * log(2.0))
        ok = std <= envelope
        holds = holds and ok
        rows.append({"n": n, "trials": int(cfg.trials[n_idx]), "std": std,
                     "envelope": float(envelope),
                     "std_over_sqrt_n": std / np.sqrt(n),
                     "ratio_std": std / _scaling(n, cfg.params.p, cfg.dim),
                     "ok": ok})
    return ConcentrationReport(rows=rows, holds=holds)


@dataclass
class AverageMonotonicityReport:
    mean_small: float
    mean_merged: float
    slack: float
    ok: bool

    def to_dict(self) -> dict:
        return {"schema_version": 1, "mean_small": self.mean_small,
                "mean_merged": self.mean_merged, "slack": self.slack, "ok": self.ok}


def run_average_monotonicity(box: BoxRegion, params: CostParams, n1: float, n2: float,
                             trials: int = 200, seed: int = 0) -> AverageMonotonicityReport:
    """Soft Monte Carlo check that adding an independent Poisson layer can
    lower the expected cost by at most 3 diam^p (sqrt(n1) + sqrt(n2))."""
    small = np.zeros(trials)
    merged = np.zeros(trials)
    uniform = UniformBox(box)
    for t in range(trials):
        rng = rng_stream(seed, t)
        x1 = PointCloud(uniform.sample(rng, int(rng.poisson(n1))), dim=box.dim)
        y1 = PointCloud(uniform.sample(rng, int(rng.poisson(n1))), dim=box.dim)
        x2 = PointCloud(uniform.sample(rng, int(rng.poisson(n2))), dim=box.dim)
        y2 = PointCloud(uniform.sample(rng, int(rng.poisson(n2))), dim=box.dim)
        small[t] = matching_cost(x1, y1, params).cost
        merged[t] = matching_cost(x1.union(x2), y1.union(y2), params).cost
    slack = 3.0 * box.diameter ** params.p * (np.sqrt(n1) + np.sqrt(n2))
    mean_small = float(np.mean(small))
    mean_merged = float(np.mean(merged))
    ok = mean_small <= mean_merged + slack
    if not ok:
        warnings.warn("average monotonicity soft check exceeded its slack", stacklevel=2)
    return AverageMonotonicityReport(mean_small=mean_small, mean_merged=mean_merged,
                                     slack=float(slack), ok=ok)


# ---------------------------------------------------------------------------
# CSV output


def write_records_csv(records: list[EstimateRecord], cfg: ExperimentConfig, path) -> None:
    """Standard records table; floats use shortest round-trip formatting so
    identical runs produce byte-identical files."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "trials", "mean", "stderr", "ratio",
                         "functional", "p", "d", "seed", "schema_version"])
        label = cfg.functional + ("-boundary" if cfg.boundary else "")
        for r in records:
            writer.writerow([repr(r.n), r.trials, repr(r.mean), repr(r.stderr),
                             repr(r.ratio), label, repr(cfg.params.p), cfg.dim,
                             cfg.seed, 1])
