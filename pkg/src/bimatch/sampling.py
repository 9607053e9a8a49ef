"""Seeded generation of the input ensembles used by the experiments.

Every generator draws from an explicit numpy Generator built from a
counter-based splittable seed (SeedSequence with a spawn key), so trial i of
an experiment owns stream (base_seed, i) and results never depend on
execution order or thread scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import BoxRegion, DyadicPartition, PointCloud

__all__ = [
    "MeasureSpec",
    "UniformBox",
    "BlockDensity",
    "SingularSegment",
    "CantorMeasure",
    "HeavyTailRadial",
    "Mixture",
    "SampleConfig",
    "rng_stream",
    "sample_pair",
    "max_radius",
]

_WEIGHT_TOL = 1e-12


def rng_stream(base_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for stream (base_seed, key...)."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


class MeasureSpec:
    """A sampleable probability measure on R^d."""

    dim: int

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def support_box(self) -> BoxRegion | None:
        """Smallest natural box support, or None when there is no box (unbounded
        or lower-dimensional support)."""
        return None

    def support_diameter(self) -> float | None:
        """Diameter of the support; None when unbounded."""
        box = self.support_box()
        return None if box is None else box.diameter

    def is_bounded(self) -> bool:
        return self.support_diameter() is not None


@dataclass(frozen=True)
class UniformBox(MeasureSpec):
    box: BoxRegion

    @property
    def dim(self) -> int:
        return self.box.dim

    def sample(self, rng, count):
        return self.box.sample_uniform(rng, count)

    def support_box(self):
        return self.box


@dataclass(frozen=True)
class BlockDensity(MeasureSpec):
    """Piecewise-constant density: pick a cell by weight, then uniform in it."""

    partition: DyadicPartition
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.partition.num_cells,):
            raise ValueError(
                f"need {self.partition.num_cells} weights, got {w.shape}")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        total = float(w.sum())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {_WEIGHT_TOL}, got {total}")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.partition.root.dim

    def sample(self, rng, count):
        part = self.partition
        cells = rng.choice(part.num_cells, size=count, p=self.weights)
        offsets = rng.random((count, self.dim))
        lows = np.array([part.cell_box(int(c)).lo for c in range(part.num_cells)])
        return lows[cells] + offsets * part.cell_side

    def support_box(self):
        return self.partition.root

    def cell_densities(self) -> np.ndarray:
        vols = np.array([self.partition.cell_box(c).volume
                         for c in range(self.partition.num_cells)])
        return self.weights / vols


@dataclass(frozen=True)
class SingularSegment(MeasureSpec):
    """Uniform measure on the segment [a, b] in R^d; singular for d >= 2."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("segment endpoints must be points of equal dimension")
        if np.all(a == b):
            raise ValueError("degenerate segment")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def sample(self, rng, count):
        t = rng.random((count, 1))
        return self.a + t * (self.b - self.a)

    def support_diameter(self):
        return float(np.sqrt(np.sum((self.b - self.a) ** 2)))


@dataclass(frozen=True)
class CantorMeasure(MeasureSpec):
    """Middle-thirds Cantor measure on [0, 1]; the d = 1 singular exemplar."""

    depth: int = 40

    @property
    def dim(self) -> int:
        return 1

    def sample(self, rng, count):
        bits = rng.integers(0, 2, size=(count, self.depth)).astype(np.float64)
        scales = 2.0 / 3.0 ** np.arange(1, self.depth + 1)
        return (bits * scales).sum(axis=1, keepdims=True)

    def support_diameter(self):
        return 1.0


@dataclass(frozen=True)
class HeavyTailRadial(MeasureSpec):
    """Radius with Pareto tail P(R >= t) = t^-alpha for t >= 1, uniform direction.

    Satisfies mu({|x| >= t}) <= t^-alpha with constant 1, the simplest law
    with an exact tail exponent.
    """

    alpha: float
    ndim: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("tail exponent alpha must be positive")
        if self.ndim < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def dim(self) -> int:
        return self.ndim

    def sample(self, rng, count):
        u = 1.0 - rng.random(count)  # in (0, 1]
        radii = u ** (-1.0 / self.alpha)
        direction = rng.standard_normal((count, self.ndim))
        norms = np.sqrt((direction ** 2).sum(axis=1))
        # a zero normal vector has probability 0; fall back to the first axis
        bad = norms == 0.0
        if np.any(bad):
            direction[bad] = 0.0
            direction[bad, 0] = 1.0
            norms[bad] = 1.0
        return direction * (radii / norms)[:, None]

    def support_diameter(self):
        return None


@dataclass(frozen=True)
class Mixture(MeasureSpec):
    """Mixture of measures; the component of each point is drawn by weight."""

    components: tuple[tuple[float, MeasureSpec], ...]

    def __post_init__(self):
        comps = tuple((float(w), m) for w, m in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        dims = {m.dim for _, m in comps}
        if len(dims) != 1:
            raise ValueError("mixture components must share a dimension")
        weights = np.array([w for w, _ in comps])
        if np.any(weights < 0):
            raise ValueError("mixture weights must be non-negative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0][1].dim

    def sample(self, rng, count):
        weights = np.array([w for w, _ in self.components])
        weights = weights / weights.sum()
        which = rng.choice(len(self.components), size=count, p=weights)
        out = np.zeros((count, self.dim))
        for idx, (_, measure) in enumerate(self.components):
            mask = which == idx
            k = int(mask.sum())
            if k:
                out[mask] = measure.sample(rng, k)
        return out

    def support_diameter(self):
        # crude enclosing bound: None if any component is unbounded
        radii = []
        for _, m in self.components:
            d = m.support_diameter()
            if d is None:
                return None
            box = m.support_box()
            if box is not None:
                radii.append(float(np.max(np.abs(box.lo)) + np.max(np.abs(box.hi)) + d))
            else:
                radii.append(d)
        # loose but finite; callers only rely on boundedness and an upper bound
        return float(sum(radii))


@dataclass(frozen=True)
class SampleConfig:
    """One reproducible draw of a pair of clouds."""

    measure: MeasureSpec
    n: float
    poissonized: bool = False
    seed: int = 0
    stream: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if not self.poissonized and self.n != int(self.n):
            raise ValueError("fixed-size sampling needs an integer n")


def sample_pair(cfg: SampleConfig) -> tuple[PointCloud, PointCloud]:
    """Two independent clouds from cfg.measure, reproducible from the seed.

    Poissonized: cardinalities are independent Poisson(n) draws. Otherwise
    both clouds have exactly n points.
    """
    rng = rng_stream(cfg.seed, *cfg.stream)
    if cfg.poissonized:
        n1 = int(rng.poisson(cfg.n))
        n2 = int(rng.poisson(cfg.n))
    else:
        n1 = n2 = int(cfg.n)
    dim = cfg.measure.dim
    x = PointCloud(cfg.measure.sample(rng, n1), dim=dim)
    y = PointCloud(cfg.measure.sample(rng, n2), dim=dim)
    return x, y


def max_radius(clouds: tuple[PointCloud, PointCloud]) -> float:
    """Largest Euclidean norm over the union; 0 when both clouds are empty."""
    x, y = clouds
    best = 0.0
    for cloud in (x, y):
        if len(cloud):
            best = max(best, float(cloud.norms().max()))
    return best
