"""Points, point clouds, axis-aligned boxes, and dyadic partitions.

Points are plain 1-d float64 arrays. A cloud is an immutable (n, d) array
with multiset semantics: duplicates are allowed and the order of rows never
affects any cost computed from it. Boxes are half-open [lo, hi) for
partition membership and closed for boundary distances, so that cell
assignment is a function while the distance to the boundary keeps its
geometric meaning.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PointCloud",
    "BoxRegion",
    "DyadicPartition",
    "euclid_dist",
    "boundary_dist",
    "diameter",
    "dyadic_partition",
]


def _as_point(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"a point must be a non-empty 1-d coordinate array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def euclid_dist(x, y) -> float:
    """Euclidean distance between two points of the same dimension."""
    xa, ya = _as_point(x), _as_point(y)
    if xa.shape != ya.shape:
        raise ValueError(f"dimension mismatch: {xa.shape[0]} vs {ya.shape[0]}")
    return float(np.sqrt(np.sum((xa - ya) ** 2)))


class PointCloud:
    """Immutable multiset of d-dimensional points, stored as an (n, d) array."""

    __slots__ = ("_points",)

    def __init__(self, points, dim: int | None = None):
        arr = np.asarray(points, dtype=np.float64)
        if arr.size == 0:
            if dim is None:
                if arr.ndim == 2 and arr.shape[1] > 0:
                    dim = arr.shape[1]
                else:
                    raise ValueError("empty cloud needs an explicit dim")
            arr = arr.reshape(0, dim)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ValueError(f"expected an (n, d) array, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise ValueError(f"dimension mismatch: points have d={arr.shape[1]}, expected {dim}")
        if arr.shape[1] < 1:
            raise ValueError("dimension must be >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cloud coordinates must be finite")
        arr = np.array(arr, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        self._points = arr

    @classmethod
    def empty(cls, dim: int) -> "PointCloud":
        return cls(np.empty((0, dim)), dim=dim)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self._points.shape[0]

    def __getitem__(self, i: int) -> np.ndarray:
        return self._points[i]

    def __iter__(self):
        return iter(self._points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self._points.shape == other._points.shape and bool(
            np.all(self._points == other._points)
        )

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, dim={self.dim})"

    def subset(self, indices) -> "PointCloud":
        idx = np.asarray(indices, dtype=np.intp)
        return PointCloud(self._points[idx], dim=self.dim)

    def union(self, other: "PointCloud") -> "PointCloud":
        """Multiset union (concatenation)."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in union")
        return PointCloud(np.concatenate([self._points, other._points]), dim=self.dim)

    def affine(self, shift=0.0, scale=1.0) -> "PointCloud":
        """Return the cloud a + lam * X used by homogeneity checks."""
        return PointCloud(np.asarray(shift, dtype=np.float64) + float(scale) * self._points,
                          dim=self.dim)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self._points ** 2, axis=1))

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i}" for i in range(self.dim)])
            for row in self._points:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "PointCloud":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header != [f"x{i}" for i in range(len(header))]:
                raise ValueError(f"{path}: expected header x0,...,x{{d-1}}")
            rows = [[float(v) for v in row] for row in reader if row]
        if not rows:
            return cls.empty(len(header))
        return cls(np.array(rows), dim=len(header))


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box with lo < hi on every axis."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _as_point(self.lo)
        hi = _as_point(self.hi)
        if lo.shape != hi.shape:
            raise ValueError("lo/hi dimension mismatch")
        if not np.all(lo < hi):
            raise ValueError("box requires lo < hi on every axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit_cube(cls, dim: int) -> "BoxRegion":
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def cube(cls, dim: int, side: float, origin=0.0) -> "BoxRegion":
        lo = np.full(dim, float(origin))
        return cls(lo, lo + float(side))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def side(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.side))

    @property
    def diameter(self) -> float:
        return float(np.sqrt(np.sum(self.side ** 2)))

    def contains(self, x, tol: float = 0.0) -> bool:
        """Closed-box membership."""
        xa = _as_point(x)
        if xa.shape[0] != self.dim:
            raise ValueError("dimension mismatch")
        return bool(np.all(xa >= self.lo - tol) and np.all(xa <= self.hi + tol))

    def contains_cloud(self, cloud: PointCloud, tol: float = 0.0) -> bool:
        if len(cloud) == 0:
            return True
        pts = cloud.points
        return bool(np.all(pts >= self.lo - tol) and np.all(pts <= self.hi + tol))

    # Containment for boundary distances tolerates 1e-12 of float noise so
    # that points sitting on arithmetically-derived cell faces still count
    # as inside; distances are clamped at 0.
    _CONTAIN_TOL = 1e-12

    def boundary_dist(self, x) -> float:
        """Distance from an interior point to the box boundary."""
        xa = _as_point(x)
        if not self.contains(xa, tol=self._CONTAIN_TOL):
            raise ValueError(f"point {xa} outside box [{self.lo}, {self.hi}]")
        return max(0.0, float(min(np.min(xa - self.lo), np.min(self.hi - xa))))

    def boundary_dists(self, cloud: PointCloud) -> np.ndarray:
        """Vectorized boundary distances for a cloud inside the box."""
        if not self.contains_cloud(cloud, tol=self._CONTAIN_TOL):
            raise ValueError("cloud has points outside the box")
        pts = cloud.points
        if len(cloud) == 0:
            return np.zeros(0)
        dists = np.minimum((pts - self.lo).min(axis=1), (self.hi - pts).min(axis=1))
        return np.maximum(dists, 0.0)

    def sample_uniform(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lo + rng.random((count, self.dim)) * self.side


def boundary_dist(x, s: BoxRegion) -> float:
    """Distance from x to the boundary of the box s; x must lie in the closed box."""
    return s.boundary_dist(x)


def diameter(obj) -> float:
    """Diameter of a box (corner to corner) or of a point cloud (max pairwise)."""
    if isinstance(obj, BoxRegion):
        return obj.diameter
    if isinstance(obj, PointCloud):
        if len(obj) == 0:
            raise ValueError("diameter of an empty cloud is undefined")
        pts = obj.points
        # O(n^2) pairwise scan; fine at the instance sizes this library targets.
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff ** 2).sum(axis=2).max()))
    raise TypeError(f"diameter expects BoxRegion or PointCloud, got {type(obj)!r}")


@dataclass(frozen=True)
class DyadicPartition:
    """Partition of a box into 2^(level*d) congruent half-open subboxes.

    Cells are indexed lexicographically by their integer multi-index, axis 0
    most significant. Membership uses the half-open convention: a point on a
    shared internal face belongs to the cell whose lo it touches, and points
    on the top faces of the root are clamped into the last cell along each
    axis so that every point of the closed root is assigned.
    """

    root: BoxRegion
    level: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        side = self.root.side / float(2 ** self.level)
        if not np.all(side > 0.0):
            raise ValueError("cell side underflows to 0 at this level")

    @property
    def cells_per_axis(self) -> int:
        return 2 ** self.level

    @property
    def num_cells(self) -> int:
        return self.cells_per_axis ** self.root.dim

    @property
    def cell_side(self) -> np.ndarray:
        return self.root.side / float(self.cells_per_axis)

    def cell_box(self, flat_index: int) -> BoxRegion:
        multi = self._unflatten(flat_index)
        lo = self.root.lo + multi * self.cell_side
        return BoxRegion(lo, lo + self.cell_side)

    @property
    def cells(self) -> list[BoxRegion]:
        return [self.cell_box(i) for i in range(self.num_cells)]

    def _unflatten(self, flat_index: int) -> np.ndarray:
        if not 0 <= flat_index < self.num_cells:
            raise IndexError(f"cell index {flat_index} out of range")
        k = self.cells_per_axis
        multi = np.zeros(self.root.dim, dtype=np.int64)
        rem = flat_index
        for axis in range(self.root.dim - 1, -1, -1):
            multi[axis] = rem % k
            rem //= k
        return multi

    def cell_of(self, x) -> int:
        """Flat index of the cell containing x (root membership required)."""
        xa = _as_point(x)
        if not self.root.contains(xa):
            raise ValueError("point outside the partition root")
        k = self.cells_per_axis
        multi = np.floor((xa - self.root.lo) / self.cell_side).astype(np.int64)
        multi = np.clip(multi, 0, k - 1)
        flat = 0
        for axis in range(self.root.dim):
            flat = flat * k + int(multi[axis])
        return flat

    def assign(self, cloud: PointCloud) -> np.ndarray:
        """Cell index for every point of a cloud inside the root."""
        if not self.root.contains_cloud(cloud):
            raise ValueError("cloud has points outside the partition root")
        if len(cloud) == 0:
            return np.zeros(0, dtype=np.int64)
        k = self.cells_per_axis
        multi = np.floor((cloud.points - self.root.lo) / self.cell_side).astype(np.int64)
        multi = np.clip(multi, 0, k - 1)
        flat = np.zeros(len(cloud), dtype=np.int64)
        for axis in range(self.root.dim):
            flat = flat * k + multi[:, axis]
        return flat

    def split(self, cloud: PointCloud) -> list[np.ndarray]:
        """Per-cell index arrays into the cloud, one entry per cell."""
        flat = self.assign(cloud)
        return [np.flatnonzero(flat == c) for c in range(self.num_cells)]


def dyadic_partition(root: BoxRegion, level: int) -> DyadicPartition:
    """Build the level-th dyadic partition of a box."""
    return DyadicPartition(root, level)
