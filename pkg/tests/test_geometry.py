import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bimatch.geometry import (
    BoxRegion,
    PointCloud,
    boundary_dist,
    diameter,
    dyadic_partition,
    euclid_dist,
)


class TestEuclidDist:
    def test_identity(self):
        assert euclid_dist((0, 0), (0, 0)) == 0.0

    def test_unit_cube_diagonal(self):
        assert euclid_dist((0, 0, 0), (1, 1, 1)) == pytest.approx(math.sqrt(3), abs=0)

    def test_high_precision_oracle(self):
        # oracle: mpmath arbitrary-precision evaluation of sqrt(0.6^2 + 0.6^2)
        import mpmath

        mpmath.mp.dps = 50
        expected = float(mpmath.sqrt((mpmath.mpf(0.9) - mpmath.mpf(0.3)) ** 2
                                     + (mpmath.mpf(0.1) - mpmath.mpf(0.7)) ** 2))
        got = euclid_dist((0.3, 0.7), (0.9, 0.1))
        assert got == pytest.approx(expected, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            euclid_dist((0, 0), (0, 0, 0))

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, b = rng.random(3), rng.random(3)
            assert euclid_dist(a, b) == euclid_dist(b, a)


class TestBoundaryDist:
    def test_center_of_unit_square(self):
        assert boundary_dist((0.5, 0.5), BoxRegion.unit_cube(2)) == 0.5

    def test_point_on_boundary(self):
        assert boundary_dist((0.0, 0.3), BoxRegion.unit_cube(2)) == 0.0

    def test_brute_force_over_faces(self):
        # oracle: distance to each of the 6 faces of the cube
        x = np.array([0.2, 0.9, 0.4])
        box = BoxRegion.unit_cube(3)
        faces = [x[i] - 0.0 for i in range(3)] + [1.0 - x[i] for i in range(3)]
        assert boundary_dist(x, box) == pytest.approx(min(faces), abs=0)
        assert boundary_dist(x, box) == pytest.approx(0.1)

    def test_outside_raises(self):
        with pytest.raises(ValueError):
            boundary_dist((1.5, 0.5), BoxRegion.unit_cube(2))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=2))
    def test_at_most_half_diameter(self, coords):
        box = BoxRegion.unit_cube(2)
        assert boundary_dist(coords, box) <= diameter(box) / 2 + 1e-12


class TestDiameter:
    def test_unit_cube(self):
        for d in (1, 2, 3, 4):
            assert diameter(BoxRegion.unit_cube(d)) == pytest.approx(math.sqrt(d), abs=0)

    def test_single_point(self):
        assert diameter(PointCloud([[0.3, 0.4]])) == 0.0

    def test_exhaustive_pair_scan(self):
        rng = np.random.default_rng(1)
        pts = rng.random((10, 3))
        cloud = PointCloud(pts)
        best = max(math.dist(pts[i], pts[j]) for i in range(10) for j in range(i + 1, 10))
        assert diameter(cloud) == pytest.approx(best, rel=1e-12)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            diameter(PointCloud.empty(2))


class TestDyadicPartition:
    def test_level_zero(self):
        part = dyadic_partition(BoxRegion.unit_cube(2), 0)
        assert part.num_cells == 1
        cell = part.cell_box(0)
        assert np.all(cell.lo == 0.0) and np.all(cell.hi == 1.0)

    def test_level_one_unit_square(self):
        part = dyadic_partition(BoxRegion.unit_cube(2), 1)
        assert part.num_cells == 4
        assert all(np.allclose(c.side, 0.5) for c in part.cells)

    def test_volume_sum(self):
        root = BoxRegion(np.zeros(3), np.full(3, 2.0))
        part = dyadic_partition(root, 2)
        assert part.num_cells == 64
        assert all(np.allclose(c.side, 0.5) for c in part.cells)
        assert sum(c.volume for c in part.cells) == pytest.approx(8.0, rel=1e-12)

    def test_interior_membership_unique(self):
        part = dyadic_partition(BoxRegion.unit_cube(2), 2)
        rng = np.random.default_rng(2)
        for x in rng.random((100, 2)):
            flat = part.cell_of(x)
            # exactly one cell claims the point under the half-open rule
            claims = [c for c in range(part.num_cells)
                      if np.all(x >= part.cell_box(c).lo) and np.all(x < part.cell_box(c).hi)]
            assert claims == [flat]

    def test_top_face_clamped(self):
        part = dyadic_partition(BoxRegion.unit_cube(2), 1)
        assert part.cell_of((1.0, 1.0)) == part.num_cells - 1

    def test_split_covers_cloud(self):
        part = dyadic_partition(BoxRegion.unit_cube(3), 1)
        rng = np.random.default_rng(3)
        cloud = PointCloud(rng.random((40, 3)))
        pieces = part.split(cloud)
        assert sum(len(ix) for ix in pieces) == len(cloud)

    def test_underflow_guard(self):
        tiny = BoxRegion(np.zeros(1), np.full(1, 1e-300))
        with pytest.raises(ValueError):
            dyadic_partition(tiny, 100)

    def test_negative_level(self):
        with pytest.raises(ValueError):
            dyadic_partition(BoxRegion.unit_cube(2), -1)


class TestPointCloud:
    def test_multiset_union(self):
        a = PointCloud([[0.0, 0.0]])
        b = PointCloud([[0.0, 0.0], [1.0, 1.0]])
        u = a.union(b)
        assert len(u) == 3

    def test_dimension_validation(self):
        with pytest.raises(ValueError):
            PointCloud([[0.0, 0.0]], dim=3)
        with pytest.raises(ValueError):
            PointCloud([[np.inf, 0.0]])

    def test_empty_needs_dim(self):
        with pytest.raises(ValueError):
            PointCloud([])
        assert PointCloud.empty(3).dim == 3

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        cloud = PointCloud(rng.random((7, 3)))
        path = tmp_path / "cloud.csv"
        cloud.to_csv(path)
        assert path.read_text().splitlines()[0] == "x0,x1,x2"
        back = PointCloud.from_csv(path)
        assert back == cloud

    def test_csv_empty_round_trip(self, tmp_path):
        path = tmp_path / "empty.csv"
        PointCloud.empty(2).to_csv(path)
        back = PointCloud.from_csv(path)
        assert len(back) == 0 and back.dim == 2

    def test_immutable(self):
        cloud = PointCloud([[0.0, 1.0]])
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 5.0


class TestBoxRegion:
    def test_requires_lo_below_hi(self):
        with pytest.raises(ValueError):
            BoxRegion(np.array([0.0, 0.0]), np.array([1.0, 0.0]))

    def test_contains_closed(self):
        box = BoxRegion.unit_cube(2)
        assert box.contains((0.0, 1.0))
        assert not box.contains((0.0, 1.1))
