import itertools
import math

import numpy as np
import pytest

from bimatch.geometry import PointCloud
from bimatch.graphs import (
    BipartiteGraph,
    GraphFamily,
    SizeLimitError,
    check_axioms,
    enumerate_family,
    generic_cost,
    is_member,
    tsp_exact,
    tsp_heuristic,
)
from bimatch.matching import CostParams, cost_matrix, matching_cost

P1 = CostParams(1.0)
TSP = GraphFamily.tsp_tour()


def random_cloud(rng, n, d=2):
    return PointCloud(rng.random((n, d)), dim=d)


class TestFamilies:
    def test_constants(self):
        assert GraphFamily.matching().kappa0 == 1
        assert GraphFamily.matching().merge_kappa == 0
        assert TSP.kappa0 == 2 and TSP.kappa == 4
        assert GraphFamily.r_regular(3).kappa0 == 3
        assert TSP.subadd_constant == (3 + 2) * 4 / 2
        assert GraphFamily.matching().subadd_constant == 0.5

    def test_validation(self):
        with pytest.raises(ValueError):
            GraphFamily("nonsense")
        with pytest.raises(ValueError):
            GraphFamily.r_regular(1)
        with pytest.raises(ValueError):
            GraphFamily("matching", 2)


class TestEnumeration:
    def test_matching_two(self):
        graphs = enumerate_family(2, GraphFamily.matching())
        assert len(graphs) == 2

    def test_tsp_below_threshold(self):
        assert enumerate_family(1, TSP) == []
        assert enumerate_family(0, TSP) == []

    def test_tsp_counts(self):
        # distinct alternating Hamilton cycles as edge sets: n! (n-1)! / 2
        assert len(enumerate_family(2, TSP)) == 1
        assert len(enumerate_family(3, TSP)) == 6
        assert len(enumerate_family(4, TSP)) == 72

    def test_tsp_three_vs_subset_filter(self):
        # oracle: filter all 2^9 edge subsets of the 3x3 bipartite grid for
        # connected graphs where every vertex has degree 2
        all_edges = [(i, j) for i in range(3) for j in range(3)]
        members = set()
        for bits in range(2 ** 9):
            edges = frozenset(e for k, e in enumerate(all_edges) if bits >> k & 1)
            g = BipartiteGraph(3, edges)
            if is_member(g, TSP):
                members.add(edges)
        got = {g.edges for g in enumerate_family(3, TSP)}
        assert got == members

    def test_rreg_equals_tsp_at_r2(self):
        got = {g.edges for g in enumerate_family(4, GraphFamily.r_regular(2))}
        want = {g.edges for g in enumerate_family(4, TSP)}
        assert got == want

    def test_rreg_three(self):
        graphs = enumerate_family(3, GraphFamily.r_regular(3))
        assert len(graphs) == 1  # only the full 3x3 biclique
        assert enumerate_family(2, GraphFamily.r_regular(3)) == []

    def test_tree_single_pair(self):
        graphs = enumerate_family(1, GraphFamily.spanning_tree(2))
        assert len(graphs) == 1 and graphs[0].edges == frozenset({(0, 0)})

    def test_tree_formula(self):
        # spanning trees of K_{2,2}: m^(n-1) n^(m-1) = 4, all within degree 2
        assert len(enumerate_family(2, GraphFamily.spanning_tree(2))) == 4

    def test_guard(self):
        with pytest.raises(SizeLimitError):
            enumerate_family(6, TSP)

    def test_membership_validates(self):
        for fam in (GraphFamily.matching(), TSP, GraphFamily.spanning_tree(3),
                    GraphFamily.r_regular(2)):
            for g in enumerate_family(3, fam):
                assert is_member(g, fam)


class TestGenericCost:
    def test_matching_equals_solver(self):
        rng = np.random.default_rng(30)
        fam = GraphFamily.matching()
        for _ in range(25):
            x = random_cloud(rng, int(rng.integers(0, 7)))
            y = random_cloud(rng, int(rng.integers(0, 7)))
            assert generic_cost(x, y, fam, P1).cost == matching_cost(x, y, P1).cost

    def test_tsp_below_threshold_zero(self):
        res = generic_cost(PointCloud([[0.0, 0.0]]), PointCloud([[1.0, 1.0]]), TSP, P1)
        assert res.cost == 0.0 and res.matched == []

    def test_tsp_two_pair_cycle(self):
        a, b = np.array([0.0, 0.0]), np.array([1.0, 0.0])
        c, d = np.array([0.3, 0.6]), np.array([0.8, 0.9])
        x = PointCloud([a, b])
        y = PointCloud([c, d])
        want = (np.linalg.norm(a - c) + np.linalg.norm(c - b)
                + np.linalg.norm(b - d) + np.linalg.norm(d - a))
        assert generic_cost(x, y, TSP, P1).cost == pytest.approx(float(want), rel=1e-12)

    def test_rectangular_tsp_vs_enumeration(self):
        rng = np.random.default_rng(31)
        for _ in range(8):
            x = random_cloud(rng, 3)
            y = random_cloud(rng, 5)
            costs = cost_matrix(x, y, P1)
            best = min(sum(costs[i, cols[j]] for i, j in g.edges)
                       for cols in itertools.combinations(range(5), 3)
                       for g in enumerate_family(3, TSP))
            assert generic_cost(x, y, TSP, P1).cost == pytest.approx(best, rel=1e-9)
            assert generic_cost(y, x, TSP, P1).cost == generic_cost(x, y, TSP, P1).cost

    def test_size_guards(self):
        rng = np.random.default_rng(32)
        with pytest.raises(SizeLimitError):
            generic_cost(random_cloud(rng, 13), random_cloud(rng, 13), TSP, P1)
        with pytest.raises(SizeLimitError):
            generic_cost(random_cloud(rng, 6), random_cloud(rng, 6),
                         GraphFamily.spanning_tree(3), P1)

    def test_homogeneity_tsp(self):
        rng = np.random.default_rng(33)
        for lam in (0.5, 2.0):
            for p in (0.7, 1.0, 2.0):
                params = CostParams(p)
                x = random_cloud(rng, 4)
                y = random_cloud(rng, 4)
                a = rng.uniform(-1, 1, size=2)
                base = generic_cost(x, y, TSP, params).cost
                moved = generic_cost(x.affine(a, lam), y.affine(a, lam), TSP, params).cost
                assert moved == pytest.approx(lam ** p * base, rel=1e-9)

    def test_tour_dominates_matching(self):
        rng = np.random.default_rng(34)
        for _ in range(25):
            n = int(rng.integers(2, 7))
            x = random_cloud(rng, n)
            y = random_cloud(rng, n)
            assert (generic_cost(x, y, TSP, P1).cost
                    >= matching_cost(x, y, P1).cost - 1e-12)


class TestTspExact:
    def test_small_sizes_zero(self):
        assert tsp_exact(PointCloud.empty(2), PointCloud.empty(2), P1).cost == 0.0
        res = tsp_exact(PointCloud([[0.0, 0.0]]), PointCloud([[1.0, 1.0]]), P1)
        assert res.cost == 0.0

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_vs_enumeration(self, n):
        rng = np.random.default_rng(40 + n)
        for _ in range(6):
            x = random_cloud(rng, n)
            y = random_cloud(rng, n)
            costs = cost_matrix(x, y, P1)
            best = min(sum(costs[i, j] for i, j in g.edges)
                       for g in enumerate_family(n, TSP))
            res = tsp_exact(x, y, P1)
            assert res.cost == pytest.approx(best, rel=1e-9)
            assert is_member(BipartiteGraph(n, frozenset(res.matched)), TSP)

    def test_collinear_sweep(self):
        # X at even, Y at odd integer positions on a line embedded in 2-d
        x = PointCloud([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
        y = PointCloud([[1.0, 0.0], [3.0, 0.0], [5.0, 0.0]])
        costs = cost_matrix(x, y, P1)
        best = min(sum(costs[i, j] for i, j in g.edges)
                   for g in enumerate_family(3, TSP))
        assert tsp_exact(x, y, P1).cost == pytest.approx(best, rel=1e-12)

    def test_guard_and_preconditions(self):
        rng = np.random.default_rng(50)
        with pytest.raises(SizeLimitError):
            tsp_exact(random_cloud(rng, 13), random_cloud(rng, 13), P1)
        with pytest.raises(ValueError):
            tsp_exact(random_cloud(rng, 3), random_cloud(rng, 4), P1)


class TestTspHeuristic:
    def test_two_pairs_exact(self):
        rng = np.random.default_rng(60)
        for _ in range(10):
            x = random_cloud(rng, 2)
            y = random_cloud(rng, 2)
            assert (tsp_heuristic(x, y, P1).cost
                    == pytest.approx(tsp_exact(x, y, P1).cost, rel=1e-12))

    def test_never_below_exact(self):
        rng = np.random.default_rng(61)
        for _ in range(40):
            n = int(rng.integers(2, 9))
            x = random_cloud(rng, n)
            y = random_cloud(rng, n)
            assert tsp_heuristic(x, y, P1).cost >= tsp_exact(x, y, P1).cost - 1e-9

    def test_large_instance_feasible(self):
        rng = np.random.default_rng(62)
        x = random_cloud(rng, 500, 3)
        y = random_cloud(rng, 500, 3)
        res = tsp_heuristic(x, y, P1)
        graph = BipartiteGraph(500, frozenset(res.matched))
        assert is_member(graph, TSP)
        costs_ok = sum(np.linalg.norm(x.points[i] - y.points[j])
                       for i, j in res.matched)
        assert res.cost == pytest.approx(float(costs_ok), rel=1e-9)
        assert not res.exact

    def test_requires_equal_sides(self):
        rng = np.random.default_rng(63)
        with pytest.raises(ValueError):
            tsp_heuristic(random_cloud(rng, 2), random_cloud(rng, 3), P1)


class TestAxioms:
    def test_matching_merge_free(self):
        report = check_axioms(GraphFamily.matching(), 3)
        assert report.passed
        assert report.a4_observed == 0
        assert report.a3_observed_degree == 1

    def test_tsp_merge_within_four(self):
        report = check_axioms(TSP, 3)
        assert report.passed
        assert report.a4_observed <= 4
        assert report.a3_observed_degree == 2

    def test_rreg2_constants(self):
        report = check_axioms(GraphFamily.r_regular(2), 3)
        assert report.passed
        assert report.a4_observed <= 8

    def test_rreg3_reports_loose(self):
        report = check_axioms(GraphFamily.r_regular(3), 3)
        assert report.passed
        assert report.notes
        assert report.a4_observed > 0

    def test_guard(self):
        with pytest.raises(SizeLimitError):
            check_axioms(TSP, 6)
