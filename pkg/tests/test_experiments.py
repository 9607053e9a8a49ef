import warnings
from dataclasses import replace

import numpy as np
import pytest

from bimatch.experiments import (
    EstimateRecord,
    ExperimentConfig,
    density_functional,
    estimate_beta,
    run_average_monotonicity,
    run_concentration,
    run_convergence,
    run_density_limit,
    run_poissonization_gap,
    run_singular_decay,
    run_tail_max,
    write_records_csv,
)
from bimatch.geometry import BoxRegion, PointCloud, dyadic_partition
from bimatch.matching import CostParams
from bimatch.sampling import (
    BlockDensity,
    CantorMeasure,
    HeavyTailRadial,
    MeasureSpec,
    Mixture,
    SingularSegment,
    UniformBox,
)

UNIT3 = UniformBox(BoxRegion.unit_cube(3))


def small_cfg(**kwargs):
    defaults = dict(measure=UNIT3, n_schedule=(8, 16, 32), trials=(12,),
                    params=CostParams(1.0), seed=5)
    defaults.update(kwargs)
    return ExperimentConfig(**defaults)


class TestConfig:
    def test_schedule_must_increase(self):
        with pytest.raises(ValueError):
            small_cfg(n_schedule=(16, 8))

    def test_trials_broadcast(self):
        cfg = small_cfg(trials=(7,))
        assert cfg.trials == (7, 7, 7)

    def test_out_of_theory_warns(self):
        with pytest.warns(UserWarning):
            ExperimentConfig(measure=UniformBox(BoxRegion.unit_cube(1)),
                             n_schedule=(4, 8), trials=(3,),
                             params=CostParams(1.0))

    def test_tour_restrictions(self):
        with pytest.raises(ValueError):
            small_cfg(functional="tsp-heuristic", poissonized=True)
        with pytest.raises(ValueError):
            small_cfg(functional="tsp-heuristic", poissonized=False, boundary=True)

    def test_boundary_needs_box_measure(self):
        seg = SingularSegment(np.zeros(3), np.ones(3))
        with pytest.raises(ValueError):
            small_cfg(measure=seg, boundary=True)


class TestConvergence:
    def test_single_point_reproducible(self):
        cfg = small_cfg(n_schedule=(1,), trials=(1,))
        a = run_convergence(cfg)
        b = run_convergence(cfg)
        assert a == b and len(a) == 1

    def test_thread_count_invariance(self):
        cfg = small_cfg()
        assert run_convergence(cfg) == run_convergence(replace(cfg, threads=3))

    def test_ratios_positive(self):
        records = run_convergence(small_cfg())
        assert all(r.ratio > 0 for r in records)

    def test_boundary_paired_not_above_plain(self):
        plain = run_convergence(small_cfg(n_schedule=(32, 64), trials=(20,)))
        bdy = run_convergence(small_cfg(n_schedule=(32, 64), trials=(20,),
                                        boundary=True))
        for rp, rb in zip(plain, bdy):
            pooled = np.hypot(rp.stderr, rb.stderr) / rp.n ** (2 / 3)
            assert rb.ratio <= rp.ratio + 2 * pooled

    def test_tsp_heuristic_runs(self):
        cfg = small_cfg(functional="tsp-heuristic", poissonized=False,
                        n_schedule=(8, 16), trials=(4,))
        records = run_convergence(cfg)
        assert all(r.mean > 0 for r in records)

    def test_csv_round_trip_bytes(self, tmp_path):
        cfg = small_cfg()
        records = run_convergence(cfg)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_records_csv(records, cfg, p1)
        write_records_csv(records, cfg, p2)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == "n,trials,mean,stderr,ratio,functional,p,d,seed,schema_version"


class TestEstimateBeta:
    def _records(self, ratios, ns=None, stderr=0.01):
        ns = ns or [100 * 2 ** i for i in range(len(ratios))]
        return [EstimateRecord(n=n, trials=50, mean=r * n ** (2 / 3),
                               stderr=stderr, ratio=r)
                for n, r in zip(ns, ratios)]

    def test_constant_ratios(self):
        records = self._records([0.7, 0.7, 0.7])
        est = estimate_beta(records)
        assert est.beta_hat == pytest.approx(0.7)
        ratio_se = records[-1].stderr * records[-1].ratio / records[-1].mean
        assert est.uncertainty == pytest.approx(1.96 * ratio_se)

    def test_power_law_injection(self):
        beta, c = 0.6, 0.8
        ns = [125, 250, 500, 1000, 2000]
        ratios = [beta + c * n ** (-1 / 3) for n in ns]
        records = self._records(ratios, ns=ns, stderr=0.0)
        est = estimate_beta(records)
        assert abs(est.beta_hat - beta) <= c * 2000 ** (-1 / 3) + 1e-12
        assert est.beta_fit == pytest.approx(beta, abs=1e-9)

    def test_needs_three(self):
        with pytest.raises(ValueError):
            estimate_beta(self._records([0.5, 0.6]))


class TestDensityFunctional:
    def test_unit_cube(self):
        assert density_functional(UNIT3, 1.0, 3) == 1.0

    def test_volume_power(self):
        measure = UniformBox(BoxRegion.cube(3, 0.5))
        assert density_functional(measure, 1.0, 3) == pytest.approx(0.5, rel=1e-12)

    def test_two_cell_block(self):
        part = dyadic_partition(BoxRegion.unit_cube(3), 1)
        w = np.zeros(8)
        w[0], w[1] = 0.75, 0.25
        got = density_functional(BlockDensity(part, w), 1.0, 3)
        want = (1 / 8) * (6.0) ** (2 / 3) + (1 / 8) * (2.0) ** (2 / 3)
        assert got == pytest.approx(want, rel=1e-12)

    def test_singular_zero(self):
        seg = SingularSegment(np.zeros(3), np.ones(3))
        assert density_functional(seg, 1.0, 3) == 0.0
        assert density_functional(CantorMeasure(), 0.4, 1) == 0.0

    def test_mixture_with_singular_part(self):
        seg = SingularSegment(np.zeros(3), np.ones(3))
        mix = Mixture(((0.5, UNIT3), (0.5, seg)))
        assert density_functional(mix, 1.0, 3) == pytest.approx(0.5 ** (2 / 3))

    def test_overlapping_mixture_rejected(self):
        mix = Mixture(((0.5, UNIT3), (0.5, UniformBox(BoxRegion.cube(3, 0.5)))))
        with pytest.raises(ValueError):
            density_functional(mix, 1.0, 3)

    def test_unsupported_kind(self):
        with pytest.raises(ValueError):
            density_functional(HeavyTailRadial(8.0, 3), 1.0, 3)


class TestSingularDecay:
    def test_segment_wide_schedule_halves(self):
        seg = SingularSegment(np.array([0.1, 0.1, 0.1]), np.array([0.9, 0.9, 0.9]))
        cfg = ExperimentConfig(measure=seg, n_schedule=(4, 16, 64, 256, 1024),
                               trials=(40, 30, 24, 16, 12), params=CostParams(1.0),
                               seed=11)
        report = run_singular_decay(cfg)
        ratios = [r.ratio for r in report.records]
        assert report.halved, ratios
        assert ratios[-1] < ratios[0]
        assert report.ac_integral == 0.0

    def test_regime_guard(self):
        with pytest.warns(UserWarning):
            cfg = ExperimentConfig(measure=UniformBox(BoxRegion.unit_cube(2)),
                                   n_schedule=(8, 16, 32), trials=(4,),
                                   params=CostParams(1.0), seed=5)
        with pytest.raises(ValueError):
            run_singular_decay(cfg)

    def test_cantor_d1_needs_small_p(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg = ExperimentConfig(measure=CantorMeasure(), n_schedule=(8, 32),
                                   trials=(6,), params=CostParams(0.8))
        with pytest.raises(ValueError):
            run_singular_decay(cfg)


class TestPoissonGap:
    def test_runs_and_reports(self):
        cfg = small_cfg(n_schedule=(8, 32, 128), trials=(30, 24, 18))
        report = run_poissonization_gap(cfg)
        assert len(report.rows) == 3
        assert all(np.isfinite(r["normalized_gap"]) for r in report.rows)

    def test_point_mass_gap_zero(self):
        class PointMass(MeasureSpec):
            dim = 2

            def sample(self, rng, count):
                rng.random(count)  # consume the stream like a real sampler
                return np.tile(np.array([0.25, 0.75]), (count, 1))

            def support_diameter(self):
                return 0.0

        cfg = ExperimentConfig(measure=PointMass(), n_schedule=(4, 8), trials=(5,),
                               params=CostParams(0.5), seed=2)
        report = run_poissonization_gap(cfg)
        assert all(r["normalized_gap"] == 0.0 for r in report.rows)

    def test_integer_n_required(self):
        cfg = small_cfg(n_schedule=(4.5, 8.0), trials=(3,))
        with pytest.raises(ValueError):
            run_poissonization_gap(cfg)


class TestTailMax:
    def test_heavy_tail_slope_near_inverse_alpha(self):
        report = run_tail_max(alpha=8.0, gamma=2.0, n_schedule=(100, 1000, 10000),
                              trials=120, seed=3)
        assert abs(report.slope - 1 / 8) < 0.05
        assert abs(report.ratio_slope) < 0.05

    def test_bounded_support_ratio_decays(self):
        report = run_tail_max(alpha=8.0, gamma=2.0, n_schedule=(100, 1000, 10000),
                              trials=60, seed=4, measure=UNIT3)
        ratios = [r["ratio"] for r in report.rows]
        assert ratios[-1] < ratios[0]

    def test_gamma_below_alpha_required(self):
        with pytest.raises(ValueError):
            run_tail_max(alpha=2.0, gamma=2.0, n_schedule=(10, 100), trials=10)


class TestConcentration:
    def test_envelope_holds(self):
        cfg = small_cfg(n_schedule=(8, 32), trials=(40,))
        report = run_concentration(cfg)
        assert report.holds
        assert all(r["std"] <= r["envelope"] for r in report.rows)

    def test_needs_thirty_trials(self):
        with pytest.raises(ValueError):
            run_concentration(small_cfg(trials=(1,)))

    def test_needs_bounded_support(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg = ExperimentConfig(measure=HeavyTailRadial(9.0, 3),
                                   n_schedule=(8,), trials=(40,),
                                   params=CostParams(1.0))
        with pytest.raises(ValueError):
            run_concentration(cfg)


class TestDensityLimit:
    def test_uniform_block_consistent(self):
        part = dyadic_partition(BoxRegion.unit_cube(3), 1)
        uniform_block = BlockDensity(part, np.full(8, 1 / 8))
        cfg = ExperimentConfig(measure=uniform_block, n_schedule=(16, 32, 64),
                               trials=(24, 20, 16), params=CostParams(1.0), seed=6)
        report = run_density_limit(cfg)
        assert report.integral == pytest.approx(1.0)
        assert report.within, report.to_dict()

    def test_skewed_block_sandwich(self):
        part = dyadic_partition(BoxRegion.unit_cube(3), 1)
        w = np.array([0.4, 0.2, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05])
        cfg = ExperimentConfig(measure=BlockDensity(part, w),
                               n_schedule=(16, 32, 64), trials=(24, 20, 16),
                               params=CostParams(1.0), seed=7)
        report = run_density_limit(cfg)
        assert report.integral < 1.0
        assert report.within, report.to_dict()


class TestAverageMonotonicity:
    def test_soft_check_ok(self):
        report = run_average_monotonicity(BoxRegion.unit_cube(3), CostParams(1.0),
                                          n1=20, n2=10, trials=60, seed=8)
        assert report.ok
