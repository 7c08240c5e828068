import json
import math

import numpy as np
import pytest

from nsp.harness import (ExperimentSpec, NoiseSpec, PiecewiseSignal,
                         ar1_stationary_sd, experiment_from_dict, gen_noise,
                         gen_series, gen_signal, run_coverage, score_coverage,
                         squarewave, write_replicates_csv, write_summary_json)
from nsp.scenarios import ScenarioSpec, build_design


class TestSignals:
    def test_squarewave_preset(self):
        sig = squarewave()
        f = gen_signal(sig, np.ones((800, 1)))
        assert f.size == 800
        assert sig.change_points == (200, 400, 600)
        assert np.array_equal(np.unique(f), [0.0, 10.0])
        # jumps exactly where declared (last index of each segment)
        jumps = np.flatnonzero(np.diff(f)) + 1
        assert np.array_equal(jumps, [200, 400, 600])

    def test_single_segment_constant(self):
        sig = PiecewiseSignal(T=50, change_points=(), betas=((3.0,),))
        assert np.array_equal(gen_signal(sig, np.ones((50, 1))), np.full(50, 3.0))

    def test_concatenation_property(self):
        x = build_design(ScenarioSpec("piecewise_polynomial", degree=1), 60)
        sig = PiecewiseSignal(T=60, change_points=(25,),
                              betas=((1.0, 0.5), (-2.0, 3.0)))
        f = gen_signal(sig, x)
        left = x[:25] @ np.array([1.0, 0.5])
        right = x[25:] @ np.array([-2.0, 3.0])
        assert np.array_equal(f, np.concatenate([left, right]))

    def test_invalid_segmentations(self):
        with pytest.raises(ValueError):
            PiecewiseSignal(T=10, change_points=(5, 5), betas=((0.,), (1.,), (2.,)))
        with pytest.raises(ValueError):
            PiecewiseSignal(T=10, change_points=(12,), betas=((0.,), (1.,)))
        with pytest.raises(ValueError):
            PiecewiseSignal(T=10, change_points=(4,), betas=((0.,),))

    def test_segmentwise_lag_recursion(self):
        sig = PiecewiseSignal(T=6, change_points=(3,), betas=((1.0,), (0.0,)),
                              ar_coefs=((0.5,), (0.0,)))
        x = np.ones((6, 1))
        y = gen_series(sig, x, NoiseSpec(kind="gaussian_iid", sigma=0.0),
                       np.random.default_rng(0))
        # segment one: y_t = 1 + 0.5 y_{t-1}; segment two: y_t = 0
        assert y[0] == 1.0 and y[1] == 1.5 and y[2] == 1.75
        assert np.array_equal(y[3:], np.zeros(3))


class TestNoise:
    def test_zero_sigma(self):
        z = gen_noise(NoiseSpec(kind="gaussian_iid", sigma=0.0), 100,
                      np.random.default_rng(0))
        assert np.array_equal(z, np.zeros(100))

    def test_ar1_stationary_scale(self):
        spec = NoiseSpec(kind="ar1_gaussian", coef=0.9, sigma=1.0)
        z = gen_noise(spec, 100_000, np.random.default_rng(1))
        target = ar1_stationary_sd(0.9, 1.0)
        assert z.std() == pytest.approx(target, rel=0.10)

    def test_t_profile_endpoints(self):
        lo, hi = 2 * math.sqrt(2), 8 * math.sqrt(2)
        spec = NoiseSpec(kind="student_t", df=4, sd_start=lo, sd_end=hi)
        first, last = [], []
        for i in range(4000):
            z = gen_noise(spec, 2, np.random.default_rng(i))
            first.append(z[0])
            last.append(z[1])
        assert np.std(first) == pytest.approx(lo, rel=0.10)
        assert np.std(last) == pytest.approx(hi, rel=0.10)

    def test_heavy_tail_df_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(kind="student_t", df=2.0)

    def test_reproducible(self):
        spec = NoiseSpec(kind="ar1_gaussian", coef=0.5, sigma=2.0)
        a = gen_noise(spec, 64, np.random.default_rng(9))
        b = gen_noise(spec, 64, np.random.default_rng(9))
        assert np.array_equal(a, b)


class TestScoring:
    def test_every_interval_needs_a_change(self):
        assert score_coverage([(5, 12), (40, 44)], (10, 42))
        assert not score_coverage([(5, 12), (40, 44)], (10, 60))

    def test_end_point_excluded(self):
        # a change sitting exactly at the interval end does not count
        assert not score_coverage([(5, 10)], (10,))
        assert score_coverage([(5, 11)], (10,))

    def test_empty_set_covers(self):
        assert score_coverage([], (10,))


class TestRunCoverage:
    def _small_spec(self, **kw):
        sig = PiecewiseSignal(T=120, change_points=(60,),
                              betas=((0.0,), (8.0,)))
        base = dict(signal=sig,
                    noise=NoiseSpec(kind="gaussian_iid", sigma=1.0),
                    scenario=ScenarioSpec("piecewise_constant"),
                    n_rep=8, seed=5, M=100)
        base.update(kw)
        return ExperimentSpec(**base)

    def test_high_snr_coverage_and_records(self):
        res = run_coverage(self._small_spec())
        assert res.coverage == 1.0
        assert sum(res.count_distribution.values()) == 8
        assert len(res.records) == 8
        assert all(rec["n_intervals"] >= 1 for rec in res.records)

    def test_noiseless_is_clean(self):
        res = run_coverage(self._small_spec(
            noise=NoiseSpec(kind="gaussian_iid", sigma=0.0),
            sigma_method="1.0", n_rep=4))
        assert res.coverage == 1.0

    def test_thread_count_does_not_change_results(self, tmp_path):
        spec = self._small_spec(n_rep=6)
        seq = run_coverage(self._small_spec(n_rep=6), threads=1)
        par = run_coverage(spec, threads=2)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_summary_json(seq, p1)
        write_summary_json(par, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_replicates_csv_round_figures(self, tmp_path):
        res = run_coverage(self._small_spec(n_rep=3))
        path = tmp_path / "reps.csv"
        write_replicates_csv(res, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("replicate,")
        assert len(lines) == 4

    def test_ar_mode_reports_original_coordinates(self):
        sig = PiecewiseSignal(T=300, change_points=(150,),
                              betas=((0.0,), (5.0,)))
        spec = ExperimentSpec(
            signal=sig, noise=NoiseSpec(kind="ar1_gaussian", coef=0.6, sigma=0.5),
            scenario=ScenarioSpec("piecewise_constant", ar_order=1),
            n_rep=4, seed=2, M=100, sigma_method="mols")
        res = run_coverage(spec)
        assert res.coverage == 1.0
        for rec in res.records:
            for s, e in rec["intervals"]:
                assert s <= 150 <= e - 1


class TestExperimentFromDict:
    def test_round_trip(self):
        d = {
            "signal": {"T": 100, "change_points": [40],
                       "betas": [[0.0], [2.0]]},
            "noise": {"kind": "gaussian_iid", "sigma": 1.5},
            "scenario": {"kind": "piecewise_constant"},
            "n_rep": 3, "seed": 7, "M": 50, "alpha": 0.05,
        }
        spec = experiment_from_dict(d)
        assert spec.signal.change_points == (40,)
        assert spec.noise.sigma == 1.5
        assert spec.alpha == 0.05
        run_coverage(spec)  # executable end to end

    def test_missing_key(self):
        with pytest.raises(ValueError, match="signal"):
            experiment_from_dict({"noise": {"kind": "gaussian_iid"}})
