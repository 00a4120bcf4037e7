import math

import numpy as np
import pytest

from piqa.metrics import (
    DegenerateInputError,
    EvalReport,
    average_ranks,
    center_mass_share,
    evaluate,
    plcc,
    rmse,
    srcc,
)

from helpers import pearson_scalar, ranks_scalar, rmse_scalar, spearman_scalar


class TestPlcc:
    def test_affine_invariance(self):
        gt = np.array([1.0, 2.0, 4.0, 4.5, 3.0])
        assert plcc(2.0 * gt + 1.0, gt) == pytest.approx(1.0, abs=1e-12)

    def test_anticorrelation(self):
        gt = np.array([1.0, 2.0, 3.0, 5.0])
        assert plcc(-gt, gt) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_covariance_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            x = rng.normal(size=50)
            y = rng.normal(size=50)
            assert abs(plcc(x, y) - pearson_scalar(x.tolist(), y.tolist())) < 1e-9

    def test_constant_vector_raises(self):
        with pytest.raises(DegenerateInputError):
            plcc([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            plcc([1.0, 2.0], [1.0, 2.0, 3.0])


class TestSrcc:
    def test_monotone_transform_gives_one(self):
        gt = np.array([0.3, 1.4, 2.0, 2.7, 5.0])
        assert srcc(np.exp(gt), gt) == pytest.approx(1.0, abs=1e-12)
        assert srcc(gt ** 3 + 2.0, gt) == pytest.approx(1.0, abs=1e-12)

    def test_reversed_order(self):
        gt = np.array([1.0, 2.0, 3.0, 4.0])
        assert srcc(gt[::-1], gt) == pytest.approx(-1.0, abs=1e-12)

    def test_tied_example_matches_rank_oracle(self):
        pred = [1.0, 2.0, 2.0, 3.0]
        gt = [1.0, 2.0, 3.0, 4.0]
        expected = pearson_scalar(ranks_scalar(pred), ranks_scalar(gt))
        assert srcc(pred, gt) == pytest.approx(expected, abs=1e-12)

    def test_average_ranks_with_ties(self):
        np.testing.assert_allclose(average_ranks([1.0, 2.0, 2.0, 3.0]), [1.0, 2.5, 2.5, 4.0])
        np.testing.assert_allclose(average_ranks([5.0, 5.0, 5.0]), [2.0, 2.0, 2.0])

    def test_monotone_invariance_property(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rng.normal(size=30)
            y = rng.normal(size=30)
            base = srcc(x, y)
            assert srcc(np.exp(x), y) == pytest.approx(base, abs=1e-12)
            assert srcc(x, 3.0 * y + 1.0) == pytest.approx(base, abs=1e-12)


class TestRmse:
    def test_zero_on_equal(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_direct_evaluation(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=20), rng.normal(size=20)
        assert rmse(a, b) == rmse(b, a)


class TestOracleEquivalence:
    def test_thousand_random_instances(self):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            n = int(rng.integers(3, 40))
            x = rng.normal(scale=rng.uniform(0.5, 3.0), size=n)
            y = rng.normal(scale=rng.uniform(0.5, 3.0), size=n)
            if rng.random() < 0.3:  # inject ties
                x = np.round(x, 1)
            assert abs(plcc(x, y) - pearson_scalar(x.tolist(), y.tolist())) < 1e-9
            assert abs(srcc(x, y) - spearman_scalar(x.tolist(), y.tolist())) < 1e-9
            assert abs(rmse(x, y) - rmse_scalar(x.tolist(), y.tolist())) < 1e-9


class TestBounds:
    def test_random_inputs_stay_bounded(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(2, 25))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                continue
            assert -1.0 <= plcc(x, y) <= 1.0
            assert -1.0 <= srcc(x, y) <= 1.0
            assert rmse(x, y) >= 0.0


class TestEvaluate:
    def test_report_fields(self):
        gt = np.array([1.0, 2.0, 3.0, 4.0])
        report = evaluate(gt, gt, mos_scale="koniq[1,5]")
        assert report.plcc == pytest.approx(1.0)
        assert report.srcc == pytest.approx(1.0)
        assert report.rmse == 0.0
        assert report.n == 4
        assert report.mos_scale == "koniq[1,5]"
        assert not report.degenerate

    def test_degenerate_flagged_not_raised(self):
        report = evaluate([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
        assert report.degenerate
        assert math.isnan(report.plcc)
        assert report.rmse > 0

    def test_json_and_table_render(self):
        report = EvalReport(plcc=0.5, srcc=0.25, rmse=1.0, n=10)
        assert "plcc" in report.as_json()
        assert "srcc" in report.as_table()


class TestCenterMassShare:
    def test_uniform_map_share_equals_fraction(self):
        uniform = np.full((40, 40), 1.0 / 1600)
        assert center_mass_share(uniform, 0.25) == pytest.approx(0.25, abs=0.01)

    def test_centered_peak_dominates(self):
        w = np.zeros((32, 32))
        w[14:18, 14:18] = 1.0
        assert center_mass_share(w / w.sum(), 0.25) == pytest.approx(1.0)

    def test_rejects_empty_map(self):
        with pytest.raises(DegenerateInputError):
            center_mass_share(np.zeros((8, 8)))
