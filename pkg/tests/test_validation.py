import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rising_exact_config
from tcoquant import cycle_features as cf
from tcoquant import synth
from tcoquant.lw_plsr import LwConfig
from tcoquant.pipeline import ModelSpec, fit_model, predict_model
from tcoquant.validation import (FoldError, ModelReport, build_report, group_stats, loocv,
                                 pick_components, rmse, rmsem, select_components,
                                 uncertainty, uncertainty_in_range)


def naive_loocv(X, y, spec):
    """Reference: refit from scratch with the row physically removed."""
    out = []
    for i in range(len(y)):
        Xi = np.delete(X, i, axis=0)
        yi = np.delete(y, i)
        out.append(float(predict_model(fit_model(Xi, yi, spec), X[i:i + 1])[0]))
    return np.array(out)


def small_set(rng, n=24, p=5):
    X = rng.uniform(1, 3, (n, p))
    y = np.repeat([0.0, 2.5, 5.0, 10.0], n // 4)
    X[:, 0] += 0.05 * y
    X[:, 1] *= 1 + 0.02 * y
    return X, y


class TestMetrics:
    def test_rmse_examples(self):
        assert rmse([1.0, 3.0], [2.0, 2.0]) == pytest.approx(1.0, abs=1e-12)
        assert rmse([0.0], [3.0]) == 3.0
        assert rmse([4.0, 5.0], [4.0, 5.0]) == 0.0

    def test_rmse_rejects_empty_and_mismatched(self):
        with pytest.raises(ValueError):
            rmse([], [])
        with pytest.raises(ValueError):
            rmse([1.0], [1.0, 2.0])

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.data())
    def test_rmse_zero_iff_exact(self, truth, data):
        pred = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=len(truth),
                                  max_size=len(truth)))
        r = rmse(pred, truth)
        assert r >= 0
        assert (r == 0) == (pred == truth)

    def test_rmsem_two_groups(self):
        pred = [1.0, 1.0, 9.0, 9.0]
        assert rmsem(pred, [0.0, 0.0, 10.0, 10.0]) == pytest.approx(1.0, abs=1e-12)

    def test_rmsem_weights_groups_equally(self):
        # ten samples at 0 off by 1, one sample at 10 off by 3
        truth = [0.0] * 10 + [10.0]
        pred = [1.0] * 10 + [13.0]
        assert rmsem(pred, truth) == pytest.approx(math.sqrt((1 + 9) / 2), abs=1e-12)

    def test_rmsem_zero_for_group_mean_perfect_predictions(self):
        truth = [0.0, 0.0, 5.0, 5.0]
        pred = [-1.0, 1.0, 3.0, 7.0]
        assert rmsem(pred, truth) == 0.0
        assert rmse(pred, truth) > 0

    def test_rmsem_single_group_rejected(self):
        with pytest.raises(ValueError, match="two distinct"):
            rmsem([1.0, 2.0], [3.0, 3.0])

    def test_uncertainty_examples(self):
        assert uncertainty([1.0, 3.0], [2.0, 2.0]) == pytest.approx(4 * math.sqrt(2), abs=1e-12)
        assert uncertainty([1.0, 1.0, 4.0, 4.0], [0.0, 0.0, 5.0, 5.0]) == 0.0

    def test_group_stats_use_sample_sd(self):
        (g,) = group_stats([1.0, 2.0, 6.0], [3.0, 3.0, 3.0])
        assert g.n == 3 and g.mean_pred == 3.0
        assert g.sd_pred == pytest.approx(math.sqrt(7.0), abs=1e-12)  # (4 + 1 + 9) / 2

    def test_singletons_ignored_with_warning(self):
        with pytest.warns(UserWarning, match="single sample"):
            u = uncertainty([1.0, 3.0, 50.0], [2.0, 2.0, 7.0])
        assert u == pytest.approx(4 * math.sqrt(2), abs=1e-12)
        with pytest.raises(ValueError), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            uncertainty([1.0, 2.0], [0.0, 1.0])

    def test_uncertainty_in_range(self):
        truth = [0.0, 0.0, 5.0, 5.0, 40.0, 40.0]
        pred = [0.0, 1.0, 5.0, 7.0, 30.0, 50.0]
        sd = {0: math.sqrt(0.5), 5: math.sqrt(2.0), 40: math.sqrt(200.0)}
        assert uncertainty_in_range(pred, truth, 20.0) == pytest.approx(4 * sd[5], abs=1e-12)
        assert uncertainty_in_range(pred, truth, 0.0) == pytest.approx(4 * sd[0], abs=1e-12)
        assert uncertainty_in_range(pred, truth, 100.0) == uncertainty(pred, truth)
        with pytest.raises(ValueError, match="no concentration group"):
            uncertainty_in_range(pred, truth, -1.0)

    @given(shift=st.floats(-100, 100))
    def test_uncertainty_shift_invariant(self, shift):
        truth = np.repeat([0.0, 5.0, 10.0], 4)
        pred = truth + np.array([0.3, -0.2, 0.1, 0.0, 1.0, -1.0, 0.5, 0.2, 0.0, 0.1, -0.3, 0.4])
        assert uncertainty(pred + shift, truth) == pytest.approx(uncertainty(pred, truth),
                                                                 rel=1e-9, abs=1e-9)


class TestComponentRule:
    def test_tolerance_example(self):
        assert pick_components([10, 4, 4.1, 3.9, 3.95], 0.05) == 2

    def test_zero_tolerance_returns_argmin(self):
        assert pick_components([10, 4, 4.1, 3.9, 3.95], 0.0) == 4
        assert pick_components([5, 4, 3, 2, 1], 0.0) == 5

    def test_exact_ties_prefer_fewest(self):
        assert pick_components([3, 2, 2, 2], 0.0) == 2

    def test_flat_curve(self):
        assert pick_components([2.0] * 6, 0.05) == 1

    def test_nan_entries_skipped(self):
        assert pick_components([np.nan, 3.0, 1.0, np.nan], 0.0) == 3

    def test_negative_tolerance_rejected(self):
        with pytest.raises(ValueError):
            pick_components([1.0], -0.1)

    @given(st.lists(st.floats(0.01, 100), min_size=1, max_size=20), st.floats(0, 1))
    def test_rule_definition(self, curve, tau):
        a = pick_components(curve, tau)
        limit = (1 + tau) * min(curve)
        assert curve[a - 1] <= limit
        assert all(v > limit for v in curve[:a - 1])


class TestLoocv:
    def test_collinear_points(self):
        X = np.array([[1.0], [2.0], [3.0]])
        y = np.array([2.0, 4.0, 6.0])
        cv, err = loocv(X, y, ModelSpec("raw_plsr", 1))
        np.testing.assert_allclose(cv, y, rtol=1e-12)
        assert err == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("variant", ["raw_plsr", "log_plsr", "lw_plsr"])
    def test_matches_naive_refit(self, rng, variant):
        X, y = small_set(rng)
        lw = LwConfig(k=12) if variant == "lw_plsr" else None
        spec = ModelSpec(variant, 2, lw=lw)
        cv, err = loocv(X, y, spec)
        ref = naive_loocv(X, y, spec)
        np.testing.assert_array_equal(cv, ref)
        assert err == rmse(ref, y)

    def test_threads_bit_identical(self, rng):
        X, y = small_set(rng)
        spec = ModelSpec("log_plsr", 3)
        np.testing.assert_array_equal(loocv(X, y, spec, threads=4)[0], loocv(X, y, spec)[0])

    def test_held_out_prediction_ignores_order_of_others(self, rng):
        X, y = small_set(rng)
        spec = ModelSpec("raw_plsr", 3)
        cv = loocv(X, y, spec)[0]
        perm = rng.permutation(len(y))
        cv_perm = loocv(X[perm], y[perm], spec)[0]
        np.testing.assert_allclose(cv_perm, cv[perm], rtol=1e-10, atol=1e-10)

    def test_fold_failure_names_the_fold(self):
        # dropping row 3 leaves a constant response
        X = np.arange(8.0).reshape(4, 2)
        y = np.array([1.0, 1.0, 1.0, 2.0])
        with pytest.raises(FoldError, match="fold 3") as exc:
            loocv(X, y, ModelSpec("raw_plsr", 1))
        assert exc.value.fold == 3

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            loocv(np.ones((2, 1)), np.array([1.0, 2.0]), ModelSpec())


class TestSelectComponents:
    def test_curve_length_and_choice(self, rng):
        X, y = small_set(rng)
        best, curve = select_components(X, y, ModelSpec("raw_plsr"), 4)
        assert len(curve) == 4
        assert best == pick_components(curve, 0.05)
        assert curve[1] == loocv(X, y, ModelSpec("raw_plsr", 2))[1]

    def test_infeasible_counts_marked_nan(self, rng):
        X, y = small_set(rng, p=3)
        best, curve = select_components(X, y, ModelSpec("raw_plsr"), 5)
        assert np.isfinite(curve[:3]).all() and np.isnan(curve[3:]).all()
        assert 1 <= best <= 3

    def test_all_failing_raises(self):
        X = np.arange(8.0).reshape(4, 2)
        y = np.array([1.0, 1.0, 1.0, 2.0])
        with pytest.raises(ValueError, match="no component count"):
            select_components(X, y, ModelSpec("raw_plsr"), 2)

    def test_log_variant_on_exact_data_picks_one(self):
        fm = cf.build_feature_matrix(synth.generate(rising_exact_config()))
        best, curve = select_components(fm.X, fm.y, ModelSpec("log_plsr"), 3)
        assert best == 1
        assert curve[0] < 1e-6


class TestReport:
    def test_perfect_data_metrics_vanish(self):
        fm = cf.build_feature_matrix(synth.generate(rising_exact_config()))
        report = build_report(fm.X, fm.y, ModelSpec("log_plsr", 1))
        for name in ("rmse", "rmsecv", "rmsem", "uncertainty"):
            assert getattr(report, name) < 1e-6, name

    def test_json_round_trip(self, tmp_path, rng):
        X, y = small_set(rng)
        spec = ModelSpec("raw_plsr", 2)
        report = build_report(X, y, spec, rmsecv_curve=[1.0, float("nan")], tolerance=0.05,
                              cycle_ids=np.arange(100, 100 + len(y)))
        path = tmp_path / "r.json"
        report.save(path)
        back = ModelReport.load(path)
        assert back.to_json() == report.to_json()
        np.testing.assert_array_equal(back.fitted, report.fitted)
        d = json.loads(path.read_text())
        assert d["schema_version"] == 1 and d["variant"] == "raw_plsr"
        assert d["rmsecv_curve"] == [1.0, None]
        assert d["predictions"][0]["cycle_id"] == 100
        assert set(d["metrics"]) >= {"rmse", "rmsecv", "rmsem", "uncertainty"}
        assert ModelSpec.from_dict(d["model_spec"]) == spec

    def test_plot_csv_one_row_per_group(self, rng):
        X, y = small_set(rng)
        report = build_report(X, y, ModelSpec("raw_plsr", 2))
        lines = report.plot_csv().splitlines()
        assert lines[0] == "concentration_ppb,mean_pred,sd_pred,n"
        assert len(lines) - 1 == len(np.unique(y))
        assert [float(r.split(",")[0]) for r in lines[1:]] == sorted(np.unique(y))

    def test_metrics_consistent_with_predictions(self, rng):
        X, y = small_set(rng)
        report = build_report(X, y, ModelSpec("log_plsr", 2), range_limits=(5.0,))
        assert report.rmse == rmse(report.fitted, y)
        assert report.rmsecv == rmse(report.cross_validated, y)
        assert report.uncertainty == uncertainty(report.fitted, y)
        assert report.uncertainty_in_range["5.0"] == uncertainty_in_range(report.fitted, y, 5.0)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_metrics_finite_and_non_negative(self, seed):
        X, y = small_set(np.random.default_rng(seed))
        report = build_report(X, y, ModelSpec("raw_plsr", 2))
        for v in (report.rmse, report.rmsecv, report.rmsem, report.uncertainty):
            assert np.isfinite(v) and v >= 0


@pytest.mark.parametrize("variant", [
    "raw_plsr",
    pytest.param("log_plsr", marks=pytest.mark.xfail(
        strict=True, reason="log fit error is about 9% below its LOOCV error on this data")),
    "lw_plsr",
])
def test_rmsecv_close_to_rmse_on_full_schedule(paper_dataset, variant):
    X, y = paper_dataset.X, paper_dataset.y
    lw = LwConfig(100) if variant == "lw_plsr" else None
    best, _ = select_components(X, y, ModelSpec(variant, lw=lw), 20, threads=4)
    report = build_report(X, y, ModelSpec(variant, best, lw=lw), threads=4)
    assert report.rmsecv <= 1.05 * report.rmse
