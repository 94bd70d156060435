import math

import mpmath
import numpy as np
import pytest

import factorbt as fb
from factorbt.errors import (
    InsufficientData,
    LengthMismatch,
    NoFactorsSurvive,
    RankDeficient,
    ZeroVariance,
)
from factorbt.util import midranks


def fpanel(columns, names=None):
    """FactorPanel with one asset from a dict/list of 1-D factor columns."""
    cols = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    names = tuple(names or (f"f{j}" for j in range(cols.shape[1])))
    return fb.FactorPanel(names, cols[:, None, :],
                          [f"d{i:04d}" for i in range(len(cols))], ["A"])


class TestInformationCoefficient:
    def test_self_correlation_is_one(self):
        r = np.array([0.01, -0.02, 0.005, 0.03])
        assert fb.information_coefficient(r, r) == pytest.approx(1.0, abs=1e-12)

    def test_sign_flip_is_minus_one(self):
        r = np.array([0.01, -0.02, 0.005, 0.03])
        assert fb.information_coefficient(-r, r) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_evaluated_pearson(self):
        ic = fb.information_coefficient([1, 2, 3, 4], [1, 3, 2, 4])
        assert ic == pytest.approx(0.8, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            fb.information_coefficient([1, 2, 3], [1, 2])
        with pytest.raises(LengthMismatch):
            fb.information_coefficient([1, 2], [1, 2])

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            fb.information_coefficient([1, 1, 1], [1, 2, 3])

    def test_affine_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            f = rng.normal(size=50)
            r = rng.normal(size=50)
            base = fb.information_coefficient(f, r)
            a, b = rng.uniform(0.1, 5.0), rng.normal()
            assert abs(fb.information_coefficient(a * f + b, r) - base) < 1e-12
            assert abs(fb.information_coefficient(f, a * r + b) - base) < 1e-12


class TestRankIc:
    def test_monotone_transform_gives_one(self):
        r = np.array([0.01, -0.02, 0.005, 0.03, -0.01])
        assert fb.rank_ic(np.exp(5 * r), r) == pytest.approx(1.0, abs=1e-12)

    def test_midrank_pearson_oracle(self):
        assert fb.rank_ic([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_all_equal_factor_raises(self):
        with pytest.raises(ZeroVariance):
            fb.rank_ic([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])

    def test_equals_ic_of_midranks_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            f = rng.integers(0, 5, 30).astype(float)  # ties on purpose
            r = rng.normal(size=30)
            assert fb.rank_ic(f, r) == fb.information_coefficient(midranks(f),
                                                                  midranks(r))

    def test_midranks_average_ties(self):
        assert midranks(np.array([10.0, 20.0, 20.0, 30.0])).tolist() == \
            [1.0, 2.5, 2.5, 4.0]


class TestScreenFactors:
    def test_near_duplicate_keeps_higher_ic(self):
        rng = np.random.default_rng(3)
        y = rng.normal(size=400)
        strong = y + 0.1 * rng.normal(size=400)
        weak = strong + 0.2 * rng.normal(size=400)
        panel = fpanel([strong, weak], ["strong", "weak"])
        selected, stats = fb.screen_factors(panel, y, fb.ScreenConfig())
        assert abs(stats.pairwise_corr[0, 1]) > 0.8
        assert selected == ["strong"]

    def test_exact_duplicates_drop_the_later_name(self):
        rng = np.random.default_rng(4)
        y = rng.normal(size=300)
        f = y + rng.normal(size=300)
        panel = fpanel([f, f.copy()], ["first", "second"])
        selected, _ = fb.screen_factors(panel, y, fb.ScreenConfig())
        assert selected == ["first"]

    def test_all_pass_preserves_input_order(self):
        rng = np.random.default_rng(5)
        y = rng.normal(size=500)
        cols = [y + 3.0 * rng.normal(size=500) for _ in range(3)]
        panel = fpanel(cols, ["a", "b", "c"])
        selected, stats = fb.screen_factors(
            panel, y, fb.ScreenConfig(min_abs_ic=0.0, max_pairwise_corr=0.99))
        assert selected == ["a", "b", "c"]
        assert np.all(np.abs(stats.ic) <= 1.0)
        assert np.all(np.abs(stats.rank_ic) <= 1.0)

    def test_planted_signal_kept_noise_dropped(self):
        cfg = fb.SynthConfig(
            assets=8, days=1501,
            regimes=(fb.RegimeSpec("shock", 1501, 0.0, 0.01),),
            loadings=fb.Loadings(alpha=0.0, betas={"market_return": 2.0}),
            noise=0.1)
        panel = fb.synth_generate(cfg, 7)
        fp = fb.compute_factors(panel)
        rets = fb.panel_log_returns(panel)
        z = fb.standardize(fp, (0, fp.n_days))
        selected, stats = fb.screen_factors(z.slice_days(0, fp.n_days - 1),
                                            rets[1:], fb.ScreenConfig())
        by_name = dict(zip(stats.factor_names, stats.ic))
        assert "market_return" in selected
        assert abs(by_name["market_return"]) > 0.02
        assert "pe_ratio" not in selected and "pb_ratio" not in selected
        assert abs(by_name["pe_ratio"]) < 0.02

    def test_nothing_survives_raises(self):
        rng = np.random.default_rng(6)
        panel = fpanel([rng.normal(size=100)])
        with pytest.raises(NoFactorsSurvive):
            fb.screen_factors(panel, rng.normal(size=100),
                              fb.ScreenConfig(min_abs_ic=0.9))

    def test_corr_matrix_symmetric_unit_diagonal(self):
        rng = np.random.default_rng(7)
        panel = fpanel([rng.normal(size=80) for _ in range(4)])
        stats = fb.factor_stats(panel, rng.normal(size=80))
        assert np.array_equal(stats.pairwise_corr, stats.pairwise_corr.T)
        assert np.all(stats.pairwise_corr.diagonal() == 1.0)

    def test_output_is_an_ordered_subset(self):
        rng = np.random.default_rng(8)
        y = rng.normal(size=300)
        panel = fpanel([y + rng.normal(size=300) * s for s in (1, 2, 3, 4)],
                       ["w", "x", "y", "z"])
        selected, _ = fb.screen_factors(panel, y, fb.ScreenConfig())
        names = list(panel.factor_names)
        assert [names.index(s) for s in selected] == \
            sorted(names.index(s) for s in selected)


class TestFitOls:
    def build_exact(self, rng, n=200, alpha=0.1, betas=(2.0, -1.0)):
        x = rng.normal(size=(n, len(betas)))
        y = alpha + x @ np.array(betas)
        panel = fpanel(list(x.T))
        return panel, y[:, None]

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(9)
        panel, y = self.build_exact(rng)
        model = fb.fit_ols(panel, y, (0, 200))
        assert model.alpha == pytest.approx(0.1, abs=1e-8)
        np.testing.assert_allclose(model.betas, [2.0, -1.0], atol=1e-8)

    def test_identity_regression(self):
        rng = np.random.default_rng(10)
        f = rng.normal(size=150)
        panel = fpanel([f])
        model = fb.fit_ols(panel, f[:, None], (0, 150))
        assert model.alpha == pytest.approx(0.0, abs=1e-10)
        assert model.betas[0] == pytest.approx(1.0, abs=1e-10)

    def test_against_high_precision_normal_equations(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(200, 3))
        y = 0.05 + x @ np.array([1.0, -0.5, 0.25]) + 0.1 * rng.normal(size=200)
        model = fb.fit_ols(fpanel(list(x.T)), y[:, None], (0, 200))
        design = np.column_stack([np.ones(200), x])
        with mpmath.workdps(50):
            a = mpmath.matrix(design.tolist())
            rhs = mpmath.matrix(y.tolist())
            coef = mpmath.lu_solve(a.T * a, a.T * rhs)
        expected = np.array([float(coef[k]) for k in range(4)])
        got = np.array([model.alpha, *model.betas])
        np.testing.assert_allclose(got, expected, rtol=1e-8)

    def test_residuals_mean_zero_and_orthogonal(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(300, 3))
        y = 0.02 + x @ np.array([0.5, 0.1, -0.2]) + rng.normal(size=300)
        panel = fpanel(list(x.T))
        model = fb.fit_ols(panel, y[:, None], (0, 300))
        res = model.residuals
        assert abs(res.mean()) < 1e-10
        for j in range(3):
            col = x[:, j]
            bound = 1e-8 * np.linalg.norm(res) * np.linalg.norm(col)
            assert abs(res @ col) < bound

    def test_rank_deficient_names_columns(self):
        rng = np.random.default_rng(13)
        f = rng.normal(size=100)
        panel = fpanel([f, 2.0 * f], ["base", "double"])
        with pytest.raises(RankDeficient) as err:
            fb.fit_ols(panel, rng.normal(size=(100, 1)), (0, 100))
        assert "base" in str(err.value) and "double" in str(err.value)

    def test_too_few_rows(self):
        rng = np.random.default_rng(14)
        panel = fpanel([rng.normal(size=3), rng.normal(size=3)])
        with pytest.raises(InsufficientData):
            fb.fit_ols(panel, rng.normal(size=(3, 1)), (0, 3))


class TestPredictLinear:
    def test_all_zero_factors_gives_alpha(self):
        model = fb.LinearModel(0.07, np.array([1.0, 2.0]), np.zeros(3), ("a", "b"))
        assert fb.predict_linear(model, [0.0, 0.0]) == 0.07

    def test_worked_example(self):
        model = fb.LinearModel(0.1, np.array([2.0, -1.0]), np.zeros(3), ("a", "b"))
        assert fb.predict_linear(model, [0.5, 1.0]) == pytest.approx(0.1, abs=1e-15)

    def test_length_mismatch(self):
        model = fb.LinearModel(0.0, np.array([1.0]), np.zeros(3), ("a",))
        with pytest.raises(LengthMismatch):
            fb.predict_linear(model, [1.0, 2.0])

    def test_in_sample_prediction_mean_matches_target_mean(self):
        rng = np.random.default_rng(15)
        x = rng.normal(size=(250, 2))
        y = 0.01 + x @ np.array([0.3, -0.6]) + rng.normal(size=250)
        panel = fpanel(list(x.T))
        model = fb.fit_ols(panel, y[:, None], (0, 250))
        preds = np.array([fb.predict_linear(model, row) for row in x])
        assert preds.mean() == pytest.approx(y.mean(), abs=1e-10)
        np.testing.assert_allclose(preds, y - model.residuals, atol=1e-10)


class TestReports:
    def test_factor_report_csv(self, tmp_path):
        rng = np.random.default_rng(16)
        panel = fpanel([rng.normal(size=60) for _ in range(2)], ["a", "b"])
        y = rng.normal(size=60)
        stats = fb.factor_stats(panel, y)
        path = tmp_path / "factors.csv"
        fb.factors.write_factor_report(stats, ["a"], str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "factor,ic,rank_ic,selected"
        assert lines[1].startswith("a,") and lines[1].endswith("true")
        assert lines[2].startswith("b,") and lines[2].endswith("false")

    def test_corr_matrix_csv_is_square(self, tmp_path):
        rng = np.random.default_rng(17)
        panel = fpanel([rng.normal(size=60) for _ in range(3)], ["a", "b", "c"])
        stats = fb.factor_stats(panel, rng.normal(size=60))
        path = tmp_path / "corr.csv"
        fb.factors.write_corr_matrix(stats, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "factor,a,b,c"
        assert len(lines) == 4
