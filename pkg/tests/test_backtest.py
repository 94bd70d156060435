import numpy as np
import pytest
from conftest import eq1_config, truncate_panel

import factorbt as fb
from factorbt.errors import CalendarMismatch, InsufficientData, TooShort


def brute_force_mdd(equity):
    worst = 0.0
    for i in range(len(equity)):
        for j in range(i, len(equity)):
            worst = max(worst, (equity[i] - equity[j]) / equity[i])
    return worst


class TestClassifyRegimes:
    def test_steady_drift_is_bull(self):
        labels = fb.classify_regimes(np.full(200, 0.005), lookback=60,
                                     threshold=0.10)
        assert labels[:60] == [None] * 60
        assert set(labels[60:]) == {"bull"}

    def test_flat_index_is_shock(self):
        labels = fb.classify_regimes(np.zeros(100), lookback=60, threshold=0.10)
        assert set(labels[60:]) == {"shock"}

    def test_flip_day_matches_prefix_sum_oracle(self):
        r = np.concatenate([np.full(100, 0.003), np.full(100, -0.003)])
        labels = fb.classify_regimes(r, lookback=60, threshold=0.10)
        csum = np.concatenate([[0.0], np.cumsum(r)])
        for t in range(60, 200):
            trailing = csum[t + 1] - csum[t + 1 - 60]
            expected = ("bull" if trailing >= 0.10
                        else "bear" if trailing <= -0.10 else "shock")
            assert labels[t] == expected, t
        assert labels[99] == "bull"
        first_bear = labels.index("bear")
        # trailing sum 0.003*(60 - 2k) <= -0.10 first at k = 47 past the flip
        assert first_bear == 100 + 47 - 1

    def test_too_short(self):
        with pytest.raises(TooShort):
            fb.classify_regimes(np.zeros(60), lookback=60)


def bt_cfg(**kw):
    kw.setdefault("train_days", 300)
    kw.setdefault("test_days", 100)
    return fb.BacktestConfig(**kw)


class TestConstructPortfolio:
    def test_all_equal_predictions_tie_break_by_asset_id(self):
        ids = [f"A{j}" for j in range(10)]
        w = fb.construct_portfolio(np.zeros(10), ids, bt_cfg(top_fraction=0.2))
        assert w[:2].tolist() == [0.5, 0.5]
        assert np.all(w[2:] == 0.0)

    def test_full_universe_equal_weight(self):
        ids = ["A", "B", "C", "D"]
        w = fb.construct_portfolio(np.array([0.1, -0.2, 0.3, 0.0]), ids,
                                   bt_cfg(top_fraction=1.0))
        assert np.allclose(w, 0.25)

    def test_top_two_by_sort_oracle(self):
        rng = np.random.default_rng(31)
        preds = rng.normal(size=10)
        ids = [f"A{j}" for j in range(10)]
        w = fb.construct_portfolio(preds, ids, bt_cfg(top_fraction=0.2))
        top = np.argsort(-preds)[:2]
        assert np.all(w[top] == 0.5)
        assert w.sum() == pytest.approx(1.0)

    def test_fractional_count_rounds_up(self):
        ids = [f"A{j}" for j in range(7)]
        w = fb.construct_portfolio(np.arange(7.0), ids, bt_cfg(top_fraction=0.2))
        assert int((w > 0).sum()) == 2  # ceil(1.4)


class TestApplyRiskConstraints:
    def test_at_target_unchanged(self):
        cfg = bt_cfg(vol_target=0.15, drawdown_limit=0.10)
        w = np.array([0.5, 0.5])
        out = fb.apply_risk_constraints(w, 0.15, 0.0, cfg)
        assert np.array_equal(out, w)

    def test_double_vol_halves_weights(self):
        cfg = bt_cfg(vol_target=0.15)
        out = fb.apply_risk_constraints(np.array([0.5, 0.5]), 0.30, 0.0, cfg)
        assert out.tolist() == [0.25, 0.25]

    def test_drawdown_breach_halves_and_composes(self):
        cfg = bt_cfg(vol_target=0.15, drawdown_limit=0.10)
        breached = fb.apply_risk_constraints(np.array([1.0]), 0.15, 0.12, cfg)
        assert breached.tolist() == [0.5]
        both = fb.apply_risk_constraints(np.array([1.0]), 0.30, 0.12, cfg)
        assert both.tolist() == [0.25]

    def test_identity_with_infinite_target_and_unit_limit(self):
        cfg = bt_cfg(vol_target=np.inf, drawdown_limit=1.0)
        w = np.array([0.3, 0.7])
        out = fb.apply_risk_constraints(w, 0.8, 0.99, cfg)
        assert np.array_equal(out, w)


@pytest.fixture(scope="module")
def eq1_panel():
    return fb.synth_generate(eq1_config(), 5)


@pytest.fixture(scope="module")
def eq1_result(eq1_panel):
    return fb.walk_forward(eq1_panel, bt_cfg(model_kind="linear", seed=5))


class TestWalkForward:
    def test_noiseless_predictions_match_realized_returns(self, eq1_panel,
                                                          eq1_result):
        fp = fb.compute_factors(eq1_panel)
        rets = fb.panel_log_returns(eq1_panel)
        pos = {d: i for i, d in enumerate(fp.calendar)}
        for t, date in enumerate(eq1_result.decision_dates):
            day = pos[date]
            np.testing.assert_allclose(eq1_result.predictions[t],
                                       rets[day + 1], atol=1e-8)

    def test_equity_matches_independent_replay(self, eq1_panel, eq1_result):
        fp = fb.compute_factors(eq1_panel)
        simple = np.expm1(fb.panel_log_returns(eq1_panel))
        pos = {d: i for i, d in enumerate(fp.calendar)}
        eq = 1.0
        values = [eq]
        for t, date in enumerate(eq1_result.decision_dates):
            day = pos[date]
            eq *= 1.0 + float(eq1_result.weights_history[t] @ simple[day + 1])
            values.append(eq)
        np.testing.assert_allclose(eq1_result.equity.equity, values,
                                   rtol=0, atol=1e-10)
        assert eq1_result.overall.max_drawdown == pytest.approx(
            brute_force_mdd(eq1_result.equity.equity), abs=1e-12)

    def test_bit_identical_on_rerun(self, eq1_panel, eq1_result):
        again = fb.walk_forward(eq1_panel, bt_cfg(model_kind="linear", seed=5))
        assert np.array_equal(again.weights_history, eq1_result.weights_history)
        assert np.array_equal(again.equity.equity, eq1_result.equity.equity)
        assert np.array_equal(again.predictions, eq1_result.predictions)
        assert again.return_dates == eq1_result.return_dates

    def test_weights_bounded_and_sub_unit(self, eq1_result):
        w = eq1_result.weights_history
        assert np.all(w >= 0.0) and np.all(w <= 1.0)
        assert np.all(w.sum(axis=1) <= 1.0 + 1e-12)

    def test_regime_day_sets_partition_labeled_days(self, eq1_result):
        labels = eq1_result.regime_labels
        labeled = [lab for lab in labels if lab is not None]
        counts = {rg: labels.count(rg) for rg in ("bull", "bear", "shock")}
        assert sum(counts.values()) == len(labeled)
        for rg, rep in eq1_result.per_regime.items():
            assert counts[rg] >= 20

    def test_truncate_and_replay_prefix_weights_identical(self, eq1_panel,
                                                          eq1_result):
        rng = np.random.default_rng(33)
        pos = {d: t for t, d in enumerate(eq1_result.decision_dates)}
        for cut in rng.integers(450, 690, size=8):
            part = fb.walk_forward(truncate_panel(eq1_panel, int(cut)),
                                   bt_cfg(model_kind="linear", seed=5))
            assert part.decision_dates == \
                eq1_result.decision_dates[:len(part.decision_dates)]
            for t, date in enumerate(part.decision_dates):
                assert np.array_equal(part.weights_history[t],
                                      eq1_result.weights_history[pos[date]]), date

    def test_insufficient_data(self, panel_builder):
        rng = np.random.default_rng(34)
        close = np.exp(rng.normal(0, 0.01, (50, 3)).cumsum(axis=0)) * 10
        with pytest.raises(InsufficientData):
            fb.walk_forward(panel_builder(close), bt_cfg())


class TestCompareModels:
    def test_single_result_passthrough(self, eq1_result):
        table = fb.compare_models([("Benchmark model", eq1_result)])
        assert table.names == ["Benchmark model"]
        rep = table.overall["Benchmark model"]
        assert rep is eq1_result.overall
        assert table.overall_row_text("Benchmark model") == \
            fb.format_overall_metrics(rep.max_drawdown, rep.sharpe, rep.var95)

    def test_overall_fixture_rows(self):
        assert fb.format_overall_metrics(0.125, 0.68, -0.0235) == \
            "12.5% 0.68 -2.35%"
        assert fb.format_overall_metrics(0.088, 0.90, -0.0188) == \
            "8.8% 0.90 -1.88%"

    def test_regime_fixture_row(self):
        assert fb.format_regime_metrics(0.00352, 0.0495, 0.72) == \
            "0.352 | 4.95 | 0.72"

    def test_calendar_mismatch(self, eq1_panel, eq1_result):
        other = fb.walk_forward(truncate_panel(eq1_panel, 600),
                                bt_cfg(model_kind="linear", seed=5))
        with pytest.raises(CalendarMismatch):
            fb.compare_models([("a", eq1_result), ("b", other)])

    def test_render_text_layout(self, eq1_result):
        table = fb.compare_models([("Benchmark model", eq1_result)])
        text = table.render_text()
        lines = text.splitlines()
        assert lines[0].split() == ["model", "max", "drawdown", "sharpe",
                                    "VaR", "95%"]
        assert lines[1].startswith("Benchmark model")
        assert "regime" in text  # per-regime block present

    def test_csv_output(self, eq1_result, tmp_path):
        table = fb.compare_models([("Benchmark model", eq1_result)])
        table.write_csv(str(tmp_path / "overall.csv"),
                        str(tmp_path / "regimes.csv"))
        lines = (tmp_path / "overall.csv").read_text().splitlines()
        assert lines[0] == "model,max_drawdown,sharpe,var95"
        assert len(lines) == 2
        rlines = (tmp_path / "regimes.csv").read_text().splitlines()
        assert rlines[0] == ("regime,model,mean_daily_return,max_drawdown,"
                             "sharpe,var95")


class TestOptimizationSweep:
    def test_single_rung_ladder_is_passthrough(self, eq1_panel):
        sweep = fb.optimization_sweep(eq1_panel, bt_cfg(seed=5), degrees=[0])
        direct = fb.walk_forward(
            eq1_panel, bt_cfg(model_kind="linear", seed=5,
                              use_vol_target=False, use_drawdown_control=False))
        degree, ann, sharpe_value = sweep.rows[0]
        assert degree == 0
        assert ann == direct.overall.ann_return
        assert sharpe_value == direct.overall.sharpe

    def test_repeat_is_bit_identical(self, eq1_panel):
        s1 = fb.optimization_sweep(eq1_panel, bt_cfg(seed=5), degrees=[0])
        s2 = fb.optimization_sweep(eq1_panel, bt_cfg(seed=5), degrees=[0])
        assert s1.rows == s2.rows

    def test_csv_schema(self, eq1_panel, tmp_path):
        sweep = fb.optimization_sweep(eq1_panel, bt_cfg(seed=5), degrees=[0])
        path = tmp_path / "sweep.csv"
        fb.write_sweep_csv(sweep, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "degree,ann_return,sharpe"
        assert len(lines) == 2


class TestRunDir:
    def test_files_written_and_parse(self, eq1_result, tmp_path):
        fb.save_run_dir(eq1_result, str(tmp_path / "run"))
        base = tmp_path / "run"
        for name in ("equity.csv", "weights.csv", "report.csv", "regimes.csv"):
            assert (base / name).exists(), name
        eq_lines = (base / "equity.csv").read_text().splitlines()
        assert eq_lines[0] == "date,equity"
        assert float(eq_lines[1].split(",")[1]) == 1.0
        assert len(eq_lines) == len(eq1_result.equity.equity) + 1
        rep_lines = (base / "report.csv").read_text().splitlines()
        names = [ln.split(",")[0] for ln in rep_lines[1:]]
        assert names[0] == "overall"
        assert set(names[1:]) == set(eq1_result.per_regime)
