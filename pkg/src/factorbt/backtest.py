"""Walk-forward backtesting with regime segmentation and risk constraints.

The engine refits the chosen model (linear baseline or LSTM) on each rolling
train window, trades the following test window long-only in the top
prediction quantile, and compounds equity across folds.  Exposure can be
scaled down by trailing-volatility targeting and a drawdown throttle.  All
decisions for day t use data through day t only; regime labels are used for
reporting, never for decisions.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    CalendarMismatch,
    FactorbtError,
    InsufficientData,
    InvalidConfig,
    TooShort,
)
from .factors import ScreenConfig, fit_ols, screen_factors
from .lstm import TrainConfig, _forward_batch, make_windows, train
from .marketdata import (
    FactorPanel,
    MarketPanel,
    compute_factors,
    panel_log_returns,
    standardize,
)
from .risk import EquityCurve, RiskReport, pct, risk_report, write_report_csv
from .util import ceil_count, fmt, write_csv

REGIMES = ("bull", "bear", "shock")


@dataclass
class BacktestConfig:
    train_days: int = 750
    test_days: int = 250
    top_fraction: float = 0.2
    vol_target: float = 0.15        # annualized
    drawdown_limit: float = 0.10
    model_kind: str = "linear"      # "linear" | "lstm"
    train_cfg: Optional[TrainConfig] = None
    seed: int = 0
    use_vol_target: bool = True
    use_drawdown_control: bool = True
    vol_lookback: int = 20
    regime_lookback: int = 60
    regime_threshold: float = 0.10
    cost_per_turnover: float = 0.0  # proportional transaction cost
    rf: float = 0.0
    periods_per_year: int = 252
    screen: ScreenConfig = field(default_factory=ScreenConfig)

    def __post_init__(self):
        if not 0.0 < self.top_fraction <= 1.0:
            raise InvalidConfig("top_fraction must be in (0, 1]")
        if self.vol_target <= 0:
            raise InvalidConfig("vol_target must be > 0")
        if not 0.0 < self.drawdown_limit <= 1.0:
            raise InvalidConfig("drawdown_limit must be in (0, 1]")
        if self.model_kind not in ("linear", "lstm"):
            raise InvalidConfig(f"unknown model_kind {self.model_kind!r}")
        if self.train_days < 2 or self.test_days < 1:
            raise InvalidConfig("train_days/test_days too small")


def classify_regimes(index_returns: np.ndarray, lookback: int = 60,
                     threshold: float = 0.10) -> List[Optional[str]]:
    """Label each day bull/bear/shock from the trailing cumulative log return.

    Day t (t >= lookback) is bull when the sum of the last ``lookback``
    returns through t is >= +threshold, bear when <= -threshold, else shock.
    Days before the first full window are None and excluded from reports.

    Raises:
        TooShort: series length must exceed the lookback.
    """
    r = np.asarray(index_returns, dtype=float)
    if r.size <= lookback:
        raise TooShort(f"need more than lookback={lookback} returns, have {r.size}")
    csum = np.concatenate([[0.0], np.cumsum(r)])
    labels: List[Optional[str]] = [None] * r.size
    for t in range(lookback, r.size):
        trailing = csum[t + 1] - csum[t + 1 - lookback]
        if trailing >= threshold:
            labels[t] = "bull"
        elif trailing <= -threshold:
            labels[t] = "bear"
        else:
            labels[t] = "shock"
    return labels


def construct_portfolio(predictions: np.ndarray, asset_ids: Sequence[str],
                        cfg: BacktestConfig) -> np.ndarray:
    """Equal-weight the top prediction quantile at gross exposure 1.0.

    Assets are ranked by prediction descending, ties broken by asset_id
    ascending; ceil(top_fraction * N) names are selected.
    """
    preds = np.asarray(predictions, dtype=float)
    n = preds.size
    if n < 1:
        raise InvalidConfig("need at least one asset")
    count = min(n, max(1, ceil_count(cfg.top_fraction * n)))
    order = sorted(range(n), key=lambda j: (-preds[j], asset_ids[j]))
    weights = np.zeros(n)
    weights[order[:count]] = 1.0 / count
    return weights


def apply_risk_constraints(weights: np.ndarray, realized_vol: float,
                           running_drawdown: float,
                           cfg: BacktestConfig) -> np.ndarray:
    """Scale exposure for volatility targeting and drawdown control.

    scale = min(1, vol_target / realized_vol) when realized_vol > 0, else 1;
    the scale is then halved once while the running drawdown exceeds the
    limit.  With vol_target = inf and drawdown_limit = 1 this is the
    identity.
    """
    vol_target = cfg.vol_target if cfg.use_vol_target else np.inf
    dd_limit = cfg.drawdown_limit if cfg.use_drawdown_control else 1.0
    scale = min(1.0, vol_target / realized_vol) if realized_vol > 0.0 else 1.0
    if running_drawdown > dd_limit:
        scale *= 0.5
    return weights * scale


@dataclass
class BacktestResult:
    """Out-of-sample equity, weights, and per-regime risk reports."""

    asset_ids: List[str]
    decision_dates: List[str]        # date each weight vector was chosen
    return_dates: List[str]          # date each portfolio return realized
    weights_history: np.ndarray      # (T, A), chosen on decision_dates
    predictions: np.ndarray          # (T, A) model forecasts per decision day
    daily_returns: np.ndarray        # (T,) realized simple portfolio returns
    equity: EquityCurve              # length T+1, starts at 1.0
    regime_labels: List[Optional[str]]  # per return date
    per_regime: Dict[str, RiskReport]
    overall: RiskReport


def _fold_origins(m: int, cfg: BacktestConfig) -> List[int]:
    origins = []
    o = 0
    while o + cfg.train_days < m - 1:  # at least one tradable decision day
        origins.append(o)
        o += cfg.test_days
    return origins


def _fit_fold(z: FactorPanel, rets: np.ndarray, fwd: np.ndarray, lo: int,
              hi: int, cfg: BacktestConfig, fold_idx: int):
    """Fit the fold's model on [lo, hi); return a per-day predictor."""
    selected, _ = screen_factors(z.slice_days(lo, hi - 1), fwd[lo:hi - 1],
                                 cfg.screen)
    zsel = z.select(selected)

    if cfg.model_kind == "linear":
        model = fit_ols(zsel, fwd, (lo, hi - 1))

        def predict(day: int) -> np.ndarray:
            return model.alpha + zsel.values[day] @ model.betas
    else:
        tcfg = cfg.train_cfg or TrainConfig()
        tcfg = replace(tcfg, seed=tcfg.seed + fold_idx)
        if cfg.train_days <= tcfg.window:
            raise InvalidConfig("train_days must exceed the LSTM window")
        # make_windows shifts internally: the target of a window ending at
        # day t is the same-day return series at t+1, i.e. fwd[t].
        samples = make_windows(zsel.slice_days(lo, hi), rets[lo:hi], tcfg.window)
        params, _ = train(samples, tcfg)
        w = tcfg.window

        def predict(day: int) -> np.ndarray:
            batch = zsel.values[day - w + 1:day + 1].transpose(1, 0, 2)
            preds, _ = _forward_batch(params, np.ascontiguousarray(batch))
            return preds

    return predict


def walk_forward(panel: MarketPanel, cfg: BacktestConfig) -> BacktestResult:
    """Rolling refit/trade loop over the whole panel.

    Raises:
        InsufficientData: the factor calendar is shorter than
            train_days + test_days.
    """
    fp = compute_factors(panel)
    log_rets = panel_log_returns(panel)
    simple_rets = np.expm1(log_rets)
    m = fp.n_days
    if m < cfg.train_days + cfg.test_days:
        raise InsufficientData(
            f"need at least {cfg.train_days + cfg.test_days} factor days, have {m}")

    # One-day-forward targets aligned with factor day t.
    fwd = np.full_like(log_rets, np.nan)
    fwd[:-1] = log_rets[1:]

    mkt_rets = np.log(panel.market_index[1:] / panel.market_index[:-1])
    labels = classify_regimes(mkt_rets, cfg.regime_lookback, cfg.regime_threshold)

    a = panel.n_assets
    ann = np.sqrt(cfg.periods_per_year)
    decision_dates: List[str] = []
    return_dates: List[str] = []
    weights_rows: List[np.ndarray] = []
    pred_rows: List[np.ndarray] = []
    port_returns: List[float] = []
    oos_labels: List[Optional[str]] = []
    equity_values = [1.0]
    peak = 1.0
    prev_weights = np.zeros(a)

    for fold_idx, lo in enumerate(_fold_origins(m, cfg)):
        hi = lo + cfg.train_days
        try:
            # Factors flat over this fit window cannot be standardized;
            # drop them for the fold instead of aborting the run.
            std = fp.values[lo:hi].reshape(-1, fp.n_factors).std(axis=0)
            alive = [name for name, s in zip(fp.factor_names, std) if s >= 1e-12]
            z = standardize(fp.select(alive), (lo, hi))
            predict = _fit_fold(z, log_rets, fwd, lo, hi, cfg, fold_idx)
        except FactorbtError as exc:
            exc.args = (f"fold {fold_idx}: " + " ".join(str(a) for a in exc.args),)
            raise

        for day in range(hi, min(hi + cfg.test_days, m - 1)):
            preds = predict(day)
            raw = construct_portfolio(preds, panel.asset_ids, cfg)
            if len(port_returns) >= cfg.vol_lookback:
                trailing = np.array(port_returns[-cfg.vol_lookback:])
                realized_vol = float(trailing.std(ddof=1)) * ann
            else:
                realized_vol = 0.0  # full exposure until the window fills
            drawdown = (peak - equity_values[-1]) / peak
            weights = apply_risk_constraints(raw, realized_vol, drawdown, cfg)

            gross = float(weights @ simple_rets[day + 1])
            turnover = float(np.abs(weights - prev_weights).sum())
            net = gross - cfg.cost_per_turnover * turnover

            decision_dates.append(fp.calendar[day])
            return_dates.append(fp.calendar[day + 1])
            weights_rows.append(weights)
            pred_rows.append(np.asarray(preds, dtype=float))
            port_returns.append(net)
            oos_labels.append(labels[day + 1])
            equity_values.append(equity_values[-1] * (1.0 + net))
            peak = max(peak, equity_values[-1])
            prev_weights = weights

    daily = np.array(port_returns)
    log_daily = np.log1p(daily)
    per_regime: Dict[str, RiskReport] = {}
    for regime in REGIMES:
        mask = np.array([lab == regime for lab in oos_labels])
        if mask.sum() >= 20:
            per_regime[regime] = risk_report(log_daily[mask], cfg.rf,
                                             cfg.periods_per_year)
    overall = risk_report(log_daily, cfg.rf, cfg.periods_per_year)
    curve = EquityCurve([decision_dates[0], *return_dates], np.array(equity_values))
    return BacktestResult(
        asset_ids=list(panel.asset_ids),
        decision_dates=decision_dates,
        return_dates=return_dates,
        weights_history=np.vstack(weights_rows),
        predictions=np.vstack(pred_rows),
        daily_returns=daily,
        equity=curve,
        regime_labels=oos_labels,
        per_regime=per_regime,
        overall=overall,
    )


# -- model comparison --------------------------------------------------------

def format_overall_metrics(mdd: float, sharpe_value: Optional[float],
                           var95: float) -> str:
    """Overall-table cells joined by spaces, e.g. ``12.5% 0.68 -2.35%``."""
    return " ".join(_overall_cells(mdd, sharpe_value, var95))


def _overall_cells(mdd: float, sharpe_value: Optional[float], var95: float):
    s = "n/a" if sharpe_value is None else f"{sharpe_value:.2f}"
    return [pct(mdd, 1), s, pct(var95, 2)]


def format_regime_metrics(mean_daily: float, mdd: float,
                          sharpe_value: Optional[float]) -> str:
    """Regime-table cells joined by `` | ``, e.g. ``0.352 | 4.95 | 0.72``."""
    return " | ".join(_regime_cells(mean_daily, mdd, sharpe_value))


def _regime_cells(mean_daily: float, mdd: float, sharpe_value: Optional[float]):
    s = "n/a" if sharpe_value is None else f"{sharpe_value:.2f}"
    return [f"{mean_daily * 100.0:.3f}", f"{mdd * 100.0:.2f}", s]


@dataclass
class ComparisonTable:
    """Overall and per-regime metric tables for a set of named results."""

    names: List[str]
    overall: Dict[str, RiskReport]
    regimes: List[str]
    per_regime: Dict[Tuple[str, str], RiskReport]  # (regime, name) -> report

    def overall_row_text(self, name: str) -> str:
        rep = self.overall[name]
        return format_overall_metrics(rep.max_drawdown, rep.sharpe, rep.var95)

    def render_text(self) -> str:
        """Aligned plain-text report mirroring the two comparison tables."""
        lines = []
        headers = ["model", "max drawdown", "sharpe", "VaR 95%"]
        rows = [[name, *_overall_cells(r.max_drawdown, r.sharpe, r.var95)]
                for name, r in ((n, self.overall[n]) for n in self.names)]
        lines.extend(_align([headers, *rows]))
        if self.regimes:
            lines.append("")
            headers = ["regime", "model", "mean daily %", "max drawdown %",
                       "sharpe", "VaR 95% %"]
            rrows = []
            for regime in self.regimes:
                for name in self.names:
                    rep = self.per_regime.get((regime, name))
                    if rep is None:
                        continue
                    cells = _regime_cells(rep.mean_daily_return,
                                          rep.max_drawdown, rep.sharpe)
                    rrows.append([regime, name, *cells,
                                  f"{rep.var95 * 100.0:.2f}"])
            lines.extend(_align([headers, *rrows]))
        return "\n".join(lines) + "\n"

    def write_csv(self, overall_path: str, regime_path: str) -> None:
        rows = []
        for name in self.names:
            r = self.overall[name]
            rows.append([name, fmt(r.max_drawdown),
                         "" if r.sharpe is None else fmt(r.sharpe),
                         fmt(r.var95)])
        write_csv(overall_path, ["model", "max_drawdown", "sharpe", "var95"], rows)
        rrows = []
        for regime in self.regimes:
            for name in self.names:
                rep = self.per_regime.get((regime, name))
                if rep is None:
                    continue
                rrows.append([regime, name, fmt(rep.mean_daily_return),
                              fmt(rep.max_drawdown),
                              "" if rep.sharpe is None else fmt(rep.sharpe),
                              fmt(rep.var95)])
        write_csv(regime_path, ["regime", "model", "mean_daily_return",
                                "max_drawdown", "sharpe", "var95"], rrows)


def _align(rows: List[List[str]]) -> List[str]:
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    return ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in rows]


def compare_models(results: Sequence[Tuple[str, BacktestResult]]) -> ComparisonTable:
    """Build the overall and per-regime comparison tables.

    Raises:
        CalendarMismatch: the results do not share the same out-of-sample
            calendar.
    """
    if not results:
        raise InvalidConfig("nothing to compare")
    base_dates = results[0][1].return_dates
    for name, res in results[1:]:
        if res.return_dates != base_dates:
            raise CalendarMismatch(f"result {name!r} covers a different calendar")
    names = [name for name, _ in results]
    overall = {name: res.overall for name, res in results}
    per_regime: Dict[Tuple[str, str], RiskReport] = {}
    regimes = [rg for rg in REGIMES
               if any(rg in res.per_regime for _, res in results)]
    for name, res in results:
        for rg, rep in res.per_regime.items():
            per_regime[(rg, name)] = rep
    return ComparisonTable(names, overall, regimes, per_regime)


# -- optimization-degree sweep -------------------------------------------------

#: Feature ladder: each rung adds one optimization on top of the previous.
SWEEP_DEGREES = (0, 1, 2, 3, 4)


def _sweep_config(base: BacktestConfig, degree: int) -> BacktestConfig:
    if degree == 0:
        return replace(base, model_kind="linear",
                       use_vol_target=False, use_drawdown_control=False)
    cfg = replace(base, model_kind="lstm",
                  use_vol_target=False, use_drawdown_control=False)
    if degree >= 2:
        cfg = replace(cfg, use_vol_target=True)
    if degree >= 3:
        cfg = replace(cfg, use_drawdown_control=True)
    if degree >= 4:
        tcfg = cfg.train_cfg or TrainConfig()
        cfg = replace(cfg, train_cfg=replace(tcfg, epochs=tcfg.epochs * 2))
    return cfg


@dataclass
class SweepResult:
    rows: List[Tuple[int, float, float]]  # (degree, ann_return, sharpe)
    results: Dict[int, BacktestResult]


def optimization_sweep(panel: MarketPanel, base_cfg: BacktestConfig,
                       degrees: Sequence[int] = SWEEP_DEGREES) -> SweepResult:
    """Run walk_forward once per ladder rung.

    Rung 0 is the linear model with no risk scaling; 1 switches to the LSTM;
    2 adds volatility targeting; 3 adds drawdown control; 4 doubles the
    training epochs.
    """
    if not degrees:
        raise InvalidConfig("degrees must be nonempty")
    rows = []
    results = {}
    for degree in degrees:
        if degree not in SWEEP_DEGREES:
            raise InvalidConfig(f"unknown sweep degree {degree}")
        try:
            res = walk_forward(panel, _sweep_config(base_cfg, degree))
        except FactorbtError as exc:
            exc.args = (f"sweep rung {degree}: " + " ".join(str(a) for a in exc.args),)
            raise
        sharpe_value = res.overall.sharpe
        rows.append((degree, res.overall.ann_return,
                     float("nan") if sharpe_value is None else sharpe_value))
        results[degree] = res
    return SweepResult(rows, results)


def write_sweep_csv(sweep: SweepResult, path: str) -> None:
    write_csv(path, ["degree", "ann_return", "sharpe"],
              [[str(d), fmt(r), fmt(s)] for d, r, s in sweep.rows])


# -- run-directory persistence ---------------------------------------------------

def save_run_dir(result: BacktestResult, path: str) -> None:
    """Persist equity.csv, weights.csv, report.csv, and regimes.csv."""
    os.makedirs(path, exist_ok=True)
    write_csv(os.path.join(path, "equity.csv"), ["date", "equity"],
              [[d, fmt(v)] for d, v in zip(result.equity.dates, result.equity.equity)])
    wrows = []
    for t, date in enumerate(result.decision_dates):
        for a, aid in enumerate(result.asset_ids):
            wrows.append([date, aid, fmt(result.weights_history[t, a])])
    write_csv(os.path.join(path, "weights.csv"), ["date", "asset_id", "weight"], wrows)
    reports = [("overall", result.overall)]
    reports.extend((rg, result.per_regime[rg]) for rg in REGIMES
                   if rg in result.per_regime)
    write_report_csv(reports, os.path.join(path, "report.csv"))
    write_csv(os.path.join(path, "regimes.csv"), ["date", "label"],
              [[d, lab or ""] for d, lab in zip(result.return_dates,
                                                result.regime_labels)])
