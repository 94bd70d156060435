"""factorbt: multi-factor research with a linear baseline and an LSTM model.

The pipeline: load or synthesize a market panel, clean it, derive the
five-factor panel, screen factors by IC and pairwise correlation, fit the
linear baseline or train the LSTM, and evaluate both in a risk-constrained
walk-forward backtest segmented by market regime.
"""

from .backtest import (
    BacktestConfig,
    BacktestResult,
    ComparisonTable,
    SweepResult,
    apply_risk_constraints,
    classify_regimes,
    compare_models,
    construct_portfolio,
    format_overall_metrics,
    format_regime_metrics,
    optimization_sweep,
    save_run_dir,
    walk_forward,
    write_sweep_csv,
)
from .errors import FactorbtError
from .factors import (
    FactorStats,
    LinearModel,
    ScreenConfig,
    factor_stats,
    fit_ols,
    information_coefficient,
    predict_linear,
    rank_ic,
    screen_factors,
)
from .lstm import (
    LstmParams,
    LstmState,
    Sample,
    TrainConfig,
    backward,
    forward,
    grad_check,
    init_params,
    load_params,
    make_windows,
    mse_loss,
    save_params,
    train,
)
from .marketdata import (
    FACTOR_NAMES,
    CleanPolicy,
    FactorPanel,
    MarketPanel,
    PriceSeries,
    ReturnSeries,
    clean,
    compute_factors,
    load_market_csv,
    log_returns,
    panel_log_returns,
    standardize,
    write_index_csv,
    write_prices_csv,
)
from .risk import (
    EquityCurve,
    RiskReport,
    format_report_row,
    max_drawdown,
    risk_report,
    sharpe,
    var_historical,
    write_report_csv,
)
from .synth import (
    Loadings,
    RegimeSpec,
    SynthConfig,
    default_config,
    synth_config_from_dict,
    synth_generate,
)

__version__ = "0.1.0"
