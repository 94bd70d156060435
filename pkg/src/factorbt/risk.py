"""Risk-control metrics: maximum drawdown, Sharpe ratio, historical VaR.

Conventions pinned here so every oracle is unambiguous: Sharpe and
volatility use the sample (N-1) standard deviation and 252 periods per year;
VaR is the signed k-th smallest daily return with k = ceil((1-confidence)*N)
and no interpolation; drawdown is measured on the compounded equity curve.
Return series passed to :func:`risk_report` are daily log returns.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidConfig, TooFewObservations, ZeroVolatility
from .util import ceil_count, fmt, write_csv


@dataclass
class EquityCurve:
    """Portfolio value per day, normalized to start at 1.0."""

    dates: List[str]
    equity: np.ndarray

    def __post_init__(self):
        self.equity = np.asarray(self.equity, dtype=float)
        if len(self.dates) != self.equity.size:
            raise InvalidConfig("dates and equity lengths differ")
        if self.equity.size == 0 or abs(self.equity[0] - 1.0) > 1e-12:
            raise InvalidConfig("equity curves start at 1.0")
        if np.any(self.equity <= 0.0):
            raise InvalidConfig("equity must stay positive")


@dataclass
class RiskReport:
    """The six headline metrics computed from one daily return series."""

    max_drawdown: float
    sharpe: Optional[float]  # absent when the series has zero volatility
    var95: float
    volatility: float
    ann_return: float
    mean_daily_return: float


def max_drawdown(equity: np.ndarray) -> float:
    """Largest peak-to-trough decline as a fraction of the peak; O(n)."""
    eq = np.asarray(equity, dtype=float)
    if eq.size <= 1:
        return 0.0
    peaks = np.maximum.accumulate(eq)
    return float(np.max((peaks - eq) / peaks))


def sharpe(returns: np.ndarray, rf: float = 0.0,
           periods_per_year: int = 252) -> float:
    """Annualized excess return over sample volatility.

    ``rf`` is an annual rate; it is de-annualized by simple division.

    Raises:
        TooFewObservations: fewer than 2 returns.
        ZeroVolatility: constant returns; the ratio is undefined and is never
            silently reported as +/-Inf.
    """
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise TooFewObservations("need at least 2 returns for a Sharpe ratio")
    sd = float(r.std(ddof=1))
    # A constant series leaves rounding dust in the std; scale the zero test.
    if sd <= 1e-12 * max(1.0, abs(float(r.mean()))):
        raise ZeroVolatility("constant returns: Sharpe ratio undefined")
    return float((r.mean() - rf / periods_per_year) / sd * np.sqrt(periods_per_year))


def var_historical(returns: np.ndarray, confidence: float = 0.95) -> float:
    """Signed empirical daily-return quantile (a loss is negative).

    Returns the k-th smallest return with k = ceil((1-confidence)*N).

    Raises:
        TooFewObservations: fewer than 20 returns.
    """
    r = np.asarray(returns, dtype=float)
    if not 0.0 < confidence < 1.0:
        raise InvalidConfig("confidence must be in (0, 1)")
    if r.size < 20:
        raise TooFewObservations("need at least 20 returns for historical VaR")
    k = ceil_count((1.0 - confidence) * r.size)
    return float(np.partition(r, k - 1)[k - 1])


def annualized_volatility(returns: np.ndarray, periods_per_year: int = 252) -> float:
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise TooFewObservations("need at least 2 returns for volatility")
    return float(r.std(ddof=1) * np.sqrt(periods_per_year))


def risk_report(returns: np.ndarray, rf: float = 0.0,
                periods_per_year: int = 252) -> RiskReport:
    """Assemble all six metrics from one series of daily log returns.

    The equity curve is the cumulative product of exp(returns); the geometric
    annualized return is equity_final**(periods/N) - 1.  A zero-volatility
    series yields sharpe=None rather than an error.
    """
    r = np.asarray(returns, dtype=float)
    if r.size < 20:
        raise TooFewObservations("need at least 20 returns for a risk report")
    equity = np.concatenate([[1.0], np.cumprod(np.exp(r))])
    try:
        sr: Optional[float] = sharpe(r, rf, periods_per_year)
    except ZeroVolatility:
        sr = None
    return RiskReport(
        max_drawdown=max_drawdown(equity),
        sharpe=sr,
        var95=var_historical(r, 0.95),
        volatility=float(r.std(ddof=1) * np.sqrt(periods_per_year)),
        ann_return=float(equity[-1] ** (periods_per_year / r.size) - 1.0),
        mean_daily_return=float(r.mean()),
    )


# -- display formatting ----------------------------------------------------------

def pct(x: float, decimals: int) -> str:
    return f"{x * 100.0:.{decimals}f}%"


def format_report_row(mdd: float, sharpe_value: Optional[float], var95: float) -> str:
    """Human-readable metric triplet, e.g. ``8.8% | 0.90 | -1.88%``."""
    s = "n/a" if sharpe_value is None else f"{sharpe_value:.2f}"
    return f"{pct(mdd, 1)} | {s} | {pct(var95, 2)}"


def write_report_csv(rows: Sequence[Tuple[str, RiskReport]], path: str) -> None:
    """One CSV row per strategy/segment; decimals, not display percentages."""
    out = []
    for name, rep in rows:
        out.append([
            name,
            fmt(rep.max_drawdown),
            "" if rep.sharpe is None else fmt(rep.sharpe),
            fmt(rep.var95),
            fmt(rep.volatility),
            fmt(rep.ann_return),
            fmt(rep.mean_daily_return),
        ])
    write_csv(path, ["strategy", "max_drawdown", "sharpe", "var95",
                     "volatility", "ann_return", "mean_daily_return"], out)
