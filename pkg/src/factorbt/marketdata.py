"""Daily market panels: validation, cleaning, log returns, and the factor set.

A :class:`MarketPanel` holds aligned close/volume/fundamental matrices for a
universe of assets plus market and industry index levels, all on a shared
trading-day calendar (ISO-8601 strings on the wire, integer positions
internally).  :func:`clean` enforces the missing-value and outlier policy,
:func:`compute_factors` derives the five-factor panel consumed by the models,
and :func:`standardize` z-scores factors using fit-window statistics only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    AllMissingColumn,
    EmptySeries,
    InvalidConfig,
    MissingFundamental,
    NonPositivePrice,
    TooShort,
    ZeroVarianceFactor,
)
from .util import fmt, write_csv

#: Canonical factor ordering used everywhere downstream.
FACTOR_NAMES = ("market_return", "industry_return", "pe_ratio", "pb_ratio", "log_volume")


@dataclass
class PriceSeries:
    """One asset's (or index's) daily close and volume history."""

    asset_id: str
    dates: List[str]
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        self.close = np.asarray(self.close, dtype=float)
        self.volume = np.asarray(self.volume, dtype=float)
        if not (len(self.dates) == len(self.close) == len(self.volume)):
            raise InvalidConfig(f"{self.asset_id}: dates/close/volume lengths differ")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidConfig(f"{self.asset_id}: dates must be strictly increasing")
        if np.any(~np.isfinite(self.close)) or np.any(self.close <= 0.0):
            raise NonPositivePrice(f"{self.asset_id}: close prices must be finite and > 0")
        if np.any(~np.isfinite(self.volume)) or np.any(self.volume < 0.0):
            raise InvalidConfig(f"{self.asset_id}: volumes must be finite and >= 0")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass
class ReturnSeries:
    """Daily log returns derived from a :class:`PriceSeries`."""

    asset_id: str
    dates: List[str]
    returns: np.ndarray


@dataclass
class CleanPolicy:
    """Cleaning rules: MAD-multiple winsorization plus interpolation edges.

    Interior gaps are linearly interpolated, trailing gaps forward-filled,
    leading gaps drop the whole panel row.  Values beyond median +/- mad_k*MAD
    are clipped to the boundary.
    """

    mad_k: float = 5.0

    def __post_init__(self):
        if not self.mad_k > 0:
            raise InvalidConfig("mad_k must be > 0")


def log_returns(prices: PriceSeries) -> ReturnSeries:
    """Daily log returns: ``r[t] = ln(close[t+1] / close[t])``.

    Raises:
        EmptySeries: fewer than two observations.
        NonPositivePrice: any close <= 0.
    """
    close = np.asarray(prices.close, dtype=float)
    if close.size < 2:
        raise EmptySeries(f"{prices.asset_id}: need at least 2 closes for returns")
    if np.any(close <= 0.0):
        raise NonPositivePrice(f"{prices.asset_id}: close prices must be > 0")
    r = np.log(close[1:] / close[:-1])
    return ReturnSeries(prices.asset_id, list(prices.dates[1:]), r)


def _log_returns_matrix(close: np.ndarray) -> np.ndarray:
    if np.any(close <= 0.0):
        raise NonPositivePrice("close prices must be > 0")
    return np.log(close[1:] / close[:-1])


@dataclass
class MarketPanel:
    """Aligned daily data for a universe of assets plus market/industry indices.

    Shapes: ``close``, ``volume``, ``pe``, ``pb`` are (days, assets);
    ``market_index`` is (days,); ``industry_index`` maps industry name to a
    (days,) close vector.  ``industry_of`` assigns each asset an industry; when
    empty, every asset falls back to the market index for its industry factor.
    Missing values are NaN until :func:`clean` has run.
    """

    calendar: List[str]
    asset_ids: List[str]
    close: np.ndarray
    volume: np.ndarray
    pe: Optional[np.ndarray]
    pb: Optional[np.ndarray]
    market_index: np.ndarray
    industry_index: Dict[str, np.ndarray] = field(default_factory=dict)
    industry_of: Dict[str, str] = field(default_factory=dict)
    truth: Optional[object] = None  # planted ground truth when synthesized

    @property
    def n_days(self) -> int:
        return len(self.calendar)

    @property
    def n_assets(self) -> int:
        return len(self.asset_ids)

    def asset_series(self, asset_id: str) -> PriceSeries:
        a = self.asset_ids.index(asset_id)
        return PriceSeries(asset_id, list(self.calendar), self.close[:, a], self.volume[:, a])

    def market_series(self) -> PriceSeries:
        return PriceSeries("MARKET", list(self.calendar),
                           self.market_index, np.zeros(self.n_days))

    def _columns(self):
        """Yield (name, 1-D column view) for every numeric column."""
        for a, aid in enumerate(self.asset_ids):
            yield f"close[{aid}]", self.close[:, a]
            yield f"volume[{aid}]", self.volume[:, a]
            if self.pe is not None:
                yield f"pe_ratio[{aid}]", self.pe[:, a]
            if self.pb is not None:
                yield f"pb_ratio[{aid}]", self.pb[:, a]
        yield "index[MARKET]", self.market_index
        for name in sorted(self.industry_index):
            yield f"index[INDUSTRY:{name}]", self.industry_index[name]

    def validate(self) -> None:
        """Check the post-clean invariants: aligned, gap-free, positive closes."""
        if any(a >= b for a, b in zip(self.calendar, self.calendar[1:])):
            raise InvalidConfig("calendar must be strictly increasing")
        d = self.n_days
        for name, col in self._columns():
            if len(col) != d:
                raise InvalidConfig(f"{name}: length {len(col)} != calendar length {d}")
            if np.any(~np.isfinite(col)):
                raise InvalidConfig(f"{name}: missing values remain after cleaning")
        if np.any(self.close <= 0.0) or np.any(self.market_index <= 0.0):
            raise NonPositivePrice("panel contains non-positive close prices")


def _fill_column(col: np.ndarray) -> Tuple[np.ndarray, int]:
    """Interpolate interior gaps, forward-fill trailing gaps.

    Returns the filled column and the index of the first observed value;
    entries before it stay NaN so the caller can drop those rows.
    """
    obs = np.flatnonzero(np.isfinite(col))
    if obs.size == 0:
        raise AllMissingColumn("column has no observed values")
    filled = np.interp(np.arange(len(col), dtype=float), obs.astype(float), col[obs])
    filled[: obs[0]] = np.nan
    return filled, int(obs[0])


def _winsorize(col: np.ndarray, k: float) -> np.ndarray:
    med = float(np.median(col))
    mad = float(np.median(np.abs(col - med)))
    return np.clip(col, med - k * mad, med + k * mad)


def clean(panel: MarketPanel, policy: CleanPolicy = CleanPolicy()) -> MarketPanel:
    """Apply the missing-value and outlier policy; returns a new panel.

    Interior gaps are linearly interpolated and trailing gaps forward-filled
    per column.  Days on which any column is still missing (leading gaps) are
    dropped for the whole panel.  Each column is then winsorized at
    median +/- mad_k*MAD.  The result satisfies :meth:`MarketPanel.validate`
    and the operation is idempotent.

    Raises:
        AllMissingColumn: some column has zero observed values.
    """
    if panel.n_days == 0 or panel.n_assets == 0:
        raise EmptySeries("panel is empty")

    out = replace(
        panel,
        calendar=list(panel.calendar),
        close=panel.close.astype(float).copy(),
        volume=panel.volume.astype(float).copy(),
        pe=None if panel.pe is None else panel.pe.astype(float).copy(),
        pb=None if panel.pb is None else panel.pb.astype(float).copy(),
        market_index=panel.market_index.astype(float).copy(),
        industry_index={k: v.astype(float).copy() for k, v in panel.industry_index.items()},
    )

    head = 0
    for name, col in out._columns():
        try:
            filled, first = _fill_column(col)
        except AllMissingColumn:
            raise AllMissingColumn(name)
        col[:] = filled
        head = max(head, first)

    if head > 0:
        out.calendar = out.calendar[head:]
        out.close = out.close[head:]
        out.volume = out.volume[head:]
        out.pe = None if out.pe is None else out.pe[head:]
        out.pb = None if out.pb is None else out.pb[head:]
        out.market_index = out.market_index[head:]
        out.industry_index = {k: v[head:] for k, v in out.industry_index.items()}

    for _, col in out._columns():
        col[:] = _winsorize(col, policy.mad_k)

    out.validate()
    return out


def panel_log_returns(panel: MarketPanel) -> np.ndarray:
    """(days-1, assets) matrix of per-asset daily log returns."""
    return _log_returns_matrix(panel.close)


@dataclass
class FactorPanel:
    """Per-day, per-asset factor matrix on the return-date calendar.

    ``values`` has shape (days, assets, factors) where day t carries the
    factors observable at return date t.
    """

    factor_names: Tuple[str, ...]
    values: np.ndarray
    calendar: List[str]
    asset_ids: List[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(set(self.factor_names)) != len(self.factor_names):
            raise InvalidConfig("factor names must be unique")
        expected = (len(self.calendar), len(self.asset_ids), len(self.factor_names))
        if self.values.shape != expected:
            raise InvalidConfig(
                f"factor values shape {self.values.shape} != {expected}")

    @property
    def n_days(self) -> int:
        return len(self.calendar)

    @property
    def n_factors(self) -> int:
        return len(self.factor_names)

    def column(self, name: str) -> np.ndarray:
        """(days, assets) values of one factor."""
        return self.values[:, :, self.factor_names.index(name)]

    def select(self, names: Sequence[str]) -> "FactorPanel":
        idx = [self.factor_names.index(n) for n in names]
        return FactorPanel(tuple(names), self.values[:, :, idx],
                           list(self.calendar), list(self.asset_ids))

    def slice_days(self, lo: int, hi: int) -> "FactorPanel":
        return FactorPanel(self.factor_names, self.values[lo:hi],
                           list(self.calendar[lo:hi]), list(self.asset_ids))


def compute_factors(panel: MarketPanel) -> FactorPanel:
    """Derive the five-factor panel from a cleaned market panel.

    Factors per asset-day: market index log return, industry index log
    return, P/E ratio, P/B ratio, and log(1+volume).  The factor calendar is
    the panel's return-date calendar (one day shorter than the price
    calendar); fundamentals and volume are taken on the return date itself.

    Raises:
        MissingFundamental: the panel lacks a P/E or P/B matrix.
    """
    if panel.pe is None:
        raise MissingFundamental("panel lacks pe_ratio data")
    if panel.pb is None:
        raise MissingFundamental("panel lacks pb_ratio data")
    d, a = panel.close.shape
    if d < 2:
        raise EmptySeries("need at least 2 days to compute return factors")

    mkt_ret = _log_returns_matrix(panel.market_index)
    ind_ret = np.empty((d - 1, a))
    ind_returns = {name: _log_returns_matrix(series)
                   for name, series in panel.industry_index.items()}
    for j, aid in enumerate(panel.asset_ids):
        industry = panel.industry_of.get(aid)
        if industry is not None and industry in ind_returns:
            ind_ret[:, j] = ind_returns[industry]
        elif len(ind_returns) == 1:
            ind_ret[:, j] = next(iter(ind_returns.values()))
        else:
            # No usable industry index: fall back to the market index; the
            # duplicated factor is removed later by correlation screening.
            ind_ret[:, j] = mkt_ret

    values = np.empty((d - 1, a, len(FACTOR_NAMES)))
    values[:, :, 0] = mkt_ret[:, None]
    values[:, :, 1] = ind_ret
    values[:, :, 2] = panel.pe[1:]
    values[:, :, 3] = panel.pb[1:]
    values[:, :, 4] = np.log1p(panel.volume[1:])
    return FactorPanel(FACTOR_NAMES, values, list(panel.calendar[1:]), list(panel.asset_ids))


def standardize(panel: FactorPanel, fit_range: Tuple[int, int]) -> FactorPanel:
    """Z-score each factor using mean/std estimated over ``fit_range`` only.

    ``fit_range`` is a half-open (start, stop) day-index interval.  The fitted
    statistics are applied to every day so out-of-range days carry no
    information into the transform (no look-ahead).  Population (N) standard
    deviation is used.

    Raises:
        ZeroVarianceFactor: a factor has std < 1e-12 over the fit range; drop
            it upstream before standardizing.
    """
    lo, hi = fit_range
    if hi - lo < 2:
        raise TooShort("fit_range must contain at least 2 days")
    window = panel.values[lo:hi]
    mean = window.reshape(-1, panel.n_factors).mean(axis=0)
    std = window.reshape(-1, panel.n_factors).std(axis=0)  # population
    dead = [name for name, s in zip(panel.factor_names, std) if s < 1e-12]
    if dead:
        raise ZeroVarianceFactor(", ".join(dead))
    z = (panel.values - mean) / std
    return FactorPanel(panel.factor_names, z, list(panel.calendar), list(panel.asset_ids))


# -- CSV interchange ----------------------------------------------------------

PRICES_HEADER = ["date", "asset_id", "close", "volume", "pe_ratio", "pb_ratio"]
INDEX_HEADER = ["date", "index_id", "close"]


def write_prices_csv(panel: MarketPanel, path: str) -> None:
    """One row per asset-day; missing values become empty fields."""
    def cell(x: float) -> str:
        return "" if not np.isfinite(x) else fmt(x)

    rows = []
    for t, date in enumerate(panel.calendar):
        for a, aid in enumerate(panel.asset_ids):
            pe = panel.pe[t, a] if panel.pe is not None else np.nan
            pb = panel.pb[t, a] if panel.pb is not None else np.nan
            rows.append([date, aid, cell(panel.close[t, a]), cell(panel.volume[t, a]),
                         cell(pe), cell(pb)])
    write_csv(path, PRICES_HEADER, rows)


def write_index_csv(panel: MarketPanel, path: str) -> None:
    def cell(x: float) -> str:
        return "" if not np.isfinite(x) else fmt(x)

    rows = []
    for t, date in enumerate(panel.calendar):
        rows.append([date, "MARKET", cell(panel.market_index[t])])
        for name in sorted(panel.industry_index):
            rows.append([date, f"INDUSTRY:{name}", cell(panel.industry_index[name][t])])
    write_csv(path, INDEX_HEADER, rows)


def _parse_cell(text: str) -> float:
    return np.nan if text == "" else float(text)


def load_market_csv(prices_path: str, index_path: str) -> MarketPanel:
    """Build a raw (uncleaned) panel from the prices and index CSV files.

    The calendar is the sorted union of all dates seen; cells absent from the
    files stay NaN and are handled by :func:`clean`.  Exactly one industry
    index may be present (the CSV format carries no per-asset industry
    mapping); all assets are assigned to it.
    """
    with open(prices_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != PRICES_HEADER:
            raise InvalidConfig(f"prices CSV header must be {','.join(PRICES_HEADER)}")
        price_rows = [row for row in reader if row]
    with open(index_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != INDEX_HEADER:
            raise InvalidConfig(f"index CSV header must be {','.join(INDEX_HEADER)}")
        index_rows = [row for row in reader if row]

    dates = sorted({r[0] for r in price_rows} | {r[0] for r in index_rows})
    asset_ids = sorted({r[1] for r in price_rows})
    day_pos = {d: i for i, d in enumerate(dates)}
    asset_pos = {a: i for i, a in enumerate(asset_ids)}
    d, a = len(dates), len(asset_ids)

    close = np.full((d, a), np.nan)
    volume = np.full((d, a), np.nan)
    pe = np.full((d, a), np.nan)
    pb = np.full((d, a), np.nan)
    for date, aid, c, v, p_e, p_b in price_rows:
        t, j = day_pos[date], asset_pos[aid]
        close[t, j] = _parse_cell(c)
        volume[t, j] = _parse_cell(v)
        pe[t, j] = _parse_cell(p_e)
        pb[t, j] = _parse_cell(p_b)
    if np.any(close <= 0.0):
        raise NonPositivePrice("prices CSV contains non-positive closes")

    market = np.full(d, np.nan)
    industries: Dict[str, np.ndarray] = {}
    for date, index_id, c in index_rows:
        t = day_pos[date]
        if index_id == "MARKET":
            market[t] = _parse_cell(c)
        elif index_id.startswith("INDUSTRY:"):
            name = index_id.split(":", 1)[1]
            industries.setdefault(name, np.full(d, np.nan))[t] = _parse_cell(c)
        else:
            raise InvalidConfig(f"unknown index_id {index_id!r}")
    if np.all(~np.isfinite(market)):
        raise InvalidConfig("index CSV contains no MARKET rows")
    if len(industries) > 1:
        raise InvalidConfig("prices CSV carries no industry mapping; at most one "
                            "INDUSTRY index is supported when loading from CSV")

    industry_of = {aid: next(iter(industries)) for aid in asset_ids} if industries else {}
    return MarketPanel(dates, asset_ids, close, volume, pe, pb, market,
                       industries, industry_of)
