"""Factor validity statistics, screening, and the linear multi-factor baseline.

The information coefficient is the Pearson correlation between a factor's
value on day t and the return realized on day t+1; Rank IC is the same
correlation on midranks.  Alignment is the caller's job: both functions take
already-shifted forward returns.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import (
    InsufficientData,
    LengthMismatch,
    NoFactorsSurvive,
    RankDeficient,
    ZeroVariance,
)
from .marketdata import FactorPanel
from .util import fmt, midranks, write_csv


def information_coefficient(factor: np.ndarray, fwd_returns: np.ndarray) -> float:
    """Pearson correlation between factor values and next-day returns.

    Raises:
        LengthMismatch: unequal lengths or fewer than 3 points.
        ZeroVariance: either input is constant.
    """
    x = np.asarray(factor, dtype=float).ravel()
    y = np.asarray(fwd_returns, dtype=float).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"factor has {x.size} points, returns {y.size}")
    if x.size < 3:
        raise LengthMismatch("need at least 3 observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.dot(xc, xc))
    sy = float(np.dot(yc, yc))
    if sx <= 0.0 or sy <= 0.0:
        raise ZeroVariance("inputs to IC must have nonzero variance")
    return float(np.dot(xc, yc) / np.sqrt(sx * sy))


def rank_ic(factor: np.ndarray, fwd_returns: np.ndarray) -> float:
    """Spearman correlation: Pearson on midrank-transformed inputs."""
    x = np.asarray(factor, dtype=float).ravel()
    y = np.asarray(fwd_returns, dtype=float).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"factor has {x.size} points, returns {y.size}")
    return information_coefficient(midranks(x), midranks(y))


@dataclass
class FactorStats:
    """Per-factor IC / Rank IC plus the factor-factor correlation matrix."""

    factor_names: Tuple[str, ...]
    ic: np.ndarray
    rank_ic: np.ndarray
    pairwise_corr: np.ndarray


@dataclass
class ScreenConfig:
    min_abs_ic: float = 0.02
    max_pairwise_corr: float = 0.8

    def __post_init__(self):
        if not 0.0 <= self.min_abs_ic <= 1.0:
            raise ValueError("min_abs_ic must be in [0, 1]")
        if not 0.0 < self.max_pairwise_corr < 1.0:
            raise ValueError("max_pairwise_corr must be in (0, 1)")


def factor_stats(panel: FactorPanel, fwd_returns: np.ndarray) -> FactorStats:
    """ICs and pairwise correlations pooled over all (day, asset) cells."""
    fwd = np.asarray(fwd_returns, dtype=float)
    cols = panel.values.reshape(-1, panel.n_factors)
    y = fwd.ravel()
    if cols.shape[0] != y.size:
        raise LengthMismatch("factor panel and forward returns are not aligned")
    ics = np.array([information_coefficient(cols[:, j], y)
                    for j in range(panel.n_factors)])
    rics = np.array([rank_ic(cols[:, j], y) for j in range(panel.n_factors)])
    corr = np.atleast_2d(np.corrcoef(cols, rowvar=False))
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return FactorStats(tuple(panel.factor_names), ics, rics, corr)


def screen_factors(
    panel: FactorPanel,
    fwd_returns: np.ndarray,
    cfg: ScreenConfig = ScreenConfig(),
) -> Tuple[List[str], FactorStats]:
    """Drop weak and redundant factors.

    A factor is dropped when |IC| < min_abs_ic.  Among any surviving pair
    with |pairwise correlation| > max_pairwise_corr, the one with the smaller
    |IC| is dropped (equal |IC|: the later name in the factor ordering goes).
    Survivors keep their original order.

    Raises:
        NoFactorsSurvive: nothing passes the thresholds.
    """
    stats = factor_stats(panel, fwd_returns)
    abs_ic = np.abs(stats.ic)
    kept = [j for j in range(panel.n_factors) if abs_ic[j] >= cfg.min_abs_ic]

    while True:
        worst, worst_corr = None, cfg.max_pairwise_corr
        for ai in range(len(kept)):
            for bi in range(ai + 1, len(kept)):
                c = abs(stats.pairwise_corr[kept[ai], kept[bi]])
                if c > worst_corr:
                    worst, worst_corr = (kept[ai], kept[bi]), c
        if worst is None:
            break
        i, j = worst  # i precedes j in factor order
        if abs_ic[i] > abs_ic[j]:
            kept.remove(j)
        elif abs_ic[j] > abs_ic[i]:
            kept.remove(i)
        else:
            kept.remove(j)
    if not kept:
        raise NoFactorsSurvive("screening removed every factor; relax thresholds "
                               "or check the data")
    return [panel.factor_names[j] for j in kept], stats


@dataclass
class LinearModel:
    """OLS fit of returns on factors with an intercept."""

    alpha: float
    betas: np.ndarray
    residuals: np.ndarray
    factor_names: Tuple[str, ...]


def fit_ols(panel: FactorPanel, returns: np.ndarray,
            fit_range: Tuple[int, int]) -> LinearModel:
    """Least squares of pooled returns on pooled factor values over fit_range.

    ``returns`` must be (days, assets) aligned with the panel calendar; the
    caller decides the horizon by shifting.  Solved via SVD-backed lstsq, not
    normal equations.

    Raises:
        InsufficientData: fewer pooled rows than coefficients + 1.
        RankDeficient: collinear design; the message names offending columns.
    """
    lo, hi = fit_range
    f = panel.n_factors
    x = panel.values[lo:hi].reshape(-1, f)
    y = np.asarray(returns, dtype=float)[lo:hi].reshape(-1)
    if x.shape[0] != y.size:
        raise LengthMismatch("returns are not aligned with the factor panel")
    if x.shape[0] <= f + 1:
        raise InsufficientData(f"need more than {f + 1} rows to fit {f} factors")

    design = np.column_stack([np.ones(len(y)), x])
    coef, _, rank, sv = np.linalg.lstsq(design, y, rcond=None)
    if rank < f + 1:
        # Identify columns implicated in the null space of the design.
        _, _, vt = np.linalg.svd(design, full_matrices=False)
        null = vt[rank:]
        bad = sorted({("intercept" if k == 0 else panel.factor_names[k - 1])
                      for row in null for k in np.flatnonzero(np.abs(row) > 1e-8)})
        raise RankDeficient(f"collinear design columns: {', '.join(bad)}")

    residuals = y - design @ coef
    return LinearModel(float(coef[0]), coef[1:].copy(), residuals,
                       tuple(panel.factor_names))


def predict_linear(model: LinearModel, factors: np.ndarray) -> float:
    """alpha + beta . factors for one day's factor vector.

    Raises:
        LengthMismatch: vector length differs from the number of betas.
    """
    vec = np.asarray(factors, dtype=float).ravel()
    if vec.size != model.betas.size:
        raise LengthMismatch(f"expected {model.betas.size} factors, got {vec.size}")
    return float(model.alpha + vec @ model.betas)


# -- report output --------------------------------------------------------------

def write_factor_report(stats: FactorStats, selected: Sequence[str], path: str) -> None:
    """CSV report: factor,ic,rank_ic,selected."""
    chosen = set(selected)
    rows = [[name, fmt(stats.ic[j]), fmt(stats.rank_ic[j]),
             "true" if name in chosen else "false"]
            for j, name in enumerate(stats.factor_names)]
    write_csv(path, ["factor", "ic", "rank_ic", "selected"], rows)


def write_corr_matrix(stats: FactorStats, path: str) -> None:
    """Square correlation matrix CSV with a leading name column."""
    header = ["factor", *stats.factor_names]
    rows = [[name, *(fmt(v) for v in stats.pairwise_corr[j])]
            for j, name in enumerate(stats.factor_names)]
    write_csv(path, header, rows)
