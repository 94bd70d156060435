"""Seeded synthetic market panels with a planted factor-return signal.

The generator builds a regime-switching market index, an industry index, and
per-asset fundamentals/volumes, then plants asset returns as a known function
of the previous day's factors:

    r[t+1] = alpha + sum_i beta_i * F_i[t]
             + c_nl * tanh(mkt_ret[t]/scale) * tanh(log_volume[t] - center)
             + c_mom * trailing_mean(mkt_ret[t]) / scale
             + noise * eps[t+1]

All draws come from one ``numpy`` generator seeded by the caller, so a panel
is a pure function of (config, seed).  The exact factor matrix and planted
returns are retained on ``panel.truth`` for tests.

Noise draws are clipped at a few sigmas so that the default MAD winsorization
in :func:`factorbt.marketdata.clean` leaves well-formed panels untouched.
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import InvalidConfig
from .marketdata import FACTOR_NAMES, FactorPanel, MarketPanel

REGIME_KINDS = ("bull", "bear", "shock")


@dataclass(frozen=True)
class RegimeSpec:
    """One block of the regime schedule: daily drift/vol of the market index."""

    kind: str
    length: int
    drift: float
    vol: float


@dataclass(frozen=True)
class Loadings:
    """Planted mapping from day-t factors to the day-t+1 asset return."""

    alpha: float = 0.0
    betas: Dict[str, float] = field(default_factory=dict)
    nonlinear: float = 0.0
    momentum: float = 0.0
    momentum_window: int = 5


@dataclass(frozen=True)
class SynthConfig:
    assets: int = 16
    days: int = 1100
    regimes: Tuple[RegimeSpec, ...] = ()
    loadings: Loadings = Loadings()
    noise: float = 0.006
    price_base: float = 100.0
    volume_base: float = 1.0e6
    pe_base: float = 18.0
    pb_base: float = 2.5
    mkt_scale: float = 0.01
    industry: str = "tech"
    industry_beta: float = 0.5
    clip_sigmas: float = 2.5

    def validate(self) -> None:
        if self.assets < 1 or self.days < 2:
            raise InvalidConfig("assets must be >= 1 and days >= 2")
        if not self.regimes:
            raise InvalidConfig("at least one regime block is required")
        for r in self.regimes:
            if r.kind not in REGIME_KINDS:
                raise InvalidConfig(f"unknown regime kind {r.kind!r}")
            if r.length < 1 or r.vol < 0:
                raise InvalidConfig("regime length must be >= 1 and vol >= 0")
        if self.noise < 0:
            raise InvalidConfig("noise must be >= 0")
        for name in self.loadings.betas:
            if name not in FACTOR_NAMES:
                raise InvalidConfig(f"unknown factor in loadings: {name!r}")
        if self.loadings.momentum_window < 1:
            raise InvalidConfig("momentum_window must be >= 1")


@dataclass
class SynthTruth:
    """Ground truth retained for tests: exact factors and planted returns."""

    factor_names: Tuple[str, ...]
    factor_values: np.ndarray      # (days-1, assets, factors)
    asset_log_returns: np.ndarray  # (days-1, assets)
    regime_kinds: List[str]        # per return date
    config: SynthConfig
    seed: int

    def factor_panel(self, calendar: List[str], asset_ids: List[str]) -> FactorPanel:
        return FactorPanel(self.factor_names, self.factor_values.copy(),
                           list(calendar), list(asset_ids))


def default_config() -> SynthConfig:
    """A five-year-ish panel crossing bull, shock, and bear phases.

    The planted signal mixes a linear momentum-style term, a nonlinear
    factor interaction no linear regression can express, and a trailing
    market-return average that rewards models with memory.
    """
    # The volume loading acts on the raw log(1+volume) level (~13.8 around
    # the 1e6 base); the alpha offset cancels that constant so the planted
    # daily drift stays at 3 bps.
    vol_beta = -0.0008
    vol_center = float(np.log1p(1.0e6))
    return SynthConfig(
        assets=16,
        days=1100,
        regimes=(
            RegimeSpec("bull", 280, 0.0028, 0.009),
            RegimeSpec("shock", 260, 0.0, 0.020),
            RegimeSpec("bear", 280, -0.0028, 0.016),
            RegimeSpec("bull", 280, 0.0022, 0.011),
        ),
        loadings=Loadings(
            alpha=0.0003 - vol_beta * vol_center,
            betas={"market_return": 0.35, "industry_return": -0.30,
                   "log_volume": vol_beta},
            nonlinear=0.010,
            momentum=0.006,
            momentum_window=5,
        ),
        noise=0.006,
    )


def _trading_dates(n: int, start: _dt.date = _dt.date(2016, 1, 4)) -> List[str]:
    """n consecutive weekdays as ISO strings."""
    out, day = [], start
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day.isoformat())
        day += _dt.timedelta(days=1)
    return out


def _regime_arrays(cfg: SynthConfig, n_returns: int):
    """Per-return-date (kind, drift, vol); the schedule cycles if short."""
    kinds, drifts, vols = [], [], []
    while len(kinds) < n_returns:
        for r in cfg.regimes:
            take = min(r.length, n_returns - len(kinds))
            kinds.extend([r.kind] * take)
            drifts.extend([r.drift] * take)
            vols.extend([r.vol] * take)
            if len(kinds) >= n_returns:
                break
    return kinds, np.array(drifts), np.array(vols)


def _trailing_mean(x: np.ndarray, window: int) -> np.ndarray:
    """out[i] = mean(x[max(0, i-window+1) .. i])."""
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(len(x))
    lo = np.maximum(idx - window + 1, 0)
    return (c[idx + 1] - c[lo]) / (idx + 1 - lo)


def synth_generate(cfg: SynthConfig, seed: int) -> MarketPanel:
    """Generate a deterministic panel embedding the configured signal.

    Raises:
        InvalidConfig: non-positive counts or volatilities, unknown factor
            names in the loadings, or an empty regime schedule.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    d, a = cfg.days, cfg.assets
    m = d - 1  # return dates
    clip = cfg.clip_sigmas
    kinds, drift, vol = _regime_arrays(cfg, m)

    # Index levels from regime-scheduled log returns.
    mkt_log = drift + vol * np.clip(rng.standard_normal(m), -clip, clip)
    ind_log = cfg.industry_beta * mkt_log + vol * np.clip(rng.standard_normal(m), -clip, clip)
    mkt_close = cfg.price_base * np.exp(np.concatenate([[0.0], np.cumsum(mkt_log)]))
    ind_close = cfg.price_base * np.exp(np.concatenate([[0.0], np.cumsum(ind_log)]))

    # Bounded fundamental and volume processes (winsorization-safe).
    volume = np.round(cfg.volume_base * np.exp(rng.uniform(-1.0, 1.0, (d, a))))
    pe = cfg.pe_base * np.exp(rng.uniform(-0.5, 0.5, (d, a)))
    pb = cfg.pb_base * np.exp(rng.uniform(-0.5, 0.5, (d, a)))
    eps = cfg.noise * np.clip(rng.standard_normal((m, a)), -clip, clip)

    # Factor record, computed exactly as compute_factors() will see it.
    mkt_ret = np.log(mkt_close[1:] / mkt_close[:-1])
    ind_ret = np.log(ind_close[1:] / ind_close[:-1])
    factors = np.empty((m, a, len(FACTOR_NAMES)))
    factors[:, :, 0] = mkt_ret[:, None]
    factors[:, :, 1] = ind_ret[:, None]
    factors[:, :, 2] = pe[1:]
    factors[:, :, 3] = pb[1:]
    factors[:, :, 4] = np.log1p(volume[1:])

    # Planted returns: r[i] responds to factors at return date i-1.
    ld = cfg.loadings
    lin = np.zeros((m, a))
    for name, beta in ld.betas.items():
        lin += beta * factors[:, :, FACTOR_NAMES.index(name)]
    u_mkt = np.tanh(mkt_ret / cfg.mkt_scale)
    u_vol = np.tanh(factors[:, :, 4] - np.log1p(cfg.volume_base))
    interact = ld.nonlinear * u_mkt[:, None] * u_vol
    mom = ld.momentum * _trailing_mean(mkt_ret, ld.momentum_window) / cfg.mkt_scale

    returns = np.empty((m, a))
    returns[0] = ld.alpha + eps[0]
    returns[1:] = ld.alpha + lin[:-1] + interact[:-1] + mom[:-1, None] + eps[1:]

    close = cfg.price_base * np.exp(
        np.concatenate([np.zeros((1, a)), np.cumsum(returns, axis=0)]))

    calendar = _trading_dates(d)
    asset_ids = [f"A{j:03d}" for j in range(a)]
    truth = SynthTruth(FACTOR_NAMES, factors, returns, kinds, cfg, seed)
    return MarketPanel(
        calendar=calendar,
        asset_ids=asset_ids,
        close=close,
        volume=volume,
        pe=pe,
        pb=pb,
        market_index=mkt_close,
        industry_index={cfg.industry: ind_close},
        industry_of={aid: cfg.industry for aid in asset_ids},
        truth=truth,
    )


# -- JSON config interchange ---------------------------------------------------

def _require_keys(obj: dict, allowed: set, context: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise InvalidConfig(f"unknown key(s) in {context}: {', '.join(sorted(unknown))}")


def synth_config_from_dict(obj: dict) -> SynthConfig:
    """Parse the synth section of a run config; unknown keys are rejected.

    The ``seed`` key is allowed here (the CLI reads it) but is not part of
    the returned config; generation takes the seed as a separate argument.
    """
    _require_keys(obj, {"assets", "days", "seed", "regimes", "loadings", "noise"},
                  "synth config")
    regimes = []
    for r in obj.get("regimes", []):
        _require_keys(r, {"kind", "length", "drift", "vol"}, "regime")
        regimes.append(RegimeSpec(str(r["kind"]), int(r["length"]),
                                  float(r["drift"]), float(r["vol"])))
    ld = obj.get("loadings", {})
    _require_keys(ld, {"alpha", "betas", "nonlinear", "momentum", "momentum_window"},
                  "loadings")
    loadings = Loadings(
        alpha=float(ld.get("alpha", 0.0)),
        betas={str(k): float(v) for k, v in ld.get("betas", {}).items()},
        nonlinear=float(ld.get("nonlinear", 0.0)),
        momentum=float(ld.get("momentum", 0.0)),
        momentum_window=int(ld.get("momentum_window", 5)),
    )
    base = default_config()
    cfg = SynthConfig(
        assets=int(obj.get("assets", base.assets)),
        days=int(obj.get("days", base.days)),
        regimes=tuple(regimes) if regimes else base.regimes,
        loadings=loadings if ("loadings" in obj) else base.loadings,
        noise=float(obj.get("noise", base.noise)),
    )
    cfg.validate()
    return cfg
