import datetime

import numpy as np
import pytest

import factorbt as fb


def make_dates(n, start=datetime.date(2020, 1, 1)):
    return [(start + datetime.timedelta(days=d)).isoformat() for d in range(n)]


@pytest.fixture(scope="session")
def default_panel():
    """The seed-42 default synthetic panel used by the heavier tests."""
    return fb.synth_generate(fb.default_config(), 42)


@pytest.fixture
def panel_builder():
    """Factory for small hand-built MarketPanels with sensible defaults."""

    def build(close, volume=None, pe=None, pb=None, market=None,
              industry=None, asset_ids=None, calendar=None):
        close = np.asarray(close, dtype=float)
        if close.ndim == 1:
            close = close[:, None]
        d, a = close.shape
        if volume is None:
            volume = np.full((d, a), 1000.0)
        if pe is None:
            pe = np.full((d, a), 15.0)
        if pb is None:
            pb = np.full((d, a), 2.0)
        if market is None:
            market = np.full(d, 100.0)
        if industry is None:
            industry = {"tech": np.full(d, 50.0)}
        if asset_ids is None:
            asset_ids = [f"A{j:03d}" for j in range(a)]
        if calendar is None:
            calendar = make_dates(d)
        return fb.MarketPanel(
            calendar=calendar,
            asset_ids=asset_ids,
            close=np.asarray(close, dtype=float),
            volume=np.asarray(volume, dtype=float),
            pe=np.asarray(pe, dtype=float),
            pb=np.asarray(pb, dtype=float),
            market_index=np.asarray(market, dtype=float),
            industry_index={k: np.asarray(v, dtype=float)
                            for k, v in industry.items()},
            industry_of={aid: next(iter(industry)) for aid in asset_ids},
        )

    return build


def truncate_panel(panel, n_days):
    """First n_days of a panel, for truncate-and-replay experiments."""
    return fb.MarketPanel(
        calendar=list(panel.calendar[:n_days]),
        asset_ids=list(panel.asset_ids),
        close=panel.close[:n_days].copy(),
        volume=panel.volume[:n_days].copy(),
        pe=panel.pe[:n_days].copy(),
        pb=panel.pb[:n_days].copy(),
        market_index=panel.market_index[:n_days].copy(),
        industry_index={k: v[:n_days].copy()
                        for k, v in panel.industry_index.items()},
        industry_of=dict(panel.industry_of),
    )


def eq1_config(assets=10, days=700, noise=0.0, seed_industry_beta=0.2):
    """Noiseless (or low-noise) panel whose returns follow the linear map
    r[t+1] = 2 * market_return[t] - 1 * industry_return[t] exactly."""
    return fb.SynthConfig(
        assets=assets,
        days=days,
        regimes=(
            fb.RegimeSpec("bull", days // 3, 0.002, 0.01),
            fb.RegimeSpec("shock", days // 3, 0.0, 0.015),
            fb.RegimeSpec("bear", days - 2 * (days // 3), -0.002, 0.012),
        ),
        loadings=fb.Loadings(alpha=0.0, betas={"market_return": 2.0,
                                               "industry_return": -1.0}),
        noise=noise,
        industry_beta=seed_industry_beta,
    )
