#!/usr/bin/env python3
"""Demo 3 — risk metric suite on stylized return streams.

Maximum drawdown, annualized Sharpe, historical VaR(95%), volatility, and
annualized return for three hand-picked daily return streams, plus the VaR
order-statistic convention spelled out on a tiny sample.
"""
import numpy as np

import factorbt as fb

print("=" * 64)
print("RISK METRICS")
print("=" * 64)

rng = np.random.default_rng(7)
streams = {
    "steady grind": rng.normal(0.0006, 0.006, 504),
    "boom and bust": np.concatenate([rng.normal(0.003, 0.01, 252),
                                     rng.normal(-0.003, 0.02, 252)]),
    "quiet drift": rng.normal(0.0002, 0.002, 504),
}

print(f"\n{'stream':16} {'MDD':>7} {'Sharpe':>7} {'VaR95':>8} "
      f"{'vol':>7} {'annret':>8}")
for name, r in streams.items():
    rep = fb.risk_report(r)
    sharpe = "  n/a" if rep.sharpe is None else f"{rep.sharpe:7.2f}"
    print(f"{name:16} {rep.max_drawdown:7.2%} {sharpe} {rep.var95:8.2%} "
          f"{rep.volatility:7.2%} {rep.ann_return:8.2%}")

print("\nreport rows (drawdown | sharpe | VaR), display formatting:")
for name, r in streams.items():
    rep = fb.risk_report(r)
    print(f"  {name:16} {fb.format_report_row(rep.max_drawdown, rep.sharpe, rep.var95)}")

print()
print("=" * 64)
print("HISTORICAL VaR IS AN ORDER STATISTIC")
print("=" * 64)
sample = np.array([-0.04, 0.01, -0.01, 0.02, 0.005, -0.02, 0.015, 0.0,
                   -0.005, 0.01, 0.02, -0.015, 0.01, 0.005, -0.01, 0.02,
                   0.01, -0.03, 0.005, 0.01])
print(f"\n20 daily returns, sorted: {np.round(np.sort(sample), 3)}")
print(f"VaR(95%) = ceil(0.05 * 20) = 1st smallest = {fb.var_historical(sample, 0.95):.3f}")
print(f"VaR(90%) = ceil(0.10 * 20) = 2nd smallest = {fb.var_historical(sample, 0.90):.3f}")

print("\ndrawdown example, equity 1.00 -> 1.20 -> 0.90 -> 1.10:")
eq = np.array([1.0, 1.2, 0.9, 1.1])
print(f"max_drawdown = (1.20 - 0.90) / 1.20 = {fb.max_drawdown(eq):.4f}")
