"""Command-line entry point: reproducible runs driven by one JSON config.

Usage:
    factorbt <generate|train|backtest|sweep> --config <path> [--out <dir>]
             [--models <csv-list>]

Exit codes: 0 success, 2 config error, 3 I/O error, 4 training divergence,
5 insufficient data.  Every artifact a command writes is a pure function of
the config file (and its seed), so re-running overwrites byte-identical
files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Optional

import numpy as np

from .backtest import (
    BacktestConfig,
    compare_models,
    optimization_sweep,
    save_run_dir,
    walk_forward,
    write_sweep_csv,
)
from .errors import DivergedLoss, FactorbtError, InsufficientData, InvalidConfig
from .factors import ScreenConfig, screen_factors, write_corr_matrix, write_factor_report
from .lstm import TrainConfig, make_windows, save_params, train
from .marketdata import (
    CleanPolicy,
    MarketPanel,
    clean,
    compute_factors,
    load_market_csv,
    panel_log_returns,
    standardize,
    write_index_csv,
    write_prices_csv,
)
from .synth import SynthConfig, synth_config_from_dict, synth_generate
from .util import fmt, write_csv

MODEL_LABELS = {"linear": "Benchmark model", "lstm": "LSTM model"}
RUN_DIR_NAMES = {"linear": "benchmark", "lstm": "lstm"}

_TOP_KEYS = {"seed", "out_dir", "source", "clean", "screen", "train",
             "backtest", "models", "degrees"}
_BACKTEST_KEYS = {"train_days", "test_days", "top_fraction", "vol_target",
                  "drawdown_limit", "vol_lookback", "regime_lookback",
                  "regime_threshold", "cost_per_turnover", "rf"}
_TRAIN_KEYS = {"window", "hidden_size", "epochs", "learning_rate",
               "batch_size", "seed", "grad_clip", "l2"}


@dataclass
class RunConfig:
    """Everything one run needs; parsed strictly from a JSON document."""

    seed: Optional[int]
    out_dir: str
    synth: Optional[SynthConfig]
    synth_seed: Optional[int]
    csv_paths: Optional[Dict[str, str]]
    clean_policy: CleanPolicy
    screen: ScreenConfig
    train_cfg: TrainConfig
    backtest_cfg: BacktestConfig
    models: List[str]
    degrees: List[int]


def _reject_unknown(obj: dict, allowed: set, context: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise InvalidConfig(f"unknown key(s) in {context}: {', '.join(sorted(unknown))}")


def load_run_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidConfig("config must be a JSON object")
    _reject_unknown(obj, _TOP_KEYS, "config")

    seed = obj.get("seed")
    source = obj.get("source", {})
    _reject_unknown(source, {"synth", "csv"}, "source")
    if ("synth" in source) == ("csv" in source):
        raise InvalidConfig("source must contain exactly one of 'synth' or 'csv'")

    synth_cfg = None
    synth_seed = None
    csv_paths = None
    if "synth" in source:
        synth_cfg = synth_config_from_dict(source["synth"])
        synth_seed = source["synth"].get("seed", seed)
        if synth_seed is None:
            raise InvalidConfig("synth source requires a 'seed' key")
    else:
        _reject_unknown(source["csv"], {"prices", "index"}, "source.csv")
        try:
            csv_paths = {"prices": source["csv"]["prices"],
                         "index": source["csv"]["index"]}
        except KeyError as exc:
            raise InvalidConfig(f"source.csv requires key {exc}") from exc

    clean_obj = obj.get("clean", {})
    _reject_unknown(clean_obj, {"mad_k"}, "clean")
    policy = CleanPolicy(mad_k=float(clean_obj.get("mad_k", 5.0)))

    screen_obj = obj.get("screen", {})
    _reject_unknown(screen_obj, {"min_abs_ic", "max_pairwise_corr"}, "screen")
    screen = ScreenConfig(
        min_abs_ic=float(screen_obj.get("min_abs_ic", 0.02)),
        max_pairwise_corr=float(screen_obj.get("max_pairwise_corr", 0.8)))

    train_obj = dict(obj.get("train", {}))
    _reject_unknown(train_obj, _TRAIN_KEYS, "train")
    if "seed" not in train_obj:
        train_obj["seed"] = seed if seed is not None else 0
    train_cfg = TrainConfig(**{k: type(getattr(TrainConfig(), k))(v)
                               for k, v in train_obj.items()})

    models = list(obj.get("models", ["linear", "lstm"]))
    for name in models:
        if name not in MODEL_LABELS:
            raise InvalidConfig(f"unknown model {name!r}")
    if "lstm" in models and "linear" not in models:
        models.insert(0, "linear")  # the benchmark is always reported

    bt_obj = dict(obj.get("backtest", {}))
    _reject_unknown(bt_obj, _BACKTEST_KEYS, "backtest")
    backtest_cfg = BacktestConfig(
        train_cfg=train_cfg,
        seed=seed if seed is not None else 0,
        screen=screen,
        **{k: (int(v) if k in ("train_days", "test_days", "vol_lookback",
                               "regime_lookback") else float(v))
           for k, v in bt_obj.items()})

    degrees = [int(d) for d in obj.get("degrees", [0, 1, 2, 3, 4])]

    if ("lstm" in models or synth_cfg is not None) and seed is None:
        raise InvalidConfig("config requires a 'seed' key (lstm model or "
                            "synthetic source)")

    return RunConfig(seed=seed, out_dir=str(obj.get("out_dir", "run")),
                     synth=synth_cfg, synth_seed=synth_seed,
                     csv_paths=csv_paths, clean_policy=policy, screen=screen,
                     train_cfg=train_cfg, backtest_cfg=backtest_cfg,
                     models=models, degrees=degrees)


def _load_panel(cfg: RunConfig) -> MarketPanel:
    if cfg.synth is not None:
        return synth_generate(cfg.synth, cfg.synth_seed)
    return load_market_csv(cfg.csv_paths["prices"], cfg.csv_paths["index"])


def cmd_generate(cfg: RunConfig) -> int:
    if cfg.synth is None:
        raise InvalidConfig("generate requires a synth source")
    panel = _load_panel(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    prices_path = os.path.join(cfg.out_dir, "prices.csv")
    index_path = os.path.join(cfg.out_dir, "index.csv")
    write_prices_csv(panel, prices_path)
    write_index_csv(panel, index_path)
    print(f"wrote {prices_path} ({panel.n_days * panel.n_assets} rows) "
          f"and {index_path}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    panel = clean(_load_panel(cfg), cfg.clean_policy)
    fp = compute_factors(panel)
    rets = panel_log_returns(panel)
    z = standardize(fp, (0, fp.n_days))
    fwd = rets[1:]
    selected, stats = screen_factors(z.slice_days(0, fp.n_days - 1), fwd,
                                     cfg.screen)
    samples = make_windows(z.select(selected), rets, cfg.train_cfg.window)
    params, curve = train(samples, cfg.train_cfg)

    os.makedirs(cfg.out_dir, exist_ok=True)
    model_path = os.path.join(cfg.out_dir, "model.fbtl")
    save_params(params, model_path)
    write_csv(os.path.join(cfg.out_dir, "training.csv"), ["epoch", "loss"],
              [[str(e + 1), fmt(v)] for e, v in enumerate(curve)])
    write_factor_report(stats, selected, os.path.join(cfg.out_dir, "factors.csv"))
    write_corr_matrix(stats, os.path.join(cfg.out_dir, "factor_corr.csv"))
    print(f"trained on {len(samples)} windows ({', '.join(selected)}); "
          f"final loss {curve[-1]:.3e}; model at {model_path}")
    return 0


def _model_config(cfg: RunConfig, model: str) -> BacktestConfig:
    if model == "linear":
        # The benchmark is the plain linear strategy without the
        # risk-control overlay, mirroring the traditional baseline.
        return replace(cfg.backtest_cfg, model_kind="linear",
                       use_vol_target=False, use_drawdown_control=False)
    return replace(cfg.backtest_cfg, model_kind="lstm")


def cmd_backtest(cfg: RunConfig) -> int:
    panel = clean(_load_panel(cfg), cfg.clean_policy)
    named = []
    for model in cfg.models:
        result = walk_forward(panel, _model_config(cfg, model))
        save_run_dir(result, os.path.join(cfg.out_dir, RUN_DIR_NAMES[model]))
        named.append((MODEL_LABELS[model], result))
    table = compare_models(named)
    table.write_csv(os.path.join(cfg.out_dir, "comparison.csv"),
                    os.path.join(cfg.out_dir, "comparison_regimes.csv"))
    text = table.render_text()
    with open(os.path.join(cfg.out_dir, "comparison.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    panel = clean(_load_panel(cfg), cfg.clean_policy)
    sweep = optimization_sweep(panel, cfg.backtest_cfg, cfg.degrees)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "sweep.csv")
    write_sweep_csv(sweep, path)
    for degree, ann, sharpe_value in sweep.rows:
        print(f"degree {degree}: ann_return {ann:+.2%}  sharpe {sharpe_value:.2f}")
    print(f"wrote {path}")
    return 0


COMMANDS = {"generate": cmd_generate, "train": cmd_train,
            "backtest": cmd_backtest, "sweep": cmd_sweep}


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="factorbt",
        description="Factor research runs driven by a single JSON config.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the run config")
    parser.add_argument("--out", help="override the config's output directory")
    parser.add_argument("--models",
                        help="comma-separated subset of linear,lstm (backtest)")
    args = parser.parse_args(argv)

    try:
        cfg = load_run_config(args.config)
        if args.out:
            cfg.out_dir = args.out
        if args.models:
            requested = [m.strip() for m in args.models.split(",") if m.strip()]
            for name in requested:
                if name not in MODEL_LABELS:
                    raise InvalidConfig(f"unknown model {name!r}")
            cfg.models = requested
        return COMMANDS[args.command](cfg)
    except InvalidConfig as exc:
        print(f"factorbt: config error: {exc}", file=sys.stderr)
        return 2
    except DivergedLoss as exc:
        print(f"factorbt: training diverged: {exc}", file=sys.stderr)
        return 4
    except InsufficientData as exc:
        print(f"factorbt: insufficient data: {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"factorbt: I/O error: {exc}", file=sys.stderr)
        return 3
    except FactorbtError as exc:
        print(f"factorbt: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
