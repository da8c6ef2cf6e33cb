"""Command-line surface: gen-data, train, predict, compare, ablate, bench.

Flag precedence: built-in defaults < --config file < explicit flags. A
failed sub-run marks its table cell FAIL and the command exits nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .data import SyntheticConfig
from .harness import (
    DivergenceError,
    RunConfig,
    cmd_ablate,
    cmd_bench,
    cmd_compare,
    cmd_gen_data,
    cmd_predict,
    cmd_train,
    load_run_config,
    run_config_from_pairs,
)

_RUN_KEYS = (
    "arch", "hidden_dim", "n_heads", "select_ratio", "select_mode",
    "lstm_layers", "fcnn_depth", "window_len", "n_input_channels",
    "target_channel", "data_dir", "synth_wells", "synth_samples",
    "synth_states", "synth_persistence", "epochs", "batch_size", "lr",
    "patience", "train_stride", "val_fraction", "n_train_wells",
    "n_test_wells", "out_dir", "seed", "data_seed",
)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value run config file")
    p.add_argument("--seed", type=int, help="run seed (model init, shuffling)")
    p.add_argument("--data-seed", dest="data_seed", type=int,
                   help="dataset/split seed (defaults to --seed)")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--data-dir", dest="data_dir", help="directory of well CSVs")
    p.add_argument("--arch", choices=["esa_lstm", "lstm", "cascaded_lstm", "fcnn"])
    p.add_argument("--target", dest="target_channel",
                   choices=["res", "den", "gr", "cal", "sp"])
    p.add_argument("--hidden", dest="hidden_dim", type=int)
    p.add_argument("--heads", dest="n_heads", type=int)
    p.add_argument("--ratio", dest="select_ratio", type=float)
    p.add_argument("--mode", dest="select_mode", choices=["bypass", "gate"])
    p.add_argument("--lstm-layers", dest="lstm_layers", type=int)
    p.add_argument("--fcnn-depth", dest="fcnn_depth", type=int)
    p.add_argument("--window", dest="window_len", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--stride", dest="train_stride", type=int)
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--synth-wells", dest="synth_wells", type=int)
    p.add_argument("--synth-samples", dest="synth_samples", type=int)


def _run_from_args(args) -> RunConfig:
    base = RunConfig()
    if args.config:
        base = load_run_config(args.config, base)
    pairs = {}
    for key in _RUN_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            pairs[key] = str(v)
    return run_config_from_pairs(pairs, base)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="esalstm",
        description="Well log curve synthesis with a selective-attention LSTM")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write seeded synthetic well CSVs")
    p.add_argument("--out", dest="out_dir", default="wells")
    p.add_argument("--seed", type=int, default=SyntheticConfig.seed)
    p.add_argument("--wells", type=int, default=SyntheticConfig.n_wells)
    p.add_argument("--samples", type=int, default=SyntheticConfig.samples_per_well)

    p = sub.add_parser("train", help="train one model, write checkpoint + history")
    _add_run_flags(p)

    p = sub.add_parser("predict", help="predict one well from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("well_csv")
    p.add_argument("--target", dest="target_channel")
    p.add_argument("--out", dest="out_path", default="predictions.csv")

    p = sub.add_parser("compare", help="RMSE table over models x target channels")
    _add_run_flags(p)

    p = sub.add_parser("ablate", help="sweep FC width or selection ratio")
    p.add_argument("--axis", choices=["neurons", "ratio"], required=True)
    _add_run_flags(p)

    p = sub.add_parser("bench", help="step-count audit and epoch timing")
    _add_run_flags(p)
    p.add_argument("--bench-window", dest="bench_window", type=int, default=128)

    args = parser.parse_args(argv)

    if args.command == "gen-data":
        cfg = replace(SyntheticConfig(), n_wells=args.wells,
                      samples_per_well=args.samples, seed=args.seed)
        paths = cmd_gen_data(cfg, args.out_dir)
        print(f"wrote {len(paths)} wells to {args.out_dir}")
        return 0

    if args.command == "train":
        run = _run_from_args(args)
        try:
            result = cmd_train(run)
        except DivergenceError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        print(f"best validation RMSE {result.best_val_rmse:.6g} "
              f"(epoch {result.best_epoch}) -> {run.out_dir}/checkpoint.txt")
        return 0

    if args.command == "predict":
        try:
            wp = cmd_predict(args.checkpoint, args.well_csv,
                             args.target_channel, args.out_path)
        except (ValueError, FileNotFoundError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if wp.rmse is not None:
            print(f"{Path(args.well_csv).stem}: RMSE {wp.rmse:.6g}")
        else:
            print(f"{Path(args.well_csv).stem}: no actual values, RMSE not computed")
        print(f"wrote {args.out_path}")
        return 0

    if args.command == "compare":
        run = _run_from_args(args)
        result = cmd_compare(run)
        print(Path(run.out_dir, "compare.txt").read_text(encoding="utf-8"), end="")
        if result.failures:
            for name, target, msg in result.failures:
                print(f"FAIL {name}/{target}: {msg}", file=sys.stderr)
            return 1
        return 0

    if args.command == "ablate":
        run = _run_from_args(args)
        result = cmd_ablate(run, args.axis)
        print(Path(run.out_dir, f"ablate_{args.axis}.csv").read_text(encoding="utf-8"),
              end="")
        if result.failures:
            for value, msg in result.failures:
                print(f"FAIL {args.axis}={value}: {msg}", file=sys.stderr)
            return 1
        return 0

    if args.command == "bench":
        run = _run_from_args(args)
        result = cmd_bench(run, window_len=args.bench_window)
        for ratio, steps in result.steps_per_window.items():
            print(f"ratio {ratio}: {steps} LSTM steps per window")
        for name, (mu, sd) in result.epoch_seconds.items():
            print(f"{name}: {mu:.3f} +/- {sd:.3f} s/epoch")
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
