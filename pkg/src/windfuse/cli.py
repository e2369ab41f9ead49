"""Command-line front door.

Every subcommand reads and writes only the declared file formats, never
mutates its inputs, and is deterministic given the same inputs and seed.
Configuration precedence is CLI flag, then --config file, then defaults.

Exit codes: 0 success, 2 usage error, 3 missing file, 4 malformed data,
1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import load_config, resolve
from .covariates import frame_importances, select, write_selection_report
from .data import (
    HOURS_PER_DAY,
    VARIABLES,
    build_frame,
    correlation_diagnostics,
    eligible_fcts,
    fill_frame,
    fold_index_ranges,
    make_windows,
    month_intervals,
    plan_splits,
)
from .errors import DataError, WindfuseError
from .evaluation import BASELINE_MODELS, NN_MODELS, run_experiment
from .synth import SynthSpec, synthesize_files
from .training import TrainConfig, dump_predictions, predict, train_pipeline

TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig))


def _add_train_config_flags(parser: argparse.ArgumentParser) -> None:
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            parser.add_argument(flag, default=None, choices=("true", "false"))
        else:
            parser.add_argument(flag, default=None)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    file_cfg = load_config(args.config) if args.config else {}
    flag_cfg = {key: getattr(args, key, None) for key in TRAIN_KEYS}
    merged = resolve({}, {k: v for k, v in file_cfg.items() if k in TRAIN_KEYS}, flag_cfg)
    return TrainConfig.from_mapping(merged)


def _load_frame(args: argparse.Namespace):
    return fill_frame(build_frame(args.obs, args.nwp))


def _holdout_ranges(frame, holdout: str) -> dict[str, tuple[int, int]]:
    parts = holdout.split(":")
    if len(parts) not in (2, 3):
        raise ValueError("--holdout expects TRAIN:VAL or TRAIN:VAL:TEST day counts")
    days = [int(p) for p in parts]
    if any(d < 1 for d in days):
        raise ValueError("--holdout day counts must be positive")
    if sum(days) * HOURS_PER_DAY > frame.n_steps:
        raise ValueError(
            f"--holdout asks for {sum(days)} days but the frame has {frame.n_steps // HOURS_PER_DAY}"
        )
    edges = np.cumsum([0] + days) * HOURS_PER_DAY
    names = ["train", "val", "test"][: len(days)]
    return {name: (int(lo), int(hi)) for name, lo, hi in zip(names, edges[:-1], edges[1:])}


def _fold_ranges(frame, mode: str, fold_index: int | None, rolling_depth: int = 6):
    intervals = month_intervals(frame.timeline)
    plan = plan_splits(len(intervals), mode, rolling_depth=rolling_depth)
    idx = len(plan.folds) - 1 if fold_index is None else fold_index
    if not (0 <= idx < len(plan.folds)):
        raise ValueError(f"fold index {idx} out of range 0..{len(plan.folds) - 1}")
    return fold_index_ranges(intervals, plan.folds[idx])


# -- subcommands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SynthSpec(
        stations=args.stations,
        days=args.days,
        base_speed=args.base_speed,
        diurnal_amplitude=args.diurnal_amplitude,
        ar_coeff=args.ar_coeff,
        ar_noise=args.ar_noise,
        nwp_bias=args.nwp_bias,
        nwp_noise=args.nwp_noise,
        spatial_strength=args.spatial_strength,
        seed=args.seed,
        start=args.start,
    )
    obs_path, nwp_path = synthesize_files(spec, args.out_dir)
    print(f"wrote {obs_path} and {nwp_path}")
    return 0


def cmd_prepare(args) -> int:
    frame = _load_frame(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    obs_path = out / "observations_filled.csv"
    with open(obs_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "station"] + list(VARIABLES))
        for ti, stamp in enumerate(frame.timeline):
            iso = str(stamp) + ":00:00"
            for si, st in enumerate(frame.stations):
                writer.writerow([iso, st] + [f"{frame.obs[ti, vi, si]:.6f}" for vi in range(len(VARIABLES))])
    nwp_path = out / "nwp_aligned.csv"
    with open(nwp_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + list(VARIABLES))
        for ti, stamp in enumerate(frame.timeline):
            writer.writerow([str(stamp) + ":00:00"] + [f"{frame.nwp[ti, vi]:.6f}" for vi in range(len(VARIABLES))])
    print(f"wrote {obs_path} and {nwp_path} ({frame.n_steps} hours, {len(frame.stations)} stations)")
    if args.windows_out:
        windows = make_windows(frame, args.station, args.variable)
        with open(args.windows_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fct", "kind", "step", "column", "value"])
            for w in windows:
                stamp = str(frame.timeline[w.fct]) + ":00:00"
                for r in range(w.history.shape[0]):
                    for c in range(w.history.shape[1]):
                        writer.writerow([stamp, "history", r, c, f"{w.history[r, c]:.6f}"])
                for r in range(w.future.shape[0]):
                    for c in range(w.future.shape[1]):
                        writer.writerow([stamp, "future", r, c, f"{w.future[r, c]:.6f}"])
                for r in range(w.target.shape[0]):
                    writer.writerow([stamp, "target", r, 0, f"{w.target[r]:.6f}"])
        print(f"wrote {len(windows)} windows to {args.windows_out}")
    return 0


def cmd_select_covariates(args) -> int:
    frame = _load_frame(args)
    cfg = _train_config(args)
    hi = int(frame.n_steps * args.train_fraction)
    if hi <= cfg.k:
        raise ValueError("training fraction leaves too few samples")
    hist_vecs, fut_vecs = frame_importances(
        frame, args.target, (0, hi), k=cfg.k, lam=cfg.ridge_lambda
    )
    write_selection_report(args.out, args.target, cfg.covariate_threshold, hist_vecs, fut_vecs)
    hist_sel = select(hist_vecs, cfg.covariate_threshold)
    fut_sel = select(fut_vecs, cfg.covariate_threshold)
    print(f"historical: {','.join(hist_sel)}")
    print(f"future: {','.join(fut_sel)}")
    print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    frame = _load_frame(args)
    cfg = _train_config(args)
    if args.holdout:
        ranges = _holdout_ranges(frame, args.holdout)
    else:
        ranges = _fold_ranges(frame, args.mode, args.fold)
    targets = args.targets.split(",")
    out_dir = Path(args.out_dir)
    for target in targets:
        hist_covs: tuple[str, ...] = ()
        fut_covs: tuple[str, ...] = ()
        if args.covariates:
            from .covariates import select_for_frame

            hist_covs, fut_covs = select_for_frame(
                frame, target, ranges["train"], k=cfg.k,
                lam=cfg.ridge_lambda, threshold=cfg.covariate_threshold,
            )
        nets, records = train_pipeline(
            frame, target, ranges, cfg,
            hist_covariates=hist_covs, fut_covariates=fut_covs,
            through_stage=args.through_stage,
        )
        written = checkpoint.save_station_nets(nets, out_dir)
        for stage, recs in records.items():
            for st, rec in recs.items():
                print(
                    f"{target} {stage} {st}: best epoch {rec.best_epoch} "
                    f"val mse {rec.best_val_loss:.6f} ({rec.epochs_run} epochs)"
                )
        print(f"{target}: wrote {len(written)} checkpoints under {out_dir / target}")
    return 0


def cmd_predict(args) -> int:
    frame = _load_frame(args)
    targets = args.targets.split(",")
    nets_by_target = {t: checkpoint.load_station_nets(args.checkpoints, t) for t in targets}
    some = nets_by_target[targets[0]]
    fcts = eligible_fcts(frame, some.w, some.k, some.fct_hour)
    if args.last_days:
        fcts = fcts[-args.last_days:]
    if not fcts:
        raise ValueError("no complete forecast windows in the frame")
    pset = predict(nets_by_target, frame, fcts=fcts, stage=args.stage)
    dump_predictions(pset, frame, args.out)
    n_rows = len(pset.fct_indices) * len(pset.stations) * len(pset.values) * pset.k
    print(f"wrote {n_rows} prediction rows to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    frame = _load_frame(args)
    cfg = _train_config(args)
    models = args.models.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    intervals = month_intervals(frame.timeline)
    plan = plan_splits(len(intervals), args.mode, max_folds=args.max_folds)
    variables = tuple(args.variables.split(","))
    report = run_experiment(
        frame, plan, models, seeds, cfg,
        variables=variables, use_covariates=args.covariates,
    )
    text = report.to_text()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote report to {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_diagnose(args) -> int:
    frame = _load_frame(args)
    diag = correlation_diagnostics(frame, args.variable, args.max_lag)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "auto_correlation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station", "lag", "correlation"])
        for st, vals in diag.auto.items():
            for lag, r in enumerate(vals):
                writer.writerow([st, lag, f"{r:.6f}"])
    with open(out / "cross_correlation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station", "covariate", "correlation"])
        for st, table in diag.cross.items():
            for name, r in table.items():
                writer.writerow([st, name, f"{r:.6f}"])
    with open(out / "spatial_correlation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station_a", "station_b", "lag", "correlation"])
        for (a, b), vals in diag.spatial.items():
            for lag, r in enumerate(vals):
                writer.writerow([a, b, lag, f"{r:.6f}"])
    if diag.constant_series:
        print("constant series flagged: " + ",".join(diag.constant_series))
    print(f"wrote diagnostics to {out}")
    return 0


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windfuse",
        description="Multi-station wind forecasting from local observations and a shared NWP feed",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic observation and NWP files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stations", type=int, default=3)
    p.add_argument("--days", type=int, default=30)
    p.add_argument("--base-speed", type=float, default=5.0)
    p.add_argument("--diurnal-amplitude", type=float, default=2.0)
    p.add_argument("--ar-coeff", type=float, default=0.8)
    p.add_argument("--ar-noise", type=float, default=0.15)
    p.add_argument("--nwp-bias", type=float, default=1.0)
    p.add_argument("--nwp-noise", type=float, default=0.15)
    p.add_argument("--spatial-strength", type=float, default=2.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="2021-01-01")
    p.set_defaults(func=cmd_synth)

    def add_io(p):
        p.add_argument("--obs", required=True)
        p.add_argument("--nwp", required=True)
        p.add_argument("--config", default=None)

    p = sub.add_parser("prepare", help="ingest, align and fill the raw files")
    add_io(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--windows-out", default=None, help="optional windows CSV dump")
    p.add_argument("--station", default=None)
    p.add_argument("--variable", default="v")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("select-covariates", help="rank covariates and write the selection report")
    add_io(p)
    p.add_argument("--target", default="v", choices=VARIABLES)
    p.add_argument("--train-fraction", type=float, default=1.0)
    p.add_argument("--out", required=True)
    _add_train_config_flags(p)
    p.set_defaults(func=cmd_select_covariates)

    p = sub.add_parser("train", help="run the staged training and write checkpoints")
    add_io(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--targets", default="v,vx,vy")
    p.add_argument("--mode", default="incremental", choices=("rolling", "incremental"))
    p.add_argument("--fold", type=int, default=None, help="fold index; default: last")
    p.add_argument("--holdout", default=None, help="TRAIN:VAL[:TEST] day counts instead of month folds")
    p.add_argument("--covariates", action="store_true")
    p.add_argument("--through-stage", default="ensemble", choices=("temporal", "spatial", "ensemble"))
    _add_train_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="load checkpoints and dump forecasts")
    add_io(p)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--targets", default="v,vx,vy")
    p.add_argument("--stage", default="ensemble", choices=("temporal", "spatial", "ensemble"))
    p.add_argument("--last-days", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="run the fold-by-seed experiment and report metrics")
    add_io(p)
    p.add_argument("--models", default="persistence,nwp",
                   help=f"comma list from {','.join(BASELINE_MODELS + NN_MODELS)}")
    p.add_argument("--seeds", default="0")
    p.add_argument("--mode", default="incremental", choices=("rolling", "incremental"))
    p.add_argument("--max-folds", type=int, default=12)
    p.add_argument("--variables", default="v,vx,vy")
    p.add_argument("--covariates", action="store_true")
    p.add_argument("--out", default=None)
    _add_train_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="write correlation diagnostic tables")
    add_io(p)
    p.add_argument("--variable", default="v", choices=VARIABLES)
    p.add_argument("--max-lag", type=int, default=48)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing-file: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: malformed-data: {exc}", file=sys.stderr)
        return 4
    except (WindfuseError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
