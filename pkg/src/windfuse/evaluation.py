"""Metrics, reference forecasts and the fold-by-seed experiment runner.

Speed variables are scored with RMSE and RRSE, direction with the circular
absolute error (max 180 degrees) and its normalized form. All metrics are
computed in original data units, per fold, then averaged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import (
    HOURS_PER_DAY,
    SplitPlan,
    WeatherFrame,
    eligible_fcts,
    fold_index_ranges,
    make_windows,
    month_intervals,
    normalize_frame,
    recover_direction_masked,
)
from .covariates import select_for_frame
from .errors import DataError
from .numerics import Tensor
from .training import TrainConfig, predict, train_history_baseline, train_pipeline

__all__ = [
    "rmse",
    "amae",
    "rrse",
    "namae",
    "persistence_forecast",
    "nwp_forecast",
    "ExperimentCell",
    "MetricReport",
    "run_experiment",
    "NN_MODELS",
    "BASELINE_MODELS",
]

BASELINE_MODELS = ("persistence", "nwp")
NN_MODELS = ("history-lstm", "temporal", "spatial", "ensemble")
SPEED_VARIABLES = ("v", "vx", "vy")


# -- metrics ---------------------------------------------------------------------

def rmse(truth, pred) -> float:
    truth = np.asarray(truth, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if truth.size == 0:
        raise ValueError("rmse needs at least one point")
    if truth.shape != pred.shape:
        raise ValueError(f"rmse: lengths differ, {truth.shape} vs {pred.shape}")
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def _check_angles(arr: np.ndarray, name: str) -> None:
    if np.any(np.isnan(arr)) or np.any((arr <= 0) | (arr > 360)):
        raise ValueError(f"{name} angles must lie in (0, 360] degrees")


def amae(truth_deg, pred_deg) -> float:
    """Mean circular absolute difference in degrees, at most 180."""
    truth = np.asarray(truth_deg, dtype=np.float64).ravel()
    pred = np.asarray(pred_deg, dtype=np.float64).ravel()
    if truth.size == 0:
        raise ValueError("amae needs at least one point")
    if truth.shape != pred.shape:
        raise ValueError(f"amae: lengths differ, {truth.shape} vs {pred.shape}")
    _check_angles(truth, "truth")
    _check_angles(pred, "prediction")
    diff = np.abs(pred - truth)
    delta = np.where(diff <= 180.0, diff, 360.0 - diff)
    return float(np.mean(delta))


def rrse(truth, pred) -> float:
    """Root squared error relative to the constant-mean predictor of the segment."""
    truth = np.asarray(truth, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if truth.size == 0:
        raise ValueError("rrse needs at least one point")
    if truth.shape != pred.shape:
        raise ValueError(f"rrse: lengths differ, {truth.shape} vs {pred.shape}")
    denom = np.sum((truth - truth.mean()) ** 2)
    if denom == 0.0:
        raise ValueError("rrse undefined for a constant truth segment")
    return float(np.sqrt(np.sum((truth - pred) ** 2) / denom))


def namae(truth_deg, pred_deg) -> float:
    return amae(truth_deg, pred_deg) / 180.0


# -- reference forecasts ------------------------------------------------------------

def persistence_forecast(frame: WeatherFrame, variable: str, fct: int, k: int = 24) -> np.ndarray:
    """Copy the observations from exactly one day earlier."""
    if k < 1 or k > HOURS_PER_DAY:
        raise ValueError(f"persistence supports 1..{HOURS_PER_DAY} horizons, got {k}")
    if fct - HOURS_PER_DAY + 1 < 0:
        raise ValueError(f"persistence needs {HOURS_PER_DAY} observations up to index {fct}")
    series = frame.obs[:, frame.var_index(variable), :]
    lo = fct + 1 - HOURS_PER_DAY
    return series[lo : lo + k, :].copy()  # [k, n_stations]


def nwp_forecast(frame: WeatherFrame, variable: str, fct: int, k: int = 24) -> np.ndarray:
    """Pass the shared forecast stream through for horizons 1..k."""
    if fct + k >= frame.n_steps:
        raise DataError(f"NWP rows missing beyond index {fct + k}")
    return frame.nwp[fct + 1 : fct + 1 + k, frame.var_index(variable)].copy()


# -- experiment bookkeeping ----------------------------------------------------------

@dataclass
class ExperimentCell:
    model: str
    variable: str
    station: str
    fold: int
    seed: int
    metrics: dict[str, float] = field(default_factory=dict)
    n_points: int = 0
    error: str | None = None


@dataclass
class MetricReport:
    mode: str
    seeds: tuple[int, ...]
    models: tuple[str, ...]
    variables: tuple[str, ...]
    cells: list[ExperimentCell] = field(default_factory=list)

    def failed(self) -> list[ExperimentCell]:
        return [c for c in self.cells if c.error is not None]

    def aggregate(self) -> dict[tuple[str, str, str], dict[str, float]]:
        """Mean over all ok cells per (model, variable, metric), with the
        across-seed standard deviation of per-seed means."""
        grouped: dict[tuple[str, str, str], dict[int, list[float]]] = {}
        for cell in self.cells:
            if cell.error is not None:
                continue
            for metric, value in cell.metrics.items():
                key = (cell.model, cell.variable, metric)
                grouped.setdefault(key, {}).setdefault(cell.seed, []).append(value)
        out = {}
        for key, by_seed in grouped.items():
            all_vals = [v for vals in by_seed.values() for v in vals]
            seed_means = [float(np.mean(vals)) for vals in by_seed.values()]
            out[key] = {
                "mean": float(np.mean(all_vals)),
                "std": float(np.std(seed_means)),
                "n_cells": len(all_vals),
            }
        return out

    def to_text(self) -> str:
        lines = ["# experiment report"]
        lines.append(f"mode={self.mode}")
        lines.append(f"models={','.join(self.models)}")
        lines.append(f"variables={','.join(self.variables)}")
        lines.append(f"seeds={','.join(str(s) for s in self.seeds)}")
        lines.append(f"cells_total={len(self.cells)}")
        lines.append(f"cells_failed={len(self.failed())}")
        agg = self.aggregate()
        metrics = sorted({key[2] for key in agg})
        for metric in metrics:
            lines.append(f"[table.{metric}]")
            variables = [v for v in self.variables if any(key[1] == v and key[2] == metric for key in agg)]
            lines.append("model\t" + "\t".join(variables))
            for model in self.models:
                row = [model]
                for var in variables:
                    stats = agg.get((model, var, metric))
                    row.append("-" if stats is None else f"{stats['mean']:.4f}±{stats['std']:.4f}")
                lines.append("\t".join(row))
        if self.failed():
            lines.append("[failures]")
            for cell in self.failed():
                lines.append(
                    f"model={cell.model} variable={cell.variable} station={cell.station} "
                    f"fold={cell.fold} seed={cell.seed} error={cell.error}"
                )
        return "\n".join(lines) + "\n"


def _metric_cell(model, variable, station, fold, seed, truth, pred) -> ExperimentCell:
    cell = ExperimentCell(model=model, variable=variable, station=station, fold=fold, seed=seed)
    try:
        if variable == "theta":
            mask = ~np.isnan(pred)
            if not np.all(mask):
                cell.metrics["calm_dropped"] = float(np.sum(~mask))
            cell.metrics["amae"] = amae(truth[mask], pred[mask])
            cell.metrics["namae"] = namae(truth[mask], pred[mask])
            cell.n_points = int(mask.sum())
        else:
            cell.metrics["rmse"] = rmse(truth, pred)
            cell.metrics["rrse"] = rrse(truth, pred)
            cell.n_points = truth.size
    except Exception as exc:  # record, never drop silently
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def _truth_matrix(frame: WeatherFrame, variable: str, fcts: Sequence[int], k: int) -> np.ndarray:
    vi = frame.var_index(variable)
    return np.stack([frame.obs[t + 1 : t + 1 + k, vi, :] for t in fcts])  # [n, k, V]


def run_experiment(
    frame: WeatherFrame,
    plan: SplitPlan,
    roster: Sequence[str],
    seeds: Sequence[int],
    config: TrainConfig,
    variables: Sequence[str] = SPEED_VARIABLES,
    use_covariates: bool = False,
) -> MetricReport:
    """Train and score every (model, fold, seed) cell of the roster.

    Reference models carry no training, so their cells repeat across seeds.
    Direction metrics appear whenever both wind components are evaluated.
    A failing cell records its error instead of aborting the run.
    """
    for model in roster:
        if model not in BASELINE_MODELS + NN_MODELS:
            raise ValueError(f"unknown model {model!r}")
    intervals = month_intervals(frame.timeline)
    if len(intervals) != plan.n_intervals:
        raise ValueError(
            f"plan covers {plan.n_intervals} intervals but the frame has {len(intervals)} whole months"
        )
    derive_theta = "vx" in variables and "vy" in variables
    report_vars = list(variables) + (["theta"] if derive_theta else [])
    report = MetricReport(
        mode=plan.mode,
        seeds=tuple(int(s) for s in seeds),
        models=tuple(roster),
        variables=tuple(report_vars),
    )
    nn_requested = [m for m in roster if m in NN_MODELS]
    for fold_idx, fold in enumerate(plan.folds):
        ranges = fold_index_ranges(intervals, fold)
        test_lo, test_hi = ranges["test"]
        all_fcts = eligible_fcts(frame, config.w, config.k, config.fct_hour)
        test_fcts = [t for t in all_fcts if t - config.w + 1 >= test_lo and t + config.k < test_hi]
        if not test_fcts:
            raise ValueError(f"fold {fold_idx}: no complete test windows")
        truths = {var: _truth_matrix(frame, var, test_fcts, config.k) for var in variables}
        if derive_theta:
            truths["theta"] = _truth_matrix(frame, "theta", test_fcts, config.k)

        baseline_preds: dict[str, dict[str, np.ndarray]] = {}
        for model in roster:
            if model not in BASELINE_MODELS:
                continue
            preds: dict[str, np.ndarray] = {}
            for var in list(variables) + (["theta"] if derive_theta else []):
                if model == "persistence":
                    per_fct = [persistence_forecast(frame, var, t, config.k) for t in test_fcts]
                    preds[var] = np.stack(per_fct)  # [n, k, V]
                else:
                    per_fct = [nwp_forecast(frame, var, t, config.k) for t in test_fcts]
                    col = np.stack(per_fct)  # [n, k]
                    preds[var] = np.repeat(col[:, :, None], len(frame.stations), axis=2)
            baseline_preds[model] = preds

        for seed in report.seeds:
            seed_config = TrainConfig(**{**config.__dict__, "seed": seed})
            for model in roster:
                if model in BASELINE_MODELS:
                    for var in report_vars:
                        for si, st in enumerate(frame.stations):
                            report.cells.append(_metric_cell(
                                model, var, st, fold_idx, seed,
                                truths[var][:, :, si], baseline_preds[model][var][:, :, si],
                            ))
            if not nn_requested:
                continue
            try:
                nn_preds = _nn_fold_predictions(
                    frame, ranges, nn_requested, seed_config, variables, use_covariates, test_fcts
                )
            except Exception as exc:
                for model in nn_requested:
                    for var in report_vars:
                        for st in frame.stations:
                            report.cells.append(ExperimentCell(
                                model=model, variable=var, station=st, fold=fold_idx,
                                seed=seed, error=f"{type(exc).__name__}: {exc}",
                            ))
                continue
            for model in nn_requested:
                for var in report_vars:
                    if var not in nn_preds[model]:
                        continue
                    for si, st in enumerate(frame.stations):
                        report.cells.append(_metric_cell(
                            model, var, st, fold_idx, seed,
                            truths[var][:, :, si], nn_preds[model][var][:, si, :],
                        ))
    return report


def _nn_fold_predictions(
    frame: WeatherFrame,
    ranges: dict[str, tuple[int, int]],
    models: Sequence[str],
    config: TrainConfig,
    variables: Sequence[str],
    use_covariates: bool,
    test_fcts: Sequence[int],
) -> dict[str, dict[str, np.ndarray]]:
    """Train what the roster needs once, then read out per-stage predictions.

    Returned arrays are [n_fct, n_stations, k] in original units.
    """
    out: dict[str, dict[str, np.ndarray]] = {m: {} for m in models}
    deepest = 0
    stage_order = {"temporal": 1, "spatial": 2, "ensemble": 3}
    for m in models:
        if m in stage_order:
            deepest = max(deepest, stage_order[m])
    fit_ranges = {"train": ranges["train"], "val": ranges["val"]}

    if "history-lstm" in models:
        for var in variables:
            nets, stats = train_history_baseline(frame, var, fit_ranges, config)
            nframe = normalize_frame(frame, stats)
            preds = np.empty((len(test_fcts), len(frame.stations), config.k))
            for si, st in enumerate(frame.stations):
                windows = make_windows(nframe, st, var, w=config.w, k=config.k,
                                       fct_hour=config.fct_hour)
                by_fct = {w.fct: w for w in windows}
                hist = np.stack([by_fct[t].history for t in test_fcts])
                normed = nets[st].forward(Tensor(hist)).data
                mean, std = stats.obs(frame, st, var)
                preds[:, si, :] = normed * std + mean
            out["history-lstm"][var] = preds
        if derive_possible(variables):
            _attach_theta(out["history-lstm"])

    if deepest == 0:
        return out
    through = {1: "temporal", 2: "spatial", 3: "ensemble"}[deepest]
    nets_by_target: dict[str, object] = {}
    for var in variables:
        hist_covs: tuple[str, ...] = ()
        fut_covs: tuple[str, ...] = ()
        if use_covariates:
            hist_covs, fut_covs = select_for_frame(
                frame, var, ranges["train"], k=config.k,
                lam=config.ridge_lambda, threshold=config.covariate_threshold,
            )
        nets, _ = train_pipeline(
            frame, var, fit_ranges, config,
            hist_covariates=hist_covs, fut_covariates=fut_covs,
            through_stage=through,
        )
        nets_by_target[var] = nets
    for model in models:
        if model == "history-lstm":
            continue
        pset = predict(nets_by_target, frame, fcts=test_fcts, stage=model,
                       clip_speed=config.clip_speed)
        for var, arr in pset.values.items():
            out[model][var] = arr
    return out


def derive_possible(variables: Sequence[str]) -> bool:
    return "vx" in variables and "vy" in variables


def _attach_theta(preds: dict[str, np.ndarray]) -> None:
    theta, _ = recover_direction_masked(preds["vx"], preds["vy"])
    preds["theta"] = theta
