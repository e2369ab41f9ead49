"""Three-stage training per target variable, plus inference.

Stage one fits each station's temporal network. Stage two freezes those,
turns their representations into feature maps and fits each station's
spatial network. Stage three freezes both and fits the per-station blend.
All losses are mean squared error in normalized space; predictions are
denormalized once, after the blend.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .data import (
    NormStats,
    SampleWindow,
    WeatherFrame,
    assign_windows,
    compute_stats,
    eligible_fcts,
    make_windows,
    normalize_frame,
    recover_direction_masked,
)
from .ensemble import EnsembleNet, ensemble_init
from .errors import DataError
from .numerics import Tensor, adam_init, adam_step, backward, mse_loss, zero_grads
from .spatial import SpatialNet, build_feature_map, spatial_forward
from .temporal import HistoryLSTM, TemporalNet, batch_windows, temporal_forward

__all__ = [
    "TrainConfig",
    "TrainRecord",
    "StationNets",
    "PredictionSet",
    "train_stage",
    "train_pipeline",
    "predict",
    "dump_predictions",
    "job_rng",
]

STAGES = ("temporal", "spatial", "ensemble")
_STAGE_CODE = {"temporal": 1, "spatial": 2, "ensemble": 3, "history": 4}


@dataclass
class TrainConfig:
    lr_init: float = 1e-3
    lr_factor: float = 0.5
    lr_patience: int = 3
    lr_min: float = 1e-4
    batch: int = 32
    early_stop_patience: int = 30
    max_epochs: int = 1000
    seed: int = 0
    k: int = 24
    w: int = 24
    hidden: int = 32
    fct_hour: int = 0
    ridge_lambda: float = 1.0
    covariate_threshold: float = 0.2
    clip_speed: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.lr_patience < 1 or self.early_stop_patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and epoch limits must be positive")
        if self.batch < 1 or self.k < 1 or self.w < 1 or self.hidden < 1 or self.jobs < 1:
            raise ValueError("batch, k, w, hidden and jobs must be positive")
        if not (0.0 < self.lr_factor <= 1.0):
            raise ValueError("lr_factor must lie in (0, 1]")
        if self.lr_min > self.lr_init:
            raise ValueError("lr_min cannot exceed lr_init")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "TrainConfig":
        kwargs = {}
        for f in fields(cls):
            if f.name not in mapping or mapping[f.name] is None:
                continue
            raw = mapping[f.name]
            if f.type in ("int", int):
                kwargs[f.name] = int(raw)
            elif f.type in ("float", float):
                kwargs[f.name] = float(raw)
            elif f.type in ("bool", bool):
                kwargs[f.name] = raw if isinstance(raw, bool) else str(raw).lower() in ("1", "true", "yes", "on")
            else:
                kwargs[f.name] = raw
        return cls(**kwargs)


@dataclass
class TrainRecord:
    best_epoch: int
    best_val_loss: float
    epochs_run: int
    val_losses: list[float] = field(default_factory=list)
    lr_trace: list[float] = field(default_factory=list)


def job_rng(seed: int, stage: str, index: int, extra: Sequence[int] = ()) -> np.random.Generator:
    """Deterministic per-job generator derived from the root seed."""
    return np.random.default_rng([seed, _STAGE_CODE[stage], index, *extra])


def _snapshot(params: list[Tensor]) -> list[np.ndarray]:
    return [p.data.copy() for p in params]


def _restore(params: list[Tensor], snap: list[np.ndarray]) -> None:
    for p, s in zip(params, snap):
        p.data = s.copy()


def _loss_value(net, inputs: tuple[np.ndarray, ...], targets: np.ndarray) -> float:
    pred = net.forward(*[Tensor(a) for a in inputs])
    return float(mse_loss(Tensor(targets), pred).data)


def train_stage(
    net,
    train_inputs: tuple[np.ndarray, ...],
    train_targets: np.ndarray,
    val_inputs: tuple[np.ndarray, ...],
    val_targets: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
) -> TrainRecord:
    """Minimize batch MSE with Adam under the plateau schedule.

    The learning rate halves once validation loss has not strictly improved
    for lr_patience consecutive epochs (floored at lr_min); training stops
    after early_stop_patience stale epochs; the parameters of the best
    validation epoch are restored before returning.
    """
    n_train = train_targets.shape[0]
    n_val = val_targets.shape[0]
    if n_train == 0 or n_val == 0:
        raise ValueError("train_stage needs non-empty training and validation sets")
    params = net.parameters()
    state = adam_init(params, lr=config.lr_init)
    best_val = np.inf
    best_epoch = 0
    best_params = _snapshot(params)
    lr_wait = 0
    es_wait = 0
    record = TrainRecord(best_epoch=0, best_val_loss=np.inf, epochs_run=0)
    for epoch in range(1, config.max_epochs + 1):
        record.lr_trace.append(state.lr)
        order = rng.permutation(n_train)
        for lo in range(0, n_train, config.batch):
            idx = order[lo : lo + config.batch]
            zero_grads(params)
            pred = net.forward(*[Tensor(a[idx]) for a in train_inputs])
            loss = mse_loss(Tensor(train_targets[idx]), pred)
            backward(loss)
            adam_step(params, state)
        val_loss = _loss_value(net, val_inputs, val_targets)
        record.val_losses.append(val_loss)
        record.epochs_run = epoch
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = _snapshot(params)
            lr_wait = 0
            es_wait = 0
        else:
            lr_wait += 1
            es_wait += 1
            if lr_wait >= config.lr_patience:
                state.lr = max(state.lr * config.lr_factor, config.lr_min)
                lr_wait = 0
            if es_wait >= config.early_stop_patience:
                break
    _restore(params, best_params)
    record.best_epoch = best_epoch
    record.best_val_loss = best_val
    return record


# -- pipeline -------------------------------------------------------------------

@dataclass
class StationNets:
    """Everything needed to run one target variable's forecasts."""

    target: str
    stations: tuple[str, ...]
    hist_covariates: tuple[str, ...]
    fut_covariates: tuple[str, ...]
    w: int
    k: int
    hidden: int
    stats: NormStats
    temporal: dict[str, TemporalNet]
    spatial: dict[str, SpatialNet] = field(default_factory=dict)
    ensemble: dict[str, EnsembleNet] = field(default_factory=dict)
    fct_hour: int = 0


def _aligned_window_sets(
    frame: WeatherFrame,
    target: str,
    hist_covs,
    fut_covs,
    ranges: dict[str, tuple[int, int]],
    config: TrainConfig,
) -> dict[str, dict[str, list[SampleWindow]]]:
    """Per-set, per-station windows; forecast times must agree across stations."""
    per_station = {}
    for st in frame.stations:
        windows = make_windows(
            frame, st, target, hist_covs, fut_covs,
            w=config.w, k=config.k, fct_hour=config.fct_hour,
        )
        per_station[st] = assign_windows(windows, ranges)
    out: dict[str, dict[str, list[SampleWindow]]] = {}
    for name in ranges:
        out[name] = {st: per_station[st][name] for st in frame.stations}
        fct_sets = {tuple(w.fct for w in out[name][st]) for st in frame.stations}
        if len(fct_sets) != 1:
            raise DataError(f"stations disagree on {name} forecast times")
    return out


def _run_station_jobs(jobs: int, tasks: list[Callable[[], object]]) -> list[object]:
    if jobs <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]


def train_pipeline(
    frame: WeatherFrame,
    target: str,
    ranges: dict[str, tuple[int, int]],
    config: TrainConfig,
    hist_covariates=(),
    fut_covariates=(),
    through_stage: str = "ensemble",
) -> tuple[StationNets, dict[str, dict[str, TrainRecord]]]:
    """Run the staged training for one target over all stations.

    ranges must provide "train" and "val" timeline index ranges; earlier
    stages' parameters are frozen inputs to later stages.
    """
    if through_stage not in STAGES:
        raise ValueError(f"unknown stage {through_stage!r}")
    if "train" not in ranges or "val" not in ranges:
        raise ValueError("ranges must include 'train' and 'val'")
    n_stages = STAGES.index(through_stage) + 1
    stats = compute_stats(frame, ranges["train"])
    nframe = normalize_frame(frame, stats)
    window_sets = _aligned_window_sets(
        nframe, target, hist_covariates, fut_covariates,
        {"train": ranges["train"], "val": ranges["val"]}, config,
    )
    stations = frame.stations
    batches = {
        name: {st: batch_windows(ws) for st, ws in per_st.items() if ws}
        for name, per_st in window_sets.items()
    }
    for name in ("train", "val"):
        if len(batches[name]) != len(stations):
            raise ValueError(f"empty {name} set for at least one station")

    records: dict[str, dict[str, TrainRecord]] = {s: {} for s in STAGES[:n_stages]}
    nets = StationNets(
        target=target,
        stations=stations,
        hist_covariates=tuple(hist_covariates),
        fut_covariates=tuple(fut_covariates),
        w=config.w,
        k=config.k,
        hidden=config.hidden,
        stats=stats,
        temporal={},
        fct_hour=config.fct_hour,
    )

    def temporal_job(si: int):
        st = stations[si]
        rng = job_rng(config.seed, "temporal", si)
        net = TemporalNet.init(
            rng, 1 + len(hist_covariates), 1 + len(fut_covariates),
            w=config.w, k=config.k, hidden=config.hidden,
        )
        hist_tr, fut_tr, tgt_tr = batches["train"][st]
        hist_va, fut_va, tgt_va = batches["val"][st]
        rec = train_stage(net, (hist_tr, fut_tr), tgt_tr, (hist_va, fut_va), tgt_va, config, rng)
        return st, net, rec

    for st, net, rec in _run_station_jobs(config.jobs, [
        (lambda i=si: temporal_job(i)) for si in range(len(stations))
    ]):
        nets.temporal[st] = net
        records["temporal"][st] = rec
    if n_stages == 1:
        return nets, records

    # Stage two: frozen temporal nets produce the shared feature maps.
    reps = {}
    preds_l = {}
    for name in ("train", "val"):
        rep_list = []
        pr = {}
        for st in stations:
            p, r = temporal_forward(nets.temporal[st], window_sets[name][st])
            rep_list.append(r)
            pr[st] = p
        reps[name] = build_feature_map(rep_list)
        preds_l[name] = pr
    n_rep = reps["train"].shape[1]

    def spatial_job(si: int):
        st = stations[si]
        rng = job_rng(config.seed, "spatial", si)
        net = SpatialNet.init(rng, n_rep, len(stations), k=config.k)
        tgt_tr = batches["train"][st][2]
        tgt_va = batches["val"][st][2]
        rec = train_stage(net, (reps["train"],), tgt_tr, (reps["val"],), tgt_va, config, rng)
        return st, net, rec

    for st, net, rec in _run_station_jobs(config.jobs, [
        (lambda i=si: spatial_job(i)) for si in range(len(stations))
    ]):
        nets.spatial[st] = net
        records["spatial"][st] = rec
    if n_stages == 2:
        return nets, records

    # Stage three: blend the two frozen prediction streams.
    preds_s = {
        name: {st: spatial_forward(nets.spatial[st], reps[name]) for st in stations}
        for name in ("train", "val")
    }

    def ensemble_job(si: int):
        st = stations[si]
        rng = job_rng(config.seed, "ensemble", si)
        net = ensemble_init(config.k)
        tgt_tr = batches["train"][st][2]
        tgt_va = batches["val"][st][2]
        rec = train_stage(
            net,
            (preds_l["train"][st], preds_s["train"][st]), tgt_tr,
            (preds_l["val"][st], preds_s["val"][st]), tgt_va,
            config, rng,
        )
        return st, net, rec

    for st, net, rec in _run_station_jobs(config.jobs, [
        (lambda i=si: ensemble_job(i)) for si in range(len(stations))
    ]):
        nets.ensemble[st] = net
        records["ensemble"][st] = rec
    return nets, records


def train_history_baseline(
    frame: WeatherFrame,
    target: str,
    ranges: dict[str, tuple[int, int]],
    config: TrainConfig,
) -> tuple[dict[str, HistoryLSTM], NormStats]:
    """History-only recurrent baseline, one net per station."""
    stats = compute_stats(frame, ranges["train"])
    nframe = normalize_frame(frame, stats)
    window_sets = _aligned_window_sets(
        nframe, target, (), (), {"train": ranges["train"], "val": ranges["val"]}, config
    )
    nets = {}
    for si, st in enumerate(frame.stations):
        rng = job_rng(config.seed, "history", si)
        net = HistoryLSTM.init(rng, 1, w=config.w, k=config.k, hidden=config.hidden)
        hist_tr, _, tgt_tr = batch_windows(window_sets["train"][st])
        hist_va, _, tgt_va = batch_windows(window_sets["val"][st])
        train_stage(net, (hist_tr,), tgt_tr, (hist_va,), tgt_va, config, rng)
        nets[st] = net
    return nets, stats


# -- inference --------------------------------------------------------------------

@dataclass
class PredictionSet:
    """Denormalized K-horizon forecasts per station and forecast time."""

    stations: tuple[str, ...]
    fct_indices: tuple[int, ...]
    k: int
    values: dict[str, np.ndarray]       # variable -> [n_fct, n_stations, k]
    calm: np.ndarray | None = None      # where derived direction is undefined


def _stage_predictions(
    nets: StationNets, nframe: WeatherFrame, fcts: Sequence[int], stage: str
) -> np.ndarray:
    window_lists = {}
    for st in nets.stations:
        windows = make_windows(
            nframe, st, nets.target, nets.hist_covariates, nets.fut_covariates,
            w=nets.w, k=nets.k, fct_hour=nets.fct_hour,
        )
        by_fct = {w.fct: w for w in windows}
        try:
            window_lists[st] = [by_fct[t] for t in fcts]
        except KeyError as exc:
            raise ValueError(f"no window available at forecast index {exc.args[0]}") from None
    out = np.empty((len(fcts), len(nets.stations), nets.k))
    preds_l = {}
    reps = []
    for st in nets.stations:
        p, r = temporal_forward(nets.temporal[st], window_lists[st])
        preds_l[st] = p
        reps.append(r)
    if stage == "temporal":
        for si, st in enumerate(nets.stations):
            out[:, si, :] = preds_l[st]
        return out
    if not nets.spatial:
        raise ValueError("spatial stage requested but the pipeline stopped at temporal")
    maps = build_feature_map(reps)
    preds_s = {st: spatial_forward(nets.spatial[st], maps) for st in nets.stations}
    if stage == "spatial":
        for si, st in enumerate(nets.stations):
            out[:, si, :] = preds_s[st]
        return out
    if not nets.ensemble:
        raise ValueError("ensemble stage requested but the pipeline stopped earlier")
    for si, st in enumerate(nets.stations):
        blended = nets.ensemble[st].forward(
            Tensor(preds_l[st]), Tensor(preds_s[st])
        ).data
        out[:, si, :] = blended
    return out


def predict(
    nets_by_target: dict[str, StationNets],
    frame: WeatherFrame,
    fcts: Sequence[int] | None = None,
    stage: str = "ensemble",
    clip_speed: bool = False,
) -> PredictionSet:
    """Denormalized forecasts for every trained target, plus derived direction.

    Direction comes from the predicted wind components wherever both
    pipelines are present; horizons with an exactly zero predicted vector
    are flagged calm and left NaN.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    if not nets_by_target:
        raise ValueError("predict needs at least one trained target")
    some = next(iter(nets_by_target.values()))
    stations = some.stations
    k = some.k
    if fcts is None:
        fcts = eligible_fcts(frame, some.w, k, some.fct_hour)
    fcts = tuple(int(t) for t in fcts)
    values: dict[str, np.ndarray] = {}
    for target, nets in nets_by_target.items():
        if nets.stations != stations or nets.k != k:
            raise ValueError("trained targets disagree on stations or horizon count")
        nframe = normalize_frame(frame, nets.stats)
        normed = _stage_predictions(nets, nframe, fcts, stage)
        denorm = np.empty_like(normed)
        for si, st in enumerate(stations):
            mean, std = nets.stats.obs(frame, st, target)
            denorm[:, si, :] = normed[:, si, :] * std + mean
        if target == "v" and clip_speed:
            denorm = np.maximum(denorm, 0.0)
        values[target] = denorm
    calm = None
    if "vx" in values and "vy" in values:
        theta, calm = recover_direction_masked(values["vx"], values["vy"])
        values["theta"] = theta
    return PredictionSet(stations=stations, fct_indices=fcts, k=k, values=values, calm=calm)


def dump_predictions(pset: PredictionSet, frame: WeatherFrame, path) -> None:
    """Write `fct, station, horizon, variable, truth, pred` rows as CSV."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fct", "station", "horizon", "variable", "truth", "pred"])
        for fi, t in enumerate(pset.fct_indices):
            stamp = str(frame.timeline[t])
            for si, st in enumerate(pset.stations):
                for var, arr in sorted(pset.values.items()):
                    vi = frame.var_index(var)
                    for h in range(pset.k):
                        truth = frame.obs[t + 1 + h, vi, si]
                        pred = arr[fi, si, h]
                        writer.writerow([
                            stamp, st, h + 1, var,
                            "" if np.isnan(truth) else f"{truth:.6f}",
                            "" if np.isnan(pred) else f"{pred:.6f}",
                        ])
