"""Versioned binary checkpoints for trained station networks.

One ``.npz`` per (target, station, stage) holding the parameter arrays
plus a JSON metadata blob with format version, layer shapes and the
normalization statistics, so a checkpoint is self-describing.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import VARIABLES, NormStats
from .ensemble import EnsembleNet
from .errors import DataError
from .numerics import LSTMParams, Tensor
from .spatial import SpatialNet
from .temporal import TemporalNet
from .training import StationNets

__all__ = ["save_station_nets", "load_station_nets", "FORMAT_VERSION"]

FORMAT_VERSION = 1

_LSTM_FIELDS = ("w_ix", "w_ih", "b_i", "w_fx", "w_fh", "b_f",
                "w_ox", "w_oh", "b_o", "w_cx", "w_ch", "b_c")
_TEMPORAL_FIELDS = ("mlp_h_w", "mlp_h_b", "mlp_f_w", "mlp_f_b",
                    "mlp_l_hidden_w", "mlp_l_hidden_b", "mlp_l_out_w", "mlp_l_out_b")
_SPATIAL_FIELDS = ("filters", "conv_bias", "out_w", "out_b")


def _stats_to_json(stats: NormStats) -> dict:
    return {
        "obs_mean": stats.obs_mean.tolist(),
        "obs_std": stats.obs_std.tolist(),
        "nwp_mean": stats.nwp_mean.tolist(),
        "nwp_std": stats.nwp_std.tolist(),
    }


def _stats_from_json(blob: dict) -> NormStats:
    return NormStats(
        obs_mean=np.array(blob["obs_mean"]),
        obs_std=np.array(blob["obs_std"]),
        nwp_mean=np.array(blob["nwp_mean"]),
        nwp_std=np.array(blob["nwp_std"]),
    )


def _write(path: Path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    arrays = dict(arrays)
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def _read(path: Path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path) as blob:
        arrays = {k: blob[k] for k in blob.files if k != "meta"}
        meta = json.loads(bytes(blob["meta"]).decode())
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {meta.get('format_version')}")
    return arrays, meta


def save_station_nets(nets: StationNets, out_dir) -> list[Path]:
    """Write one checkpoint per (station, stage) plus a target manifest."""
    root = Path(out_dir) / nets.target
    root.mkdir(parents=True, exist_ok=True)
    base_meta = {
        "format_version": FORMAT_VERSION,
        "target": nets.target,
        "stations": list(nets.stations),
        "hist_covariates": list(nets.hist_covariates),
        "fut_covariates": list(nets.fut_covariates),
        "w": nets.w,
        "k": nets.k,
        "hidden": nets.hidden,
        "fct_hour": nets.fct_hour,
        "stats": _stats_to_json(nets.stats),
        "variables": list(VARIABLES),
    }
    written = []
    for st in nets.stations:
        tnet = nets.temporal[st]
        arrays = {f"lstm.{name}": getattr(tnet.lstm, name).data for name in _LSTM_FIELDS}
        arrays.update({name: getattr(tnet, name).data for name in _TEMPORAL_FIELDS})
        meta = dict(base_meta, station=st, stage="temporal",
                    shapes={k: list(v.shape) for k, v in arrays.items()})
        path = root / f"{st}.temporal.npz"
        _write(path, arrays, meta)
        written.append(path)
        if st in nets.spatial:
            snet = nets.spatial[st]
            arrays = {name: getattr(snet, name).data for name in _SPATIAL_FIELDS}
            meta = dict(base_meta, station=st, stage="spatial", n=snet.n, pool=snet.pool,
                        shapes={k: list(v.shape) for k, v in arrays.items()})
            path = root / f"{st}.spatial.npz"
            _write(path, arrays, meta)
            written.append(path)
        if st in nets.ensemble:
            enet = nets.ensemble[st]
            arrays = {"w_l": enet.w_l.data, "w_s": enet.w_s.data}
            meta = dict(base_meta, station=st, stage="ensemble",
                        shapes={k: list(v.shape) for k, v in arrays.items()})
            path = root / f"{st}.ensemble.npz"
            _write(path, arrays, meta)
            written.append(path)
    with open(root / "manifest.json", "w") as fh:
        json.dump(base_meta, fh, sort_keys=True, indent=1)
    return written


def _param(arr: np.ndarray) -> Tensor:
    return Tensor(arr.copy(), requires_grad=True)


def load_station_nets(out_dir, target: str) -> StationNets:
    root = Path(out_dir) / target
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{manifest_path}: unsupported checkpoint version")
    stations = tuple(manifest["stations"])
    nets = StationNets(
        target=target,
        stations=stations,
        hist_covariates=tuple(manifest["hist_covariates"]),
        fut_covariates=tuple(manifest["fut_covariates"]),
        w=manifest["w"],
        k=manifest["k"],
        hidden=manifest["hidden"],
        stats=_stats_from_json(manifest["stats"]),
        temporal={},
        fct_hour=manifest.get("fct_hour", 0),
    )
    for st in stations:
        arrays, meta = _read(root / f"{st}.temporal.npz")
        lstm = LSTMParams(**{name: _param(arrays[f"lstm.{name}"]) for name in _LSTM_FIELDS})
        nets.temporal[st] = TemporalNet(
            lstm=lstm,
            **{name: _param(arrays[name]) for name in _TEMPORAL_FIELDS},
            w=meta["w"], k=meta["k"],
            hist_features=1 + len(nets.hist_covariates),
            fut_features=1 + len(nets.fut_covariates),
            hidden=meta["hidden"],
        )
        spath = root / f"{st}.spatial.npz"
        if spath.exists():
            arrays, meta = _read(spath)
            nets.spatial[st] = SpatialNet(
                **{name: _param(arrays[name]) for name in _SPATIAL_FIELDS},
                n=meta["n"], k=meta["k"], pool=meta["pool"],
            )
        epath = root / f"{st}.ensemble.npz"
        if epath.exists():
            arrays, _ = _read(epath)
            nets.ensemble[st] = EnsembleNet(w_l=_param(arrays["w_l"]), w_s=_param(arrays["w_s"]))
    return nets
