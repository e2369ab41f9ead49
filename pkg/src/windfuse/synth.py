"""Synthetic multi-station weather generator for desk-scale verification.

Per-station truth is a diurnal sine plus a shared regional AR(1) component
(scaled by the spatial correlation strength) plus station-local AR(1)
noise. The forecast stream tracks the shared signal with additive noise;
per-station forecast biases are realized as offsets between the shared
signal and each station's truth, so a single stream serves every station.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import HOURS_PER_DAY, decompose_wind

__all__ = ["SynthSpec", "SynthData", "generate", "write_observation_file", "write_nwp_file", "synthesize_files"]


@dataclass(frozen=True)
class SynthSpec:
    stations: int = 3
    days: int = 30
    base_speed: float = 5.0
    diurnal_amplitude: float = 2.0
    ar_coeff: float = 0.8
    ar_noise: float = 0.15
    nwp_bias: float | tuple[float, ...] = 1.0
    nwp_noise: float = 0.15
    spatial_strength: float = 2.5
    seed: int = 0
    start: str = "2021-01-01"

    def __post_init__(self):
        if self.stations < 1:
            raise ValueError("need at least one station")
        if self.days < 3:
            raise ValueError("need at least three days")
        if not (-1.0 < self.ar_coeff < 1.0):
            raise ValueError("AR coefficient must lie in (-1, 1)")
        if self.ar_noise < 0 or self.nwp_noise < 0 or self.spatial_strength < 0:
            raise ValueError("noise and strength scales must be non-negative")
        biases = self.station_biases()
        if len(biases) != self.stations:
            raise ValueError("nwp_bias must be a scalar or one value per station")

    def station_biases(self) -> tuple[float, ...]:
        if isinstance(self.nwp_bias, (int, float)):
            return tuple(float(self.nwp_bias) for _ in range(self.stations))
        return tuple(float(b) for b in self.nwp_bias)


@dataclass(frozen=True)
class SynthData:
    timeline: np.ndarray            # datetime64[h]
    stations: tuple[str, ...]
    obs: dict[str, np.ndarray]      # variable -> [T, n_stations]
    nwp: dict[str, np.ndarray]      # variable -> [T]


def _ar1(rng: np.random.Generator, n: int, coeff: float, scale: float) -> np.ndarray:
    out = np.zeros(n)
    if scale == 0.0:
        return out
    eps = rng.normal(0.0, scale, size=n)
    out[0] = eps[0] / np.sqrt(max(1.0 - coeff * coeff, 1e-12))
    for t in range(1, n):
        out[t] = coeff * out[t - 1] + eps[t]
    return out


def _wrap_degrees(values: np.ndarray) -> np.ndarray:
    out = np.mod(values, 360.0)
    return np.where(out == 0.0, 360.0, out)


def generate(spec: SynthSpec) -> SynthData:
    rng = np.random.default_rng(spec.seed)
    n = spec.days * HOURS_PER_DAY
    t = np.arange(n)
    hours = t % HOURS_PER_DAY
    timeline = np.datetime64(spec.start, "h") + t.astype("timedelta64[h]")
    stations = tuple(f"S{i + 1}" for i in range(spec.stations))
    biases = np.array(spec.station_biases())

    diurnal = spec.diurnal_amplitude * np.sin(2.0 * np.pi * hours / HOURS_PER_DAY)
    regional = spec.spatial_strength * _ar1(rng, n, spec.ar_coeff, spec.ar_noise)
    shared_v = spec.base_speed + diurnal + regional

    dir_diurnal = 40.0 * np.sin(2.0 * np.pi * hours / HOURS_PER_DAY + 1.0)
    dir_regional = 30.0 * spec.spatial_strength * _ar1(rng, n, spec.ar_coeff, spec.ar_noise)
    shared_dir = 200.0 + dir_diurnal + dir_regional

    # auxiliary shared signals, loosely weather shaped
    shared_tp = 289.0 + 6.0 * np.sin(2.0 * np.pi * hours / HOURS_PER_DAY - 0.5) \
        + 2.0 * _ar1(rng, n, spec.ar_coeff, spec.ar_noise)
    shared_rh = 50.0 + 15.0 * np.sin(2.0 * np.pi * hours / HOURS_PER_DAY + 2.0) \
        + 5.0 * _ar1(rng, n, spec.ar_coeff, spec.ar_noise)
    shared_slp = 1011.0 + 4.0 * np.sin(2.0 * np.pi * t / (HOURS_PER_DAY * 7)) \
        + 2.0 * _ar1(rng, n, spec.ar_coeff, spec.ar_noise)

    obs = {name: np.empty((n, spec.stations)) for name in ("v", "theta", "tp", "rh", "slp")}
    for si in range(spec.stations):
        local_v = _ar1(rng, n, spec.ar_coeff, spec.ar_noise)
        # the forecast stream carries the shared signal, so station i sees it
        # biased by exactly biases[i]
        obs["v"][:, si] = np.maximum(shared_v - biases[si] + local_v, 0.0)
        local_dir = 20.0 * _ar1(rng, n, spec.ar_coeff, spec.ar_noise)
        obs["theta"][:, si] = _wrap_degrees(shared_dir + local_dir)
        obs["tp"][:, si] = shared_tp + 0.5 * _ar1(rng, n, spec.ar_coeff, spec.ar_noise)
        obs["rh"][:, si] = np.clip(shared_rh + 2.0 * _ar1(rng, n, spec.ar_coeff, spec.ar_noise), 1.0, 99.0)
        obs["slp"][:, si] = shared_slp + 0.5 * _ar1(rng, n, spec.ar_coeff, spec.ar_noise)

    def nwp_noise():
        if spec.nwp_noise == 0.0:
            return np.zeros(n)
        return rng.normal(0.0, spec.nwp_noise, size=n)

    nwp_v = np.maximum(shared_v + nwp_noise(), 0.0)
    nwp_theta = _wrap_degrees(shared_dir + 20.0 * nwp_noise())
    nwp_vx, nwp_vy = decompose_wind(nwp_v, nwp_theta)
    nwp = {
        "v": nwp_v,
        "vx": np.asarray(nwp_vx),
        "vy": np.asarray(nwp_vy),
        "theta": nwp_theta,
        "tp": shared_tp + 0.5 * nwp_noise(),
        "rh": np.clip(shared_rh + 2.0 * nwp_noise(), 1.0, 99.0),
        "slp": shared_slp + 0.5 * nwp_noise(),
    }
    return SynthData(timeline=timeline, stations=stations, obs=obs, nwp=nwp)


def write_observation_file(data: SynthData, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "station", "v", "theta", "tp", "rh", "slp"])
        for ti, stamp in enumerate(data.timeline):
            iso = str(stamp) + ":00:00"
            for si, st in enumerate(data.stations):
                writer.writerow([
                    iso, st,
                    f"{data.obs['v'][ti, si]:.6f}",
                    f"{data.obs['theta'][ti, si]:.6f}",
                    f"{data.obs['tp'][ti, si]:.6f}",
                    f"{data.obs['rh'][ti, si]:.6f}",
                    f"{data.obs['slp'][ti, si]:.6f}",
                ])


def write_nwp_file(data: SynthData, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "v", "vx", "vy", "theta", "tp", "rh", "slp"])
        for ti, stamp in enumerate(data.timeline):
            iso = str(stamp) + ":00:00"
            writer.writerow([
                iso,
                f"{data.nwp['v'][ti]:.6f}",
                f"{data.nwp['vx'][ti]:.6f}",
                f"{data.nwp['vy'][ti]:.6f}",
                f"{data.nwp['theta'][ti]:.6f}",
                f"{data.nwp['tp'][ti]:.6f}",
                f"{data.nwp['rh'][ti]:.6f}",
                f"{data.nwp['slp'][ti]:.6f}",
            ])


def synthesize_files(spec: SynthSpec, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(spec)
    obs_path = out / "observations.csv"
    nwp_path = out / "nwp.csv"
    write_observation_file(data, obs_path)
    write_nwp_file(data, nwp_path)
    return obs_path, nwp_path
