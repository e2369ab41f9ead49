"""Weather data handling: ingestion, cleaning, windowing and split planning.

Observation files are long-format CSV (one row per station-hour) with the
raw measured variables; the two wind components are always derived from
speed and direction at ingestion, never read from disk. NWP files carry a
single forecast stream shared by every station.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import CalmWindError, DataError

__all__ = [
    "VARIABLES",
    "RAW_OBS_VARIABLES",
    "WeatherFrame",
    "SampleWindow",
    "Fold",
    "SplitPlan",
    "decompose_wind",
    "recover_direction",
    "recover_direction_masked",
    "fill_missing",
    "normalize",
    "denormalize",
    "series_stats",
    "NormStats",
    "compute_stats",
    "normalize_frame",
    "load_observations",
    "load_nwp",
    "build_frame",
    "fill_frame",
    "make_windows",
    "eligible_fcts",
    "month_intervals",
    "plan_splits",
    "fold_index_ranges",
    "assign_windows",
    "correlation_diagnostics",
    "CorrelationDiagnostics",
]

VARIABLES = ("v", "vx", "vy", "theta", "tp", "rh", "slp")
RAW_OBS_VARIABLES = ("v", "theta", "tp", "rh", "slp")
OBS_FILE_FIELDS = ("timestamp", "station") + RAW_OBS_VARIABLES
NWP_FILE_FIELDS = ("timestamp",) + VARIABLES
HOURS_PER_DAY = 24

_VAR_INDEX = {name: i for i, name in enumerate(VARIABLES)}


# -- wind geometry -----------------------------------------------------------

def decompose_wind(v, theta):
    """Split wind speed and direction into signed lateral/longitudinal parts.

    v must be non-negative; theta in degrees in (0, 360].
    """
    v = np.asarray(v, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("wind speed must be non-negative")
    if np.any((theta <= 0) | (theta > 360)):
        raise ValueError("wind direction must lie in (0, 360] degrees")
    rad = theta / 360.0 * 2.0 * np.pi
    vx = -v * np.sin(rad)
    vy = -v * np.cos(rad)
    if vx.ndim == 0:
        return float(vx), float(vy)
    return vx, vy


def _direction_from_components(vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
    deg = np.degrees(np.arctan2(-vx, -vy)) % 360.0
    return np.where(deg == 0.0, 360.0, deg)


def recover_direction(vx, vy):
    """Invert the decomposition back to a direction in (0, 360] degrees.

    Raises CalmWindError when both components are zero anywhere.
    """
    vx = np.asarray(vx, dtype=np.float64)
    vy = np.asarray(vy, dtype=np.float64)
    calm = (vx == 0.0) & (vy == 0.0)
    if np.any(calm):
        raise CalmWindError("direction undefined for zero wind vector")
    theta = _direction_from_components(vx, vy)
    if theta.ndim == 0:
        return float(theta)
    return theta


def recover_direction_masked(vx, vy):
    """Vectorized direction recovery; calm entries become NaN with a mask."""
    vx = np.asarray(vx, dtype=np.float64)
    vy = np.asarray(vy, dtype=np.float64)
    calm = (vx == 0.0) & (vy == 0.0)
    theta = _direction_from_components(vx, vy)
    theta = np.where(calm, np.nan, theta)
    return theta, calm


# -- series cleaning and scaling ----------------------------------------------

def fill_missing(series) -> np.ndarray:
    """Replace NaNs with the mean of the nearest present neighbours.

    Interior gaps take the average of the closest present value looking
    backward and forward; gaps touching a boundary copy the single
    available neighbour. Present values are never altered.
    """
    s = np.asarray(series, dtype=np.float64).copy()
    present = np.flatnonzero(~np.isnan(s))
    if present.size == 0:
        raise DataError("cannot fill a series with no present values")
    missing = np.flatnonzero(np.isnan(s))
    if missing.size == 0:
        return s
    right = np.searchsorted(present, missing)
    has_prev = right > 0
    has_next = right < present.size
    prev_val = np.where(has_prev, s[present[np.clip(right - 1, 0, None)]], np.nan)
    next_val = np.where(has_next, s[present[np.clip(right, None, present.size - 1)]], np.nan)
    filled = np.where(
        has_prev & has_next,
        0.5 * (prev_val + next_val),
        np.where(has_prev, prev_val, next_val),
    )
    s[missing] = filled
    return s


def series_stats(series) -> tuple[float, float]:
    """Mean and standard deviation; a constant series falls back to std 1."""
    s = np.asarray(series, dtype=np.float64)
    mean = float(s.mean())
    std = float(s.std())
    if std == 0.0:
        std = 1.0
    return mean, std


def normalize(series, mean: float, std: float) -> np.ndarray:
    return (np.asarray(series, dtype=np.float64) - mean) / std


def denormalize(series, mean: float, std: float) -> np.ndarray:
    return np.asarray(series, dtype=np.float64) * std + mean


# -- the aligned frame ---------------------------------------------------------

@dataclass(frozen=True)
class WeatherFrame:
    """Aligned hourly observation and NWP series.

    obs is [T, len(VARIABLES), n_stations] with NaN for missing values;
    nwp is [T, len(VARIABLES)] shared by all stations.
    """

    timeline: np.ndarray  # datetime64[h], strictly hourly
    stations: tuple[str, ...]
    obs: np.ndarray
    nwp: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.timeline)

    def hour_of_day(self) -> np.ndarray:
        return (self.timeline - self.timeline.astype("datetime64[D]")).astype(int)

    def var_index(self, name: str) -> int:
        try:
            return _VAR_INDEX[name]
        except KeyError:
            raise ValueError(f"unknown variable {name!r}; expected one of {VARIABLES}") from None

    def station_index(self, station: str) -> int:
        try:
            return self.stations.index(station)
        except ValueError:
            raise ValueError(f"unknown station {station!r}") from None

    def obs_series(self, station: str, variable: str) -> np.ndarray:
        return self.obs[:, self.var_index(variable), self.station_index(station)]

    def nwp_series(self, variable: str) -> np.ndarray:
        return self.nwp[:, self.var_index(variable)]


def _check_hourly(timeline: np.ndarray, what: str) -> None:
    if len(timeline) == 0:
        raise DataError(f"{what}: empty timeline")
    gaps = np.diff(timeline).astype("timedelta64[h]").astype(int)
    if np.any(gaps != 1):
        raise DataError(f"{what}: timeline is not strictly hourly with no gaps")


def _parse_timestamp(text: str, where: str) -> np.datetime64:
    try:
        return np.datetime64(datetime.fromisoformat(text.strip())).astype("datetime64[h]")
    except ValueError:
        raise DataError(f"{where}: bad timestamp {text!r}") from None


def _parse_float(text: str, where: str) -> float:
    text = text.strip()
    if text == "":
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{where}: bad numeric value {text!r}") from None


def load_observations(path) -> tuple[np.ndarray, tuple[str, ...], np.ndarray]:
    """Read an observation CSV into (timeline, stations, raw values).

    Returns values shaped [T, len(RAW_OBS_VARIABLES), n_stations] with NaN
    for empty fields. Stations are sorted for a canonical channel order.
    """
    rows: dict[str, dict[np.datetime64, list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != OBS_FILE_FIELDS:
            raise DataError(f"{path}: expected header {','.join(OBS_FILE_FIELDS)}")
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(OBS_FILE_FIELDS):
                raise DataError(f"{path}:{ln}: expected {len(OBS_FILE_FIELDS)} fields")
            ts = _parse_timestamp(row[0], f"{path}:{ln}")
            station = row[1].strip()
            vals = [_parse_float(x, f"{path}:{ln}") for x in row[2:]]
            rows.setdefault(station, {})[ts] = vals
    if not rows:
        raise DataError(f"{path}: no observation rows")
    stations = tuple(sorted(rows))
    timestamps = None
    for st in stations:
        keys = set(rows[st])
        if timestamps is None:
            timestamps = keys
        elif keys != timestamps:
            raise DataError(f"{path}: stations do not share a common timeline")
    timeline = np.array(sorted(timestamps), dtype="datetime64[h]")
    _check_hourly(timeline, str(path))
    values = np.empty((len(timeline), len(RAW_OBS_VARIABLES), len(stations)))
    for si, st in enumerate(stations):
        st_rows = rows[st]
        for ti, ts in enumerate(timeline):
            values[ti, :, si] = st_rows[ts]
    return timeline, stations, values


def load_nwp(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an NWP CSV into (timeline, values [T, len(VARIABLES)]).

    Any missing value is a hard error: the forecast stream must be complete.
    """
    stamps: list[np.datetime64] = []
    values: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != NWP_FILE_FIELDS:
            raise DataError(f"{path}: expected header {','.join(NWP_FILE_FIELDS)}")
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(NWP_FILE_FIELDS):
                raise DataError(f"{path}:{ln}: expected {len(NWP_FILE_FIELDS)} fields")
            stamps.append(_parse_timestamp(row[0], f"{path}:{ln}"))
            vals = [_parse_float(x, f"{path}:{ln}") for x in row[1:]]
            if any(np.isnan(v) for v in vals):
                raise DataError(f"{path}:{ln}: missing NWP value")
            values.append(vals)
    if not stamps:
        raise DataError(f"{path}: no NWP rows")
    order = np.argsort(np.array(stamps, dtype="datetime64[h]"))
    timeline = np.array(stamps, dtype="datetime64[h]")[order]
    _check_hourly(timeline, str(path))
    return timeline, np.array(values)[order]


def build_frame(obs_path, nwp_path) -> WeatherFrame:
    """Ingest and align both files on their common hourly timeline.

    Wind components are derived from (v, theta) wherever both are present;
    missing raw values stay NaN until `fill_frame`.
    """
    obs_tl, stations, raw = load_observations(obs_path)
    nwp_tl, nwp_vals = load_nwp(nwp_path)
    common = np.intersect1d(obs_tl, nwp_tl)
    if common.size == 0:
        raise DataError("observation and NWP files share no timestamps")
    _check_hourly(common, "aligned timeline")
    obs_sel = np.searchsorted(obs_tl, common)
    nwp_sel = np.searchsorted(nwp_tl, common)
    raw = raw[obs_sel]
    nwp_vals = nwp_vals[nwp_sel]

    T, _, V = raw.shape
    obs = np.full((T, len(VARIABLES), V), np.nan)
    raw_map = {name: i for i, name in enumerate(RAW_OBS_VARIABLES)}
    v = raw[:, raw_map["v"], :]
    theta = raw[:, raw_map["theta"], :]
    if np.any(v[~np.isnan(v)] < 0):
        raise DataError("observed wind speed must be non-negative")
    th_present = theta[~np.isnan(theta)]
    if np.any((th_present <= 0) | (th_present > 360)):
        raise DataError("observed wind direction must lie in (0, 360] degrees")
    both = ~np.isnan(v) & ~np.isnan(theta)
    vx = np.full_like(v, np.nan)
    vy = np.full_like(v, np.nan)
    if np.any(both):
        vx[both], vy[both] = decompose_wind(v[both], theta[both])
    obs[:, _VAR_INDEX["v"], :] = v
    obs[:, _VAR_INDEX["vx"], :] = vx
    obs[:, _VAR_INDEX["vy"], :] = vy
    obs[:, _VAR_INDEX["theta"], :] = theta
    for name in ("tp", "rh", "slp"):
        obs[:, _VAR_INDEX[name], :] = raw[:, raw_map[name], :]
    return WeatherFrame(timeline=common, stations=stations, obs=obs, nwp=nwp_vals)


def fill_frame(frame: WeatherFrame) -> WeatherFrame:
    """Fill every raw observation series, then rederive the wind components."""
    obs = frame.obs.copy()
    for si in range(len(frame.stations)):
        for name in RAW_OBS_VARIABLES:
            vi = _VAR_INDEX[name]
            obs[:, vi, si] = fill_missing(obs[:, vi, si])
        v = obs[:, _VAR_INDEX["v"], si]
        theta = obs[:, _VAR_INDEX["theta"], si]
        vx, vy = decompose_wind(v, theta)
        obs[:, _VAR_INDEX["vx"], si] = vx
        obs[:, _VAR_INDEX["vy"], si] = vy
    return WeatherFrame(frame.timeline, frame.stations, obs, frame.nwp.copy())


# -- normalization over a frame -------------------------------------------------

@dataclass(frozen=True)
class NormStats:
    """Per-series z-score statistics, computed on training timestamps only."""

    obs_mean: np.ndarray  # [len(VARIABLES), n_stations]
    obs_std: np.ndarray
    nwp_mean: np.ndarray  # [len(VARIABLES)]
    nwp_std: np.ndarray

    def obs(self, frame: WeatherFrame, station: str, variable: str) -> tuple[float, float]:
        vi = frame.var_index(variable)
        si = frame.station_index(station)
        return float(self.obs_mean[vi, si]), float(self.obs_std[vi, si])


def compute_stats(frame: WeatherFrame, train_range: tuple[int, int]) -> NormStats:
    lo, hi = train_range
    if not (0 <= lo < hi <= frame.n_steps):
        raise ValueError(f"bad training range {train_range} for frame of {frame.n_steps} steps")
    obs_slice = frame.obs[lo:hi]
    nwp_slice = frame.nwp[lo:hi]
    obs_mean = obs_slice.mean(axis=0)
    obs_std = obs_slice.std(axis=0)
    obs_std[obs_std == 0.0] = 1.0
    nwp_mean = nwp_slice.mean(axis=0)
    nwp_std = nwp_slice.std(axis=0)
    nwp_std[nwp_std == 0.0] = 1.0
    return NormStats(obs_mean, obs_std, nwp_mean, nwp_std)


def normalize_frame(frame: WeatherFrame, stats: NormStats) -> WeatherFrame:
    obs = (frame.obs - stats.obs_mean[None, :, :]) / stats.obs_std[None, :, :]
    nwp = (frame.nwp - stats.nwp_mean[None, :]) / stats.nwp_std[None, :]
    return WeatherFrame(frame.timeline, frame.stations, obs, nwp)


# -- windowing -------------------------------------------------------------------

@dataclass(frozen=True)
class SampleWindow:
    """One training or inference instance anchored at forecast creation index fct.

    history covers timeline indices [fct - w + 1, fct], future and target
    cover [fct + 1, fct + k].
    """

    fct: int
    history: np.ndarray  # [w, 1 + n_hist_covariates]
    future: np.ndarray   # [k, 1 + n_future_covariates]
    target: np.ndarray   # [k]

    @property
    def span(self) -> tuple[int, int]:
        w = self.history.shape[0]
        k = self.target.shape[0]
        return self.fct - w + 1, self.fct + k


def eligible_fcts(frame: WeatherFrame, w: int = 24, k: int = 24, fct_hour: int = 0) -> list[int]:
    """Forecast creation indices whose full history and future fit the frame.

    The creation index t sits immediately before the first target hour, so
    with fct_hour=0 each target block is one calendar day and the history
    block is the preceding day.
    """
    hours = frame.hour_of_day()
    out = []
    for t in range(frame.n_steps - 1):
        if hours[t + 1] != fct_hour:
            continue
        if t - w + 1 < 0 or t + k >= frame.n_steps:
            continue
        out.append(t)
    return out


def make_windows(
    frame: WeatherFrame,
    station: str,
    target_variable: str,
    hist_covariates=(),
    fut_covariates=(),
    w: int = 24,
    k: int = 24,
    fct_hour: int = 0,
) -> list[SampleWindow]:
    """Cut chronological windows for one station and target variable.

    Column order is target first, then covariates as given. The frame must
    be complete (filled); NaN inside a window is a data error.
    """
    if w < 1 or k < 1:
        raise ValueError("window sizes w and k must be at least 1")
    si = frame.station_index(station)
    hist_idx = [frame.var_index(target_variable)] + [frame.var_index(c) for c in hist_covariates]
    fut_idx = [frame.var_index(target_variable)] + [frame.var_index(c) for c in fut_covariates]
    windows = []
    for t in eligible_fcts(frame, w, k, fct_hour):
        history = frame.obs[t - w + 1 : t + 1, hist_idx, si]
        future = frame.nwp[t + 1 : t + k + 1, fut_idx]
        target = frame.obs[t + 1 : t + k + 1, frame.var_index(target_variable), si]
        if np.isnan(history).any() or np.isnan(future).any() or np.isnan(target).any():
            raise DataError(f"window at index {t} contains missing values; fill the frame first")
        windows.append(SampleWindow(fct=t, history=history.copy(), future=future.copy(), target=target.copy()))
    return windows


# -- evaluation splits -------------------------------------------------------------

@dataclass(frozen=True)
class Fold:
    train: tuple[int, ...]  # interval indices, consecutive
    val: int
    test: int


@dataclass(frozen=True)
class SplitPlan:
    mode: str  # "rolling" or "incremental"
    n_intervals: int
    folds: tuple[Fold, ...]


def month_intervals(timeline: np.ndarray) -> list[tuple[int, int]]:
    """Index ranges [start, end) of whole calendar months inside the timeline.

    Partial months at either edge are dropped.
    """
    _check_hourly(timeline, "timeline")
    months = np.unique(timeline.astype("datetime64[M]"))
    out = []
    for m in months:
        start = m.astype("datetime64[h]")
        end = (m + 1).astype("datetime64[h]")
        if timeline[0] <= start and timeline[-1] >= end - np.timedelta64(1, "h"):
            lo = int(np.searchsorted(timeline, start))
            hi = int(np.searchsorted(timeline, end))
            out.append((lo, hi))
    return out


def plan_splits(
    n_intervals: int,
    mode: str,
    rolling_depth: int = 6,
    max_folds: int = 12,
) -> SplitPlan:
    """Lay out test folds over the trailing intervals.

    Each fold tests one interval. Rolling folds train on the previous
    rolling_depth intervals with the last of them held out for validation;
    incremental folds train on every preceding interval, again holding the
    last one out. The number of folds is capped at max_folds and at what
    the interval count allows.
    """
    if mode not in ("rolling", "incremental"):
        raise ValueError(f"unknown split mode {mode!r}")
    if mode == "rolling":
        if rolling_depth < 2:
            raise ValueError("rolling depth must be at least 2 (train plus validation)")
        feasible = n_intervals - rolling_depth
    else:
        feasible = n_intervals - 2
    if feasible < 1:
        raise ValueError(
            f"too few intervals ({n_intervals}) for {mode} splits"
        )
    n_folds = min(max_folds, feasible)
    folds = []
    for test in range(n_intervals - n_folds, n_intervals):
        if mode == "rolling":
            block = tuple(range(test - rolling_depth, test))
        else:
            block = tuple(range(0, test))
        folds.append(Fold(train=block[:-1], val=block[-1], test=test))
    return SplitPlan(mode=mode, n_intervals=n_intervals, folds=tuple(folds))


def fold_index_ranges(
    intervals: list[tuple[int, int]], fold: Fold
) -> dict[str, tuple[int, int]]:
    """Timeline index ranges for one fold's train/validation/test blocks."""
    train_lo = intervals[fold.train[0]][0]
    train_hi = intervals[fold.train[-1]][1]
    return {
        "train": (train_lo, train_hi),
        "val": intervals[fold.val],
        "test": intervals[fold.test],
    }


def assign_windows(
    windows: list[SampleWindow], ranges: dict[str, tuple[int, int]]
) -> dict[str, list[SampleWindow]]:
    """Assign windows by full containment; straddling windows go nowhere."""
    out: dict[str, list[SampleWindow]] = {name: [] for name in ranges}
    for win in windows:
        lo, hi = win.span
        for name, (rlo, rhi) in ranges.items():
            if lo >= rlo and hi < rhi:
                out[name].append(win)
                break
    return out


# -- correlation diagnostics ----------------------------------------------------

@dataclass(frozen=True)
class CorrelationDiagnostics:
    variable: str
    max_lag: int
    auto: dict[str, np.ndarray]                 # station -> corr by lag 0..max_lag
    cross: dict[str, dict[str, float]]          # station -> covariate -> corr at lag 0
    spatial: dict[tuple[str, str], np.ndarray]  # (a, b) -> corr(a[t], b[t+lag])
    constant_series: tuple[str, ...]            # "station:variable" flags


def _lagged_corr(a: np.ndarray, b: np.ndarray, lag: int) -> tuple[float, bool]:
    x = a[: len(a) - lag] if lag > 0 else a
    y = b[lag:]
    if x.std() == 0.0 or y.std() == 0.0:
        return 0.0, True
    return float(np.corrcoef(x, y)[0, 1]), False


def correlation_diagnostics(frame: WeatherFrame, variable: str, max_lag: int) -> CorrelationDiagnostics:
    """Auto, cross and lagged spatial Pearson correlations on a filled frame."""
    if max_lag < 0 or max_lag >= frame.n_steps - 1:
        raise ValueError(f"max_lag {max_lag} out of range for frame of {frame.n_steps} steps")
    constant = []
    auto = {}
    cross = {}
    spatial = {}
    for st in frame.stations:
        series = frame.obs_series(st, variable)
        if np.isnan(series).any():
            raise DataError("diagnostics need a filled frame")
        vals = np.empty(max_lag + 1)
        flagged = False
        for lag in range(max_lag + 1):
            vals[lag], const = _lagged_corr(series, series, lag)
            flagged = flagged or const
        auto[st] = vals
        if flagged:
            constant.append(f"{st}:{variable}")
        cross[st] = {}
        for other in VARIABLES:
            if other == variable:
                continue
            r, const = _lagged_corr(series, frame.obs_series(st, other), 0)
            cross[st][other] = r
            if const and f"{st}:{other}" not in constant:
                constant.append(f"{st}:{other}")
    for a in frame.stations:
        for b in frame.stations:
            if a == b:
                continue
            sa = frame.obs_series(a, variable)
            sb = frame.obs_series(b, variable)
            vals = np.empty(max_lag + 1)
            for lag in range(max_lag + 1):
                vals[lag], _ = _lagged_corr(sa, sb, lag)
            spatial[(a, b)] = vals
    return CorrelationDiagnostics(
        variable=variable,
        max_lag=max_lag,
        auto=auto,
        cross=cross,
        spatial=spatial,
        constant_series=tuple(constant),
    )
