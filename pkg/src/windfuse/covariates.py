"""Covariate importance scoring and selection.

Importance is the magnitude of no-intercept ridge weights: one regression
per future horizon for the historical branch, a single point-to-point
regression for the future branch. Weights are taken absolute, min-max
normalized per horizon and averaged across horizons. Candidates are
z-scored before fitting so magnitudes are comparable across variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import VARIABLES, WeatherFrame, series_stats
from .errors import NumericError

__all__ = [
    "ImportanceVector",
    "ridge_fit",
    "importance_historical",
    "importance_future",
    "select",
    "frame_importances",
    "select_for_frame",
    "write_selection_report",
    "parse_selection_report",
]


@dataclass(frozen=True)
class ImportanceVector:
    branch: str               # "historical" or "future"
    ids: tuple[str, ...]      # candidate names, self series first
    values: np.ndarray        # importance in [0, 1], aligned with ids
    degenerate_horizons: int  # horizons where min == max (scored uniform 0.5)


def ridge_fit(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Closed-form no-intercept ridge weights for y ~ x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError(f"ridge_fit: incompatible shapes {x.shape} and {y.shape}")
    if lam < 0:
        raise ValueError("ridge regularization strength must be non-negative")
    p = x.shape[1]
    gram = x.T @ x + lam * np.eye(p)
    try:
        return np.linalg.solve(gram, x.T @ y)
    except np.linalg.LinAlgError:
        raise NumericError(
            "singular ridge system; use a regularization strength greater than zero"
        ) from None


def _zscore_columns(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    for j in range(x.shape[1]):
        mean, std = series_stats(x[:, j])
        out[:, j] = (x[:, j] - mean) / std
    return out


def _minmax(values: np.ndarray) -> tuple[np.ndarray, bool]:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.full_like(values, 0.5), True
    return (values - lo) / (hi - lo), False


def importance_historical(
    y: np.ndarray,
    candidate_names: Sequence[str],
    candidates: np.ndarray,
    self_name: str,
    k: int = 24,
    lam: float = 1.0,
) -> ImportanceVector:
    """Score the target's own history plus each candidate series.

    Fits one ridge regression per horizon 1..k predicting y shifted forward
    from the current [y, candidates] row, then averages the per-horizon
    normalized weight magnitudes.
    """
    y = np.asarray(y, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.ndim != 2 or candidates.shape[0] != y.shape[0]:
        raise ValueError(
            f"importance_historical: candidates {candidates.shape} do not align with y {y.shape}"
        )
    if len(candidate_names) != candidates.shape[1]:
        raise ValueError("candidate_names must match the candidate matrix width")
    if y.shape[0] <= k:
        raise ValueError(f"need more than k={k} samples, got {y.shape[0]}")
    design = _zscore_columns(np.column_stack([y, candidates]))
    per_horizon = np.empty((k, design.shape[1]))
    degenerate = 0
    for h in range(1, k + 1):
        weights = ridge_fit(design[:-h], y[h:], lam)
        normed, flat = _minmax(np.abs(weights))
        per_horizon[h - 1] = normed
        degenerate += int(flat)
    return ImportanceVector(
        branch="historical",
        ids=(self_name, *candidate_names),
        values=per_horizon.mean(axis=0),
        degenerate_horizons=degenerate,
    )


def importance_future(
    y: np.ndarray,
    y_future: np.ndarray,
    candidate_names: Sequence[str],
    candidates: np.ndarray,
    self_name: str,
    lam: float = 1.0,
) -> ImportanceVector:
    """Score forecast candidates with a single point-to-point ridge fit."""
    y = np.asarray(y, dtype=np.float64)
    y_future = np.asarray(y_future, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.float64)
    if y.shape != y_future.shape or candidates.shape[0] != y.shape[0]:
        raise ValueError("importance_future: series are not aligned")
    if len(candidate_names) != candidates.shape[1]:
        raise ValueError("candidate_names must match the candidate matrix width")
    design = _zscore_columns(np.column_stack([y_future, candidates]))
    weights = ridge_fit(design, y, lam)
    normed, flat = _minmax(np.abs(weights))
    return ImportanceVector(
        branch="future",
        ids=(self_name, *candidate_names),
        values=normed,
        degenerate_horizons=int(flat),
    )


def select(vectors: Sequence[ImportanceVector], threshold: float = 0.2) -> tuple[str, ...]:
    """Average per-station importances, keep ids strictly above the threshold.

    The self series (first id) is always kept.
    """
    if not vectors:
        raise ValueError("select needs at least one importance vector")
    ids = vectors[0].ids
    branch = vectors[0].branch
    for vec in vectors:
        if vec.ids != ids or vec.branch != branch:
            raise ValueError("select: importance vectors disagree on ids or branch")
    mean = np.mean([vec.values for vec in vectors], axis=0)
    kept = [name for name, value in zip(ids, mean) if value > threshold]
    if ids[0] not in kept:
        kept.insert(0, ids[0])
    return tuple(kept)


# -- frame-level convenience -----------------------------------------------------

def frame_importances(
    frame: WeatherFrame,
    target: str,
    train_range: tuple[int, int],
    k: int = 24,
    lam: float = 1.0,
) -> tuple[list[ImportanceVector], list[ImportanceVector]]:
    """Per-station historical and future importance vectors for one target."""
    lo, hi = train_range
    others = [name for name in VARIABLES if name != target]
    hist_vecs = []
    fut_vecs = []
    nwp_self = frame.nwp_series(target)[lo:hi]
    nwp_others = np.column_stack([frame.nwp_series(name)[lo:hi] for name in others])
    for st in frame.stations:
        y = frame.obs_series(st, target)[lo:hi]
        x = np.column_stack([frame.obs_series(st, name)[lo:hi] for name in others])
        hist_vecs.append(importance_historical(y, others, x, self_name=target, k=k, lam=lam))
        fut_vecs.append(importance_future(y, nwp_self, others, nwp_others, self_name=target, lam=lam))
    return hist_vecs, fut_vecs


def select_for_frame(
    frame: WeatherFrame,
    target: str,
    train_range: tuple[int, int],
    k: int = 24,
    lam: float = 1.0,
    threshold: float = 0.2,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Selected historical and future covariates (self series excluded)."""
    hist_vecs, fut_vecs = frame_importances(frame, target, train_range, k=k, lam=lam)
    hist = tuple(name for name in select(hist_vecs, threshold) if name != target)
    fut = tuple(name for name in select(fut_vecs, threshold) if name != target)
    return hist, fut


# -- report round trip --------------------------------------------------------------

def write_selection_report(
    path,
    target: str,
    threshold: float,
    hist_vecs: Sequence[ImportanceVector],
    fut_vecs: Sequence[ImportanceVector],
) -> None:
    """Emit the importance tables and selected sets as parseable text."""
    hist_sel = select(hist_vecs, threshold)
    fut_sel = select(fut_vecs, threshold)
    hist_mean = np.mean([v.values for v in hist_vecs], axis=0)
    fut_mean = np.mean([v.values for v in fut_vecs], axis=0)
    with open(path, "w") as fh:
        fh.write("# covariate importance report\n")
        fh.write(f"target={target}\n")
        fh.write(f"threshold={threshold}\n")
        fh.write("[importance.historical]\n")
        for name, value in zip(hist_vecs[0].ids, hist_mean):
            fh.write(f"{name}={value:.6f}\n")
        fh.write("[importance.future]\n")
        for name, value in zip(fut_vecs[0].ids, fut_mean):
            fh.write(f"{name}={value:.6f}\n")
        fh.write("[selected.historical]\n")
        fh.write(",".join(hist_sel) + "\n")
        fh.write("[selected.future]\n")
        fh.write(",".join(fut_sel) + "\n")


def parse_selection_report(path) -> dict:
    """Read back a selection report into target/threshold/importances/selections."""
    out: dict = {"importance": {}, "selected": {}}
    section = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1]
                continue
            if section is None:
                key, _, value = line.partition("=")
                out[key] = float(value) if key == "threshold" else value
            elif section.startswith("importance."):
                branch = section.split(".", 1)[1]
                key, _, value = line.partition("=")
                out["importance"].setdefault(branch, {})[key] = float(value)
            elif section.startswith("selected."):
                branch = section.split(".", 1)[1]
                out["selected"][branch] = tuple(x for x in line.split(",") if x)
    return out
