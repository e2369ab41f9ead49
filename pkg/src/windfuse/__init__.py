"""windfuse: multi-station 24-hour wind forecasting.

Fuses each station's recent observations with a shared NWP forecast
stream, mixes information across stations through a convolution over
their learned representations, and blends the two prediction paths per
station. Wind direction is derived from the predicted wind components.
"""

from .data import (
    SampleWindow,
    SplitPlan,
    WeatherFrame,
    build_frame,
    decompose_wind,
    fill_frame,
    fill_missing,
    make_windows,
    month_intervals,
    plan_splits,
    recover_direction,
)
from .ensemble import EnsembleNet, ensemble_forward, ensemble_init
from .errors import (
    CalmWindError,
    DataError,
    DimensionError,
    GraphStateError,
    NumericError,
    WindfuseError,
)
from .evaluation import MetricReport, amae, namae, nwp_forecast, persistence_forecast, rmse, rrse, run_experiment
from .spatial import SpatialNet, build_feature_map, spatial_forward
from .synth import SynthSpec, generate, synthesize_files
from .temporal import HistoryLSTM, TemporalNet, temporal_forward
from .training import PredictionSet, StationNets, TrainConfig, predict, train_pipeline, train_stage

__version__ = "0.1.0"

__all__ = [
    "CalmWindError",
    "DataError",
    "DimensionError",
    "EnsembleNet",
    "GraphStateError",
    "HistoryLSTM",
    "MetricReport",
    "NumericError",
    "PredictionSet",
    "SampleWindow",
    "SpatialNet",
    "SplitPlan",
    "StationNets",
    "SynthSpec",
    "TemporalNet",
    "TrainConfig",
    "WeatherFrame",
    "WindfuseError",
    "amae",
    "build_feature_map",
    "build_frame",
    "decompose_wind",
    "ensemble_forward",
    "ensemble_init",
    "fill_frame",
    "fill_missing",
    "generate",
    "make_windows",
    "month_intervals",
    "namae",
    "nwp_forecast",
    "persistence_forecast",
    "plan_splits",
    "predict",
    "recover_direction",
    "rmse",
    "rrse",
    "run_experiment",
    "spatial_forward",
    "synthesize_files",
    "temporal_forward",
    "train_pipeline",
    "train_stage",
]
