"""Event detection in multivariate time series by regressing window/event overlap."""

from .core import (
    ConfigError,
    DataError,
    EventSeerError,
    EventSet,
    Interval,
    TimeSeries,
    TrainingDiverged,
    sampling_period,
    to_fixed_width_events,
)
from .ensemble import BaseConfig, StackedModel, load_stack, predict_stack, save_stack, train_stack
from .extraction import (
    ExtractionParams,
    Grids,
    extract_events,
    find_peaks,
    gaussian_kernel,
    optimize_extraction,
    reconstruct_events,
    smooth,
)
from .metrics import delta_t_histogram, match_events, score
from .regressor import FfnConfig, fit_ffn, fit_ridge, predict, standardize_fit
from .synthbench import SynthConfig, generate
from .windowing import OpSignal, WindowSpec, interval_overlap, label_windows, slide

__version__ = "0.1.0"
