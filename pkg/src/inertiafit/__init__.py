"""Joint estimation of power-system inertia and load relief.

Sub-modules:

``timeseries``
    traces, CSV ingestion, alignment and event datasets
``preprocess``
    washout removal of machine inertial power, moving average
``estimators``
    sliding-window, Inoue polynomial and SFR model-fitting estimators
``sfr_sim``
    synthetic events with known ground truth
``manifest``, ``cli``
    JSON manifests and the ``inertiafit`` command
"""
__version__ = "0.1.0"

from .estimators import (  # noqa: E402
    FitOptions,
    ModelFitEstimate,
    SwingEstimate,
    SweepResult,
    estimate_inoue,
    estimate_sliding_window,
    fit_sfr,
    rocof_sliding_window,
    sfr_predict,
    sweep_poly_orders,
    sweep_window_lengths,
    swing_inertia,
)
from .preprocess import WashoutConfig, inertial_component, moving_average, remove_inertial  # noqa: E402
from .sfr_sim import ScenarioConfig, simulate_event  # noqa: E402
from .timeseries import (  # noqa: E402
    EventDataset,
    UniformTrace,
    aggregate_pfr,
    build_event_dataset,
    detect_onset,
    load_trace_csv,
    resample,
)
