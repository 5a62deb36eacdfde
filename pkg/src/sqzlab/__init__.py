"""Broadband squeezed-vacuum noise spectra: calibration, modeling, fitting.

Public surface re-exported here; see the CLI (`sqz`) for file-level
workflows.
"""

__version__ = "0.1.0"

from .detector import (
    ImbalanceModel,
    LinearityPoint,
    LinearityResult,
    apply_imbalance,
    linearity_fit,
    saturation_verdict,
)
from .fitting import (
    FitDataset,
    FitOptions,
    FitResult,
    fit,
    fit_report,
    initial_guess,
    jacobian,
    residuals,
)
from .normalize import (
    NormalizedSpectrum,
    clearance,
    dark_correct,
    db_to_lin,
    lin_to_db,
    normalize_to_shot,
    read_normalized_csv,
    write_normalized_csv,
)
from .opo import (
    LossBudget,
    OpoParams,
    loss_budget_product,
    max_squeezing_db,
    pump_from_antisqueezing,
    squeeze_bandwidth,
    variance_detected,
    variance_pure,
)
from .synth import Campaign, Scenario, generate_campaign, generate_linearity_series, read_scenario
from .traces import Trace, read_trace_csv, resample, write_trace_csv

__all__ = [
    "Campaign",
    "FitDataset",
    "FitOptions",
    "FitResult",
    "ImbalanceModel",
    "LinearityPoint",
    "LinearityResult",
    "LossBudget",
    "NormalizedSpectrum",
    "OpoParams",
    "Scenario",
    "Trace",
    "apply_imbalance",
    "clearance",
    "dark_correct",
    "db_to_lin",
    "fit",
    "fit_report",
    "generate_campaign",
    "generate_linearity_series",
    "initial_guess",
    "jacobian",
    "lin_to_db",
    "linearity_fit",
    "loss_budget_product",
    "max_squeezing_db",
    "normalize_to_shot",
    "pump_from_antisqueezing",
    "read_normalized_csv",
    "read_scenario",
    "read_trace_csv",
    "resample",
    "residuals",
    "saturation_verdict",
    "squeeze_bandwidth",
    "variance_detected",
    "variance_pure",
    "write_normalized_csv",
    "write_trace_csv",
]
