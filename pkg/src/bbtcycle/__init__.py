"""
bbtcycle: sequential prediction of menstruation onset from daily basal
body temperature via a circular-phase state-space model with a
grid-discretized Bayesian filter.

"""

__version__ = "0.1.0"

from .densities import (
    ConvergenceError,
    gamma_cdf,
    gamma_pdf,
    lerch_phi,
    normal_pdf,
    wrapped_advance_cdf,
    wrapped_gamma_pdf,
)
from .estimate import (
    DegenerateFitError,
    FitResult,
    NonConvergenceError,
    OptConfig,
    confidence_intervals,
    fit,
    select_order,
)
from .evaluate import (
    EvalReport,
    InsufficientCyclesError,
    calendar_eval,
    evaluate,
    sequential_eval,
    split_by_cycles,
    evaluation_cycles,
)
from .forecast import HorizonTooShortError, OnsetForecast, onset_cdf, onset_marginal, onset_pmf
from .gridfilter import (
    DegenerateLikelihoodError,
    FilterResult,
    JointDensity,
    filter_step,
    predict_step,
    run_filter,
    smooth,
    smoothed_marginals,
)
from .model import (
    CycleDataset,
    ModelParams,
    PhaseGrid,
    TransitionTable,
    build_transition,
    expected_cycle_length,
    mean_bbt,
)
from .simulate import SimOutput, simulate

__all__ = [
    "__version__",
    "ConvergenceError",
    "CycleDataset",
    "DegenerateFitError",
    "DegenerateLikelihoodError",
    "EvalReport",
    "FilterResult",
    "FitResult",
    "HorizonTooShortError",
    "InsufficientCyclesError",
    "JointDensity",
    "ModelParams",
    "NonConvergenceError",
    "OnsetForecast",
    "OptConfig",
    "PhaseGrid",
    "SimOutput",
    "TransitionTable",
    "build_transition",
    "calendar_eval",
    "confidence_intervals",
    "evaluate",
    "expected_cycle_length",
    "filter_step",
    "fit",
    "gamma_cdf",
    "gamma_pdf",
    "lerch_phi",
    "mean_bbt",
    "normal_pdf",
    "onset_cdf",
    "onset_marginal",
    "onset_pmf",
    "predict_step",
    "run_filter",
    "select_order",
    "sequential_eval",
    "simulate",
    "smooth",
    "smoothed_marginals",
    "split_by_cycles",
    "evaluation_cycles",
    "wrapped_advance_cdf",
    "wrapped_gamma_pdf",
]
