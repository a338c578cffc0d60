"""Decay-rate bounds, tightness checks, closed forms and most probable paths."""

from .closed_form import ClosedFormResult, closed_form_fbm, optimal_t_structure
from .mean_path import Grid, MeanPath, most_probable_path
from .model import (
    BOUNDARY,
    CASE1,
    CASE2,
    CASE3,
    NodeModel,
    QPSolution,
    TimeVector,
    c_fun,
    case_flags,
    h_fun,
    k_fun,
    node_model,
    qp_oracle,
    rate_case_value,
    solve_two_constraint_qp,
)
from .optimize import DecayResult, OptimizerOptions, decay_lower_bound
from .tightness import (
    LOWER_ONLY,
    TIGHT1,
    TIGHT2,
    TIGHT3,
    TightnessOptions,
    TightnessVerdict,
    check_tightness,
)

__all__ = [
    "BOUNDARY", "CASE1", "CASE2", "CASE3", "LOWER_ONLY", "TIGHT1", "TIGHT2", "TIGHT3",
    "ClosedFormResult", "DecayResult", "Grid", "MeanPath", "NodeModel", "OptimizerOptions",
    "QPSolution", "TightnessOptions", "TightnessVerdict", "TimeVector",
    "c_fun", "case_flags", "check_tightness", "closed_form_fbm", "decay_lower_bound", "h_fun",
    "k_fun", "most_probable_path", "node_model", "optimal_t_structure", "qp_oracle",
    "rate_case_value", "solve_two_constraint_qp",
]
