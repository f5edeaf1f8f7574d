"""Sensitivity analysis for matched pairs with the submax method and group M-scores."""

__version__ = "0.1.0"

from .data import GroupedStudy, PairDifference, ingest, read_csv, write_csv
from .errors import (
    DataValidationError,
    DegenerateScale,
    DegenerateStatistic,
    DegenerateVariance,
    DroppedComparisonWarning,
    EmptyGroup,
    NumericalError,
    SmallGroupWarning,
    SubmaxError,
)
from .mvnorm import DEFAULT_MVN, MvnSettings, critical_value, equicoordinate_prob
from .scoring import DEFAULT_PSI, METHODS, PsiParams, psi, score
from .sensitivity import pair_bounds
from .sim import estimate_power, generate_study, power_grid
from .submax import SubmaxAnalysis, SubmaxResult, build_comparisons, sensitivity_value, submax_test

__all__ = [
    "__version__",
    "GroupedStudy", "PairDifference", "ingest", "read_csv", "write_csv",
    "DataValidationError", "DegenerateScale", "DegenerateStatistic", "DegenerateVariance",
    "DroppedComparisonWarning", "EmptyGroup", "NumericalError", "SmallGroupWarning", "SubmaxError",
    "DEFAULT_MVN", "MvnSettings", "critical_value", "equicoordinate_prob",
    "DEFAULT_PSI", "METHODS", "PsiParams", "psi", "score", "pair_bounds",
    "estimate_power", "generate_study", "power_grid",
    "SubmaxAnalysis", "SubmaxResult", "build_comparisons", "sensitivity_value", "submax_test",
]
