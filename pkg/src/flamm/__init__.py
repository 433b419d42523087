"""Domain-adaptation feature learning by second-moment matching."""

__version__ = "0.1.0"

from .errors import (DegenerateFeatureError, DegenerateLabelsError, FlammError,  # noqa: E402
                     InvalidInputError, NumericalError, ParseError)
from .moments import (eigen_extremes, moment_gap, row_norm_diag,  # noqa: E402
                      second_moment, spectral_norm)
from .stack import (LayerParams, StackModel, apply_stack, contraction_check,  # noqa: E402
                    fit_stack, solve_layer, theorem2_threshold)

__all__ = [
    "DegenerateFeatureError", "DegenerateLabelsError", "FlammError",
    "InvalidInputError", "NumericalError", "ParseError",
    "eigen_extremes", "moment_gap", "row_norm_diag", "second_moment", "spectral_norm",
    "LayerParams", "StackModel", "apply_stack", "contraction_check", "fit_stack",
    "solve_layer", "theorem2_threshold",
]
