"""Piecewise spline reconstruction of functions from their Fourier coefficients."""

from .detect import (CurveSeed, DetectionWarning, JumpEstimate, curve_hausdorff, detect_curve_2d,
                     detect_jump_1d, fit_initial_levelset, scanline_points_2d, signed_net)
from .errors import FourierFitError, NumericError, ValidationError
from .fourier import (REGISTRY, FourierTable, TestFunction, coeffs_from_function, get_function, load_table,
                      partial_sum_eval, save_table)
from .linsolve import SolveReport, iterative_refine, solve, solve_pinv
from .models import LevelSetModel2D, PiecewiseModel1D, evaluate_model, model_from_dict, model_to_dict
from .reconstruct import (AdvisoryWarning, SolverSettings, error_report, fit_piecewise_1d, fit_piecewise_2d,
                          fit_smooth, objective, refine_s)
from .report import ReconstructionReport, render_text
from .restricted import RestrictedTransform2D, restricted_tensor_fourier
from .splines import LevelSetSpline, SplineModel, SplineSpace, basis_matrix, bspline_eval, spline_eval
from .transforms import (bspline_fourier_1d, fourier_matrix_1d, restricted_bspline_fourier_1d,
                         tensor_bspline_fourier)

__all__ = [
    "AdvisoryWarning", "CurveSeed", "DetectionWarning", "FourierFitError", "FourierTable", "JumpEstimate",
    "LevelSetModel2D", "LevelSetSpline", "NumericError", "PiecewiseModel1D", "REGISTRY",
    "ReconstructionReport", "RestrictedTransform2D", "SolveReport", "SolverSettings", "SplineModel",
    "SplineSpace", "TestFunction", "ValidationError", "basis_matrix", "bspline_eval", "bspline_fourier_1d",
    "coeffs_from_function", "curve_hausdorff", "detect_curve_2d", "detect_jump_1d", "error_report",
    "evaluate_model", "fit_initial_levelset", "fit_piecewise_1d", "fit_piecewise_2d", "fit_smooth",
    "fourier_matrix_1d", "get_function", "iterative_refine", "load_table", "model_from_dict",
    "model_to_dict", "objective", "partial_sum_eval", "refine_s", "render_text",
    "restricted_bspline_fourier_1d", "restricted_tensor_fourier", "save_table", "scanline_points_2d",
    "signed_net", "solve", "solve_pinv", "spline_eval", "tensor_bspline_fourier",
]

__version__ = "0.1.0"
