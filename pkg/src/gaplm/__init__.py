"""Generalized additive partial linear models with spline smoothing and penalized selection."""
from .family import QuasiFamily, deviance, eval_q, eval_q1, eval_q2, eval_rho, get_family
from .fit import FitOptions, GaplmFit, component, fit, fit_glm, predict
from .io import ModelSpec, ingest_csv, load_pima
from .select import Penalty, SelectionResult, best_subset_bic, fit_penalized, tune_lambda
from .sim import SimConfig, SimSummary, generate_s1, generate_s2, run_monte_carlo, select_knots
from .spline import AdditiveSplineBasis, Dataset, KnotVector, build_centered_basis, eval_raw_basis, make_knots

__version__ = "0.1.0"

__all__ = [
    "QuasiFamily",
    "get_family",
    "eval_q",
    "eval_rho",
    "eval_q1",
    "eval_q2",
    "deviance",
    "KnotVector",
    "AdditiveSplineBasis",
    "Dataset",
    "make_knots",
    "eval_raw_basis",
    "build_centered_basis",
    "FitOptions",
    "GaplmFit",
    "fit",
    "fit_glm",
    "predict",
    "component",
    "Penalty",
    "SelectionResult",
    "fit_penalized",
    "tune_lambda",
    "best_subset_bic",
    "SimConfig",
    "SimSummary",
    "generate_s1",
    "generate_s2",
    "run_monte_carlo",
    "select_knots",
    "ModelSpec",
    "ingest_csv",
    "load_pima",
]
