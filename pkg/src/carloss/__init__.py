"""Proper CAR models for area-level data with optimal prediction under
squared-error, LINEX and power-divergence loss."""

__version__ = "0.1.0"

from .area_model import (AreaDataset, CarParams, NeighborGraph, build_precision,
                         car_covariance, fitted_values, mean_vector)
from .asymmetry import PowerRatioCurve, find_elbows, power_ratio, sweep
from .errors import (CarlossError, DomainError, InputError, InvalidParameterError,
                     NumericalDegeneracyError, NumericalError, UndefinedRatioError)
from .losses import (LossSpec, PredictorTable, expected_loss, linex_loss, optimal_predictor,
                     pdl_loss, predictor_table, quantile_match)
from .risk import RiskMatrix, relative_risk, risk_matrix, summarize
from .sampler import (PosteriorDraws, PriorSpec, SamplerConfig, combine_chains, run_chain,
                      run_chains)

__all__ = [
    "AreaDataset", "NeighborGraph", "CarParams", "build_precision", "car_covariance",
    "mean_vector", "fitted_values",
    "PriorSpec", "SamplerConfig", "PosteriorDraws", "run_chain", "run_chains", "combine_chains",
    "LossSpec", "PredictorTable", "linex_loss", "pdl_loss", "expected_loss",
    "optimal_predictor", "quantile_match", "predictor_table",
    "PowerRatioCurve", "power_ratio", "sweep", "find_elbows",
    "RiskMatrix", "relative_risk", "risk_matrix", "summarize",
    "CarlossError", "InputError", "InvalidParameterError", "NumericalError",
    "NumericalDegeneracyError", "UndefinedRatioError", "DomainError",
]
