"""State-space form of the dynamic factor model: filtering, smoothing, EM and Gibbs estimation."""
from .kalman import FilterResult, KalmanError, SmootherResult, ffbs, kalman_filter, kalman_smoother
from .model import DIFFUSE_VARIANCE, StateSpaceModel, companion, factor_model
from .em import EMError, EstimatedFactorModel, em_estimate, initial_model
from .bayes import BayesPriors, PosteriorDraws, SamplerError, ffbs_sample
from .summaries import ExplainedVariance, align_factors, combine_factors, explained_variance

__all__ = [
    "BayesPriors", "ExplainedVariance", "PosteriorDraws", "SamplerError", "align_factors",
    "combine_factors", "explained_variance", "ffbs_sample",
    "DIFFUSE_VARIANCE", "EMError", "EstimatedFactorModel", "FilterResult", "KalmanError",
    "SmootherResult", "StateSpaceModel", "companion", "em_estimate", "factor_model", "ffbs",
    "initial_model", "kalman_filter", "kalman_smoother",
]
