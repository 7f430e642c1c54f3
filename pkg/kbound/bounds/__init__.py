from kbound.bounds.bands import cauchy_schwarz_check, ls_band, robust_band, vanilla_band
from kbound.bounds.credible import credible_rectangle
from kbound.bounds.hypergrid import build_hyperposterior, gaussian_quantile
from kbound.bounds.worst_case import elementwise_sigma, minimax_sigma, uniform_sigma

__all__ = [
    "build_hyperposterior",
    "cauchy_schwarz_check",
    "credible_rectangle",
    "elementwise_sigma",
    "gaussian_quantile",
    "ls_band",
    "minimax_sigma",
    "robust_band",
    "uniform_sigma",
    "vanilla_band",
]
