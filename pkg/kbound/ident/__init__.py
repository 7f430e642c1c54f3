from kbound.ident.estimation import (
    KernelSlice,
    estimate_hyperparameters,
    least_squares,
    log_marginal,
    posterior_at,
    regularized_estimate,
)
from kbound.ident.kernels import build_kernel, gamma_exponent, kernel_dominates, maxindex_det
from kbound.ident.linsys import build_regressor, h2_norm, impulse_response, benchmark_system, simulate

__all__ = [
    "KernelSlice",
    "build_kernel",
    "build_regressor",
    "estimate_hyperparameters",
    "gamma_exponent",
    "h2_norm",
    "impulse_response",
    "kernel_dominates",
    "least_squares",
    "log_marginal",
    "maxindex_det",
    "benchmark_system",
    "posterior_at",
    "regularized_estimate",
    "simulate",
]
