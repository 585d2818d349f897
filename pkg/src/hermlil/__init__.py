"""Hermite variations of stationary Gaussian sequences: exact variances,
simulation, Stein-method bounds and desk-scale audits of a functional LIL."""
from .covariance import (
    Explicit,
    FgnIncrements,
    LagOutOfRangeError,
    RegimeError,
    WhiteNoise,
    breuer_major_sigma2,
    critical_hurst,
    critical_variance_constant,
    fgn_autocovariance,
    partial_sum_variance,
    partial_sum_variances,
)
from .hermite import Regime, VariationSpec, blocking_subsequence, carre_du_champ, normalizer
from .sampler import EmbeddingError, build_plan, sample_ensemble, sample_path

__version__ = "0.1.0"
