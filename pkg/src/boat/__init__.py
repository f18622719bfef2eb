"""Bayesian causal treatment-effect estimation for observational software
tests: propensity-score matching, difference-in-differences, and
regression discontinuity, each inferred with a built-in No-U-Turn
sampler, plus a simulation harness with closed-form ground truth.
"""

from .effects import ATEEstimate, naive_ate
from .nuts import PosteriorSamples, SamplerConfig, r_hat, sample, summarize
from .pipeline import DesignMatrix
from .prob_core import ModelSpec, PriorSpec

__all__ = [
    "ATEEstimate",
    "DesignMatrix",
    "ModelSpec",
    "PosteriorSamples",
    "PriorSpec",
    "SamplerConfig",
    "naive_ate",
    "r_hat",
    "sample",
    "summarize",
]

__version__ = "0.1.0"
