"""Log-densities and differentiable log-posteriors for the three model families.

Everything downstream (the sampler, the estimators) treats a model as an
opaque pair of callables: log_posterior and log_posterior_grad over an
unconstrained parameter vector. The noise scale, when present, is stored
as log(sigma) with the matching Jacobian term included in the posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

__all__ = [
    "PriorSpec",
    "ModelSpec",
    "sigmoid",
    "normal_logpdf",
    "bernoulli_logpmf",
    "half_cauchy_logpdf",
    "param_names",
    "param_dim",
    "log_posterior",
    "log_posterior_grad",
]

# Likelihood probabilities are clamped into this range before taking logs.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class PriorSpec:
    """Zero-mean Gaussian prior scales plus an optional noise-scale prior.

    ``beta_scales`` may be a scalar (shared across coefficients) or a
    sequence with one scale per coefficient. ``noise_prior`` is either
    ``("half_cauchy", scale)`` or ``None`` (flat on log sigma).
    """

    alpha_scale: float = 1.0
    beta_scales: float | tuple[float, ...] = 1.0
    noise_prior: tuple[str, float] | None = ("half_cauchy", 5.0)

    def __post_init__(self):
        if self.alpha_scale <= 0:
            raise ValueError("alpha_scale must be > 0")
        scales = np.atleast_1d(np.asarray(self.beta_scales, dtype=float))
        if np.any(scales <= 0):
            raise ValueError("beta_scales must all be > 0")
        if self.noise_prior is not None:
            kind, scale = self.noise_prior
            if kind != "half_cauchy":
                raise ValueError(f"unsupported noise prior: {kind!r}")
            if scale <= 0:
                raise ValueError("noise prior scale must be > 0")

    def beta_scale_vector(self, k: int) -> np.ndarray:
        scales = np.atleast_1d(np.asarray(self.beta_scales, dtype=float))
        if scales.size == 1:
            return np.full(k, scales[0])
        if scales.size != k:
            raise ContractError(
                f"expected {k} beta scales, got {scales.size}"
            )
        return scales.copy()


@dataclass(frozen=True)
class ModelSpec:
    """Which regression family to fit and with which priors.

    family:
        "logistic"    -- propensity model, Bernoulli(t | sigmoid(a + X b))
        "did_linear"  -- y ~ a + treat + period + treat*period + X b + noise
        "rdd_linear"  -- y ~ a + (x-c) + t + (x-c)*t [+ z] + noise
    """

    family: str
    priors: PriorSpec = field(default_factory=PriorSpec)
    cutoff: float | None = None

    def __post_init__(self):
        if self.family not in ("logistic", "did_linear", "rdd_linear"):
            raise ValueError(f"unknown model family: {self.family!r}")
        if self.family == "rdd_linear" and self.cutoff is None:
            raise ValueError("rdd_linear requires a cutoff")


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def normal_logpdf(x, mu, sigma):
    """Gaussian log-density; sigma must be strictly positive."""
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError("sigma must be > 0")
    x = np.asarray(x, dtype=float)
    val = -0.5 * np.log(2.0 * np.pi) - np.log(sigma) - (x - mu) ** 2 / (2.0 * sigma**2)
    return val if val.ndim else float(val)


def bernoulli_logpmf(t, p):
    """Bernoulli log-mass; p is clamped into [1e-12, 1 - 1e-12]."""
    t = np.asarray(t)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("t must be 0 or 1")
    t = t.astype(float)
    p = np.clip(np.asarray(p, dtype=float), PROB_FLOOR, 1.0 - PROB_FLOOR)
    val = t * np.log(p) + (1.0 - t) * np.log1p(-p)
    return val if val.ndim else float(val)


def half_cauchy_logpdf(x, scale):
    """Half-Cauchy log-density on [0, inf)."""
    if np.any(np.asarray(x) < 0):
        raise ValueError("x must be >= 0")
    if scale <= 0:
        raise ValueError("scale must be > 0")
    x = np.asarray(x, dtype=float)
    val = np.log(2.0) - np.log(np.pi) - np.log(scale) - np.log1p((x / scale) ** 2)
    return val if val.ndim else float(val)


def _predictor_matrix(model: ModelSpec, data) -> tuple[np.ndarray, list[str]]:
    """Columns multiplying the coefficient block, and their names."""
    n = len(data.y) if data.y is not None else data.X.shape[0]
    if model.family == "logistic":
        return np.asarray(data.X, dtype=float), [f"beta_{c}" for c in data.covariate_names]
    if model.family == "did_linear":
        t = np.asarray(data.t, dtype=float)
        tau = np.asarray(data.tau, dtype=float)
        cols = [t, tau, t * tau]
        names = ["theta_treat", "theta_period", "theta_interaction"]
        if data.X is not None and data.X.shape[1] > 0:
            cols.extend(np.asarray(data.X, dtype=float).T)
            names.extend(f"beta_{c}" for c in data.covariate_names)
        return np.column_stack(cols), names
    # rdd_linear
    xc = np.asarray(data.assignment, dtype=float) - model.cutoff
    t = np.asarray(data.t, dtype=float)
    cols = [xc, t, xc * t]
    names = ["beta_slope", "beta_treat", "beta_slope_treat"]
    if data.z is not None:
        cols.append(np.asarray(data.z, dtype=float))
        names.append("beta_z")
    return np.column_stack(cols) if n else np.empty((0, len(cols))), names


def param_names(model: ModelSpec, data) -> list[str]:
    """Names of the unconstrained parameter vector, in storage order."""
    _, coef_names = _predictor_matrix(model, data)
    names = ["alpha"] + coef_names
    if model.family != "logistic":
        names.append("log_sigma")
    return names


def param_dim(model: ModelSpec, data) -> int:
    return len(param_names(model, data))


def _unpack(model: ModelSpec, data, params):
    params = np.asarray(params, dtype=float)
    C, _ = _predictor_matrix(model, data)
    k = C.shape[1]
    has_noise = model.family != "logistic"
    expected = 1 + k + (1 if has_noise else 0)
    if params.shape != (expected,):
        raise ContractError(
            f"parameter vector has shape {params.shape}, expected ({expected},)"
        )
    alpha = params[0]
    coefs = params[1 : 1 + k]
    log_sigma = params[-1] if has_noise else None
    return C, alpha, coefs, log_sigma


def _prior_logdensity(model: ModelSpec, alpha, coefs, log_sigma) -> float:
    pri = model.priors
    scales = pri.beta_scale_vector(len(coefs))
    total = normal_logpdf(alpha, 0.0, pri.alpha_scale)
    total += float(np.sum(normal_logpdf(coefs, 0.0, scales)))
    if log_sigma is not None and pri.noise_prior is not None:
        sigma = np.exp(log_sigma)
        # log-Jacobian of the sigma = exp(log_sigma) transform
        total += half_cauchy_logpdf(sigma, pri.noise_prior[1]) + log_sigma
    return float(total)


def log_posterior(model: ModelSpec, data, params) -> float:
    """Unnormalised log-posterior in the unconstrained parameterization.

    Returns -inf for points the floating-point likelihood cannot
    represent (e.g. exp(log_sigma) overflows); the sampler treats those
    as divergent leapfrog states.
    """
    C, alpha, coefs, log_sigma = _unpack(model, data, params)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        total = _prior_logdensity(model, alpha, coefs, log_sigma)
        if C.shape[0] == 0:
            return total if np.isfinite(total) else -np.inf
        eta = alpha + C @ coefs
        if model.family == "logistic":
            total += float(np.sum(bernoulli_logpmf(data.t, sigmoid(eta))))
        else:
            sigma = np.exp(log_sigma)
            if not np.isfinite(sigma) or sigma == 0.0:
                return -np.inf
            total += float(
                np.sum(normal_logpdf(np.asarray(data.y, dtype=float), eta, sigma))
            )
    return total if np.isfinite(total) else -np.inf


def log_posterior_grad(model: ModelSpec, data, params) -> np.ndarray:
    """Analytic gradient of :func:`log_posterior`."""
    C, alpha, coefs, log_sigma = _unpack(model, data, params)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _grad_impl(model, data, C, alpha, coefs, log_sigma)


def _grad_impl(model, data, C, alpha, coefs, log_sigma):
    pri = model.priors
    scales = pri.beta_scale_vector(len(coefs))
    g_alpha = -alpha / pri.alpha_scale**2
    g_coefs = -coefs / scales**2
    g_ls = 0.0
    if log_sigma is not None and pri.noise_prior is not None:
        sigma = np.exp(log_sigma)
        s = pri.noise_prior[1]
        # d/dlog_sigma [half-cauchy log-density + Jacobian]
        g_ls += 1.0 - 2.0 * sigma**2 / (s**2 + sigma**2)

    n = C.shape[0]
    if n:
        eta = alpha + C @ coefs
        if model.family == "logistic":
            resid = np.asarray(data.t, dtype=float) - sigmoid(eta)
            g_alpha += float(np.sum(resid))
            g_coefs = g_coefs + C.T @ resid
        else:
            sigma = np.exp(log_sigma)
            resid = np.asarray(data.y, dtype=float) - eta
            g_alpha += float(np.sum(resid)) / sigma**2
            g_coefs = g_coefs + (C.T @ resid) / sigma**2
            g_ls += -n + float(np.sum(resid**2)) / sigma**2

    grad = np.concatenate(([g_alpha], g_coefs, [g_ls] if log_sigma is not None else []))
    return grad
