"""Bayesian propensity-score matching.

Fits the logistic propensity model with the NUTS sampler, computes scores
at the posterior mean (with optional per-draw scores for uncertainty
bands), matches control to treated units greedily, and estimates the
matched treatment effect.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import effects
from .effects import ATEEstimate
from .errors import ContractError, EstimationError, PositivityError
from .nuts import PosteriorSamples, SamplerConfig, sample
from .pipeline import DesignMatrix
from .prob_core import ModelSpec, PriorSpec, sigmoid

__all__ = [
    "PropensityScores",
    "MatchResult",
    "fit_propensity",
    "propensity_scores",
    "caliper_match",
    "nn_match_1to1",
    "balance_report",
    "positivity_check",
    "ate_psm",
    "cate",
    "standardized_mean_difference",
]

DEFAULT_CALIPER = 0.05


@dataclass
class PropensityScores:
    unit_ids: np.ndarray
    mean_score: np.ndarray
    treated: np.ndarray
    draw_scores: np.ndarray | None = None  # [draw][unit]

    def __post_init__(self):
        self.unit_ids = np.asarray(self.unit_ids)
        self.mean_score = np.asarray(self.mean_score, dtype=float)
        self.treated = np.asarray(self.treated).astype(bool)
        if not (len(self.unit_ids) == len(self.mean_score) == len(self.treated)):
            raise ContractError("inconsistent lengths in PropensityScores")
        if np.any(self.mean_score <= 0) or np.any(self.mean_score >= 1):
            raise ContractError("propensity scores must be strictly in (0, 1)")

    @property
    def group(self) -> np.ndarray:
        return np.where(self.treated, "treatment", "control")


@dataclass
class MatchResult:
    """(treated_id, control_id, score distance) pairs plus leftovers."""

    pairs: list[tuple]
    unmatched_treated: list
    method: str

    def control_ids(self):
        return [c for _, c, _ in self.pairs]

    def treated_ids(self):
        return [t for t, _, _ in self.pairs]

    def total_distance(self) -> float:
        return float(sum(d for _, _, d in self.pairs))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("treated_id,control_id,distance\n")
            for tid, cid, dist in self.pairs:
                fh.write(f"{tid},{cid},{dist!r}\n")


def fit_propensity(
    data: DesignMatrix, priors: PriorSpec = None, cfg: SamplerConfig = None
) -> PosteriorSamples:
    """Posterior over the logistic propensity model (alpha, beta_j)."""
    t = np.asarray(data.t)
    if not np.any(t == 1) or not np.any(t == 0):
        raise PositivityError(
            "treatment column is constant: propensity model is not identified"
        )
    if data.X.size and (data.X.min() < 0 or data.X.max() > 1):
        warnings.warn(
            "covariates are not scaled to [0, 1]; priors assume scaled inputs",
            UserWarning,
        )
    model = ModelSpec("logistic", priors or PriorSpec(noise_prior=None))
    return sample(model, data, cfg=cfg or SamplerConfig())


def propensity_scores(
    posterior: PosteriorSamples,
    data: DesignMatrix,
    n_uncertainty_draws: int = 0,
    seed: int = 0,
) -> PropensityScores:
    """Scores at the posterior-mean parameters, plus optional draw bands."""
    names = ["alpha"] + [f"beta_{c}" for c in data.covariate_names]
    if posterior.param_names != names:
        raise ContractError(
            f"posterior parameters {posterior.param_names} do not match "
            f"data columns {names}"
        )
    flat = posterior.draws.reshape(-1, posterior.draws.shape[2])
    mean_params = flat.mean(axis=0)
    eps = 1e-12

    def scores_at(params):
        eta = params[0] + data.X @ params[1:]
        return np.clip(sigmoid(eta), eps, 1 - eps)

    draw_scores = None
    if n_uncertainty_draws:
        rng = np.random.default_rng(seed)
        idx = rng.choice(flat.shape[0], size=n_uncertainty_draws, replace=False)
        draw_scores = np.stack([scores_at(flat[i]) for i in idx])
    return PropensityScores(
        unit_ids=data.unit_ids,
        mean_score=scores_at(mean_params),
        treated=data.t == 1,
        draw_scores=draw_scores,
    )


def _greedy_match(scores: PropensityScores, caliper: float | None):
    """Greedy nearest-control matching without replacement.

    Treated units are processed in descending score order (ties broken by
    lower unit id); each takes its closest unused control, with equal
    distances also broken by lower control id.
    """
    treated_idx = np.where(scores.treated)[0]
    control_idx = np.where(~scores.treated)[0]
    if treated_idx.size == 0 or control_idx.size == 0:
        raise ContractError("both groups must be non-empty")

    order = sorted(
        treated_idx, key=lambda i: (-scores.mean_score[i], scores.unit_ids[i])
    )
    available = set(control_idx.tolist())
    pairs, unmatched = [], []
    for i in order:
        best = min(
            available,
            key=lambda j: (
                abs(scores.mean_score[i] - scores.mean_score[j]),
                scores.unit_ids[j],
            ),
            default=None,
        )
        if best is None:
            unmatched.append(scores.unit_ids[i])
            continue
        dist = abs(scores.mean_score[i] - scores.mean_score[best])
        if caliper is not None and dist > caliper:
            unmatched.append(scores.unit_ids[i])
            continue
        available.discard(best)
        pairs.append((scores.unit_ids[i], scores.unit_ids[best], float(dist)))
    return pairs, unmatched


def caliper_match(scores: PropensityScores, caliper: float = DEFAULT_CALIPER) -> MatchResult:
    """Greedy matching that discards treated units beyond the caliper."""
    if caliper <= 0:
        raise ValueError("caliper must be > 0")
    pairs, unmatched = _greedy_match(scores, caliper)
    return MatchResult(pairs=pairs, unmatched_treated=unmatched, method=f"caliper({caliper})")


def nn_match_1to1(scores: PropensityScores) -> MatchResult:
    """Greedy 1:1 nearest-neighbour matching; every treated unit matched."""
    n_treated = int(np.sum(scores.treated))
    n_control = int(np.sum(~scores.treated))
    if n_control < n_treated:
        raise EstimationError(
            f"1:1 matching infeasible: {n_control} controls < {n_treated} treated"
        )
    pairs, unmatched = _greedy_match(scores, caliper=None)
    assert not unmatched
    return MatchResult(pairs=pairs, unmatched_treated=[], method="nn_1to1")


def _rows_for_ids(data: DesignMatrix, ids):
    lookup = {uid: i for i, uid in enumerate(data.unit_ids.tolist())}
    try:
        return np.array([lookup[i] for i in ids], dtype=int)
    except KeyError as exc:
        raise ContractError(f"unknown unit id: {exc.args[0]!r}") from None


def balance_report(match: MatchResult, data: DesignMatrix) -> dict:
    """Covariate balance over the matched units vs the unmatched pool."""
    if not match.pairs:
        raise EstimationError("empty match result")
    rows_t = _rows_for_ids(data, match.treated_ids())
    rows_c = _rows_for_ids(data, match.control_ids())
    report = {}
    for j, name in enumerate(data.covariate_names):
        col = data.X[:, j]
        xt, xc = col[rows_t], col[rows_c]
        matched = np.concatenate([xt, xc])
        var_matched = float(np.var(matched))
        var_pool = float(np.var(col))
        report[name] = {
            "mean_c": float(np.mean(xc)),
            "mean_t": float(np.mean(xt)),
            "std_c": float(np.std(xc)),
            "std_t": float(np.std(xt)),
            "variance_reduction_vs_unmatched": (
                1.0 - var_matched / var_pool if var_pool > 0 else 0.0
            ),
        }
    return report


def standardized_mean_difference(x_treated, x_control) -> float:
    x_t = np.asarray(x_treated, dtype=float)
    x_c = np.asarray(x_control, dtype=float)
    denom = np.sqrt((np.var(x_t, ddof=1) + np.var(x_c, ddof=1)) / 2.0)
    if denom == 0:
        return 0.0
    return float((np.mean(x_t) - np.mean(x_c)) / denom)


def positivity_check(scores: PropensityScores, bins: int = 10) -> dict:
    """Flag score-histogram bins occupied by only one group."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    edges = np.linspace(0.0, 1.0, bins + 1)
    which = np.clip(np.digitize(scores.mean_score, edges) - 1, 0, bins - 1)
    violating = []
    overlap_units = 0
    for b in range(bins):
        in_bin = which == b
        n_t = int(np.sum(in_bin & scores.treated))
        n_c = int(np.sum(in_bin & ~scores.treated))
        if (n_t == 0) != (n_c == 0):
            violating.append(b)
        if n_t > 0 and n_c > 0:
            overlap_units += n_t + n_c
    total = len(scores.mean_score)
    return {
        "violating_bins": violating,
        "overlap_fraction": overlap_units / total if total else 0.0,
        "bins": bins,
    }


def ate_psm(match: MatchResult, y) -> ATEEstimate:
    """Matched treated-minus-control mean difference.

    ``y`` maps unit id to outcome. The interval is a paired-difference
    94% normal interval over the matched pairs.
    """
    if not match.pairs:
        raise EstimationError("no matched pairs")
    try:
        diffs = np.array([y[tid] - y[cid] for tid, cid, _ in match.pairs], dtype=float)
    except (KeyError, IndexError) as exc:
        raise ContractError(f"unit id missing from y: {exc.args[0]!r}") from None
    point = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1) / np.sqrt(diffs.size)) if diffs.size > 1 else 0.0
    return ATEEstimate(
        point=point,
        interval=(point - effects.Z_94 * se, point + effects.Z_94 * se),
        estimand="ate_psm",
    )


def cate(data: DesignMatrix, y, subgroup) -> ATEEstimate:
    """ATE restricted to the rows whose covariates satisfy ``subgroup``.

    ``subgroup`` is a predicate over a {covariate name: value} mapping.
    """
    y = np.asarray(y, dtype=float)
    mask = np.array(
        [
            bool(subgroup(dict(zip(data.covariate_names, row))))
            for row in data.X
        ]
    )
    t = data.t[mask]
    if not np.any(t == 1) or not np.any(t == 0):
        raise PositivityError("subgroup must contain both treated and control units")
    est = effects.mean_difference(y[mask][t == 1], y[mask][t == 0], estimand="cate")
    return est
