"""Synthetic fleet studies with known ground truth.

Three scenarios mirror the three study designs: a confounded treatment
assignment (for matching), a two-period panel with an unobserved common
shock (for difference-in-differences), and a deterministic cutoff on a
running variable (for regression discontinuity). Each returns the
dataset plus a truth record sufficient to compute the estimand in closed
form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .bdid import PanelDataset
from .brdd import RddDataset
from .pipeline import DesignMatrix
from .prob_core import sigmoid

__all__ = [
    "ScenarioSpec",
    "simulate_confounded",
    "simulate_seasonal_panel",
    "simulate_discontinuity",
    "write_design_csv",
    "write_panel_csv",
    "write_rdd_csv",
]


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    n_control: int = 200
    n_treated: int = 40
    true_ate: float = -0.3
    confound_strength: float = 0.0
    seasonal_amplitude: float = 0.0
    cutoff: float = 60.0
    slope: float = 0.5
    interaction_slope: float = 0.0
    z_coef: float = 0.5
    noise_sd: float = 0.5
    n_covariates: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in ("confounded_psm", "seasonal_did", "cutoff_rdd"):
            raise ValueError(f"unknown scenario: {self.scenario!r}")
        if self.n_control < 2 or self.n_treated < 2:
            raise ValueError("group sizes must be >= 2")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be > 0")


def simulate_confounded(spec: ScenarioSpec) -> tuple[DesignMatrix, dict]:
    """Covariate-driven treatment assignment with a confounded outcome.

    The first covariate drives both the treatment propensity (slope =
    confound_strength) and the outcome baseline, so the naive contrast is
    biased whenever confound_strength > 0.
    """
    if spec.scenario != "confounded_psm":
        raise ValueError("spec.scenario must be 'confounded_psm'")
    rng = np.random.default_rng(spec.seed)
    n = spec.n_control + spec.n_treated
    X = rng.uniform(0.0, 1.0, size=(n, spec.n_covariates))
    # intercept chosen so the expected treated share matches the spec
    share = spec.n_treated / n
    alpha = np.log(share / (1.0 - share)) - spec.confound_strength * 0.5
    propensity = sigmoid(alpha + spec.confound_strength * X[:, 0])
    t = None
    for _ in range(1000):
        cand = (rng.uniform(size=n) < propensity).astype(int)
        if cand.any() and not cand.all():
            t = cand
            break
    if t is None:
        raise RuntimeError("could not draw a mixed treatment assignment")
    baseline = spec.confound_strength * X[:, 0]
    y = baseline + spec.true_ate * t + rng.normal(0.0, spec.noise_sd, size=n)
    data = DesignMatrix(
        unit_ids=np.arange(n),
        X=X,
        t=t,
        y=y,
        covariate_names=[f"x{j + 1}" for j in range(spec.n_covariates)],
    )
    truth = {"true_ate": spec.true_ate, "true_propensity": propensity}
    return data, truth


def simulate_seasonal_panel(spec: ScenarioSpec) -> tuple[PanelDataset, dict]:
    """Two-period panel with an unobserved shock common to both groups.

    The groups start from different baselines (confound_strength sets the
    gap), both shift by seasonal_amplitude between periods, and the
    treated group additionally shifts by true_ate.
    """
    if spec.scenario != "seasonal_did":
        raise ValueError("spec.scenario must be 'seasonal_did'")
    rng = np.random.default_rng(spec.seed)
    n = spec.n_control + spec.n_treated
    treated = np.concatenate(
        [np.zeros(spec.n_control, dtype=bool), np.ones(spec.n_treated, dtype=bool)]
    )
    base = spec.confound_strength * treated.astype(float)
    y_pre = base + rng.normal(0.0, spec.noise_sd, size=n)
    y_post = (
        base
        + spec.seasonal_amplitude
        + spec.true_ate * treated.astype(float)
        + rng.normal(0.0, spec.noise_sd, size=n)
    )
    panel = PanelDataset(
        unit_ids=np.arange(n), y_pre=y_pre, y_post=y_post, treated=treated
    )
    truth = {"true_ate": spec.true_ate, "seasonal_shift": spec.seasonal_amplitude}
    return panel, truth


def simulate_discontinuity(spec: ScenarioSpec) -> tuple[RddDataset, dict]:
    """Sharp cutoff on a uniform running variable.

    y = 2 + slope*(x - c) + true_ate*t + interaction_slope*(x - c)*t
        + z_coef*z + noise, with t = 1(x >= c) and z independent.
    """
    if spec.scenario != "cutoff_rdd":
        raise ValueError("spec.scenario must be 'cutoff_rdd'")
    rng = np.random.default_rng(spec.seed)
    n = spec.n_control + spec.n_treated
    c = spec.cutoff
    x = rng.uniform(c - 20.0, c + 20.0, size=n)
    t = (x >= c).astype(float)
    z = rng.uniform(0.0, 1.0, size=n)
    xc = x - c
    y = (
        2.0
        + spec.slope * xc
        + spec.true_ate * t
        + spec.interaction_slope * xc * t
        + spec.z_coef * z
        + rng.normal(0.0, spec.noise_sd, size=n)
    )
    data = RddDataset(assignment=x, y=y, cutoff=c, z=z)
    truth = {"true_ate": spec.true_ate}
    return data, truth


def write_design_csv(data: DesignMatrix, path) -> None:
    """Unit-level CSV: unit_id, group, y, covariates."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit_id", "group", "y"] + data.covariate_names)
        for i in range(len(data.unit_ids)):
            writer.writerow(
                [
                    data.unit_ids[i],
                    "treatment" if data.t[i] else "control",
                    repr(float(data.y[i])),
                ]
                + [repr(float(v)) for v in data.X[i]]
            )


def write_panel_csv(panel: PanelDataset, path) -> None:
    """Long-format CSV: unit_id, group, period (pre/post), y."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit_id", "group", "period", "y"])
        for period, ys in (("pre", panel.y_pre), ("post", panel.y_post)):
            for i in range(len(panel.unit_ids)):
                writer.writerow(
                    [
                        panel.unit_ids[i],
                        "treatment" if panel.treated[i] else "control",
                        period,
                        repr(float(ys[i])),
                    ]
                )


def write_rdd_csv(data: RddDataset, path) -> None:
    """CSV: unit_id, assignment x, y, z."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        cols = ["unit_id", "x", "y"] + (["z"] if data.z is not None else [])
        writer.writerow(cols)
        for i in range(len(data.y)):
            row = [data.unit_ids[i], repr(float(data.assignment[i])), repr(float(data.y[i]))]
            if data.z is not None:
                row.append(repr(float(data.z[i])))
            writer.writerow(row)
