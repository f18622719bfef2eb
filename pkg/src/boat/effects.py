"""Treatment-effect containers and the plain (naive) ATE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, PositivityError

__all__ = ["ATEEstimate", "Z_94", "naive_ate", "mean_difference"]

# standard-normal quantile at 0.97 (central 94% interval half-width in SDs)
Z_94 = 1.8807936081512509


@dataclass
class ATEEstimate:
    """Point estimate plus uncertainty for one estimand.

    ``draws`` holds posterior draws when the estimate is posterior-based;
    otherwise the interval is a normal-approximation interval.
    """

    point: float
    interval: tuple[float, float]
    estimand: str
    draws: np.ndarray | None = None

    def __post_init__(self):
        if self.draws is not None:
            self.draws = np.asarray(self.draws, dtype=float)
        lo, hi = self.interval
        if self.draws is not None and not (lo <= self.point <= hi):
            raise ValueError("point estimate must lie inside the interval")

    def to_dict(self) -> dict:
        return {
            "point": float(self.point),
            "interval_94": [float(self.interval[0]), float(self.interval[1])],
            "estimand": self.estimand,
        }


def from_draws(draws, estimand: str) -> ATEEstimate:
    draws = np.asarray(draws, dtype=float)
    lo, hi = np.quantile(draws, [0.03, 0.97])
    return ATEEstimate(
        point=float(np.mean(draws)),
        interval=(float(lo), float(hi)),
        estimand=estimand,
        draws=draws,
    )


def mean_difference(y_treated, y_control, estimand: str) -> ATEEstimate:
    """Difference of group means with a two-sample 94% normal interval."""
    y_t = np.asarray(y_treated, dtype=float)
    y_c = np.asarray(y_control, dtype=float)
    if y_t.size == 0 or y_c.size == 0:
        raise EstimationError("both groups must be non-empty")
    point = float(np.mean(y_t) - np.mean(y_c))
    se = float(
        np.sqrt(
            np.var(y_t, ddof=1) / y_t.size + np.var(y_c, ddof=1) / y_c.size
        )
    ) if y_t.size > 1 and y_c.size > 1 else 0.0
    return ATEEstimate(
        point=point,
        interval=(point - Z_94 * se, point + Z_94 * se),
        estimand=estimand,
    )


def naive_ate(t, y) -> ATEEstimate:
    """Unadjusted treated-minus-control mean difference."""
    t = np.asarray(t).astype(int)
    y = np.asarray(y, dtype=float)
    if not np.any(t == 1) or not np.any(t == 0):
        raise PositivityError("need both treated and control units")
    return mean_difference(y[t == 1], y[t == 0], estimand="ate")
