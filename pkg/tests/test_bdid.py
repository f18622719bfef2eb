import numpy as np
import pytest

from boat.bdid import (
    PanelDataset,
    ate_did,
    ate_did_from_means,
    fit_did,
    parallel_trend_check,
)
from boat.errors import ContractError, InsufficientDataError
from boat.nuts import PosteriorSamples, SamplerConfig

FAST = SamplerConfig(draws=1200, warmup=300, chains=2, seed=0)


def make_panel(seed=0, n=60, effect=1.0, shock=0.5):
    rng = np.random.default_rng(seed)
    treated = np.zeros(n, dtype=bool)
    treated[: n // 3] = True
    base = rng.normal(0, 1, n) * 0 + 0.5 * treated
    y_pre = base + rng.normal(0, 0.3, n)
    y_post = base + shock + effect * treated + rng.normal(0, 0.3, n)
    return PanelDataset(
        unit_ids=np.arange(n), y_pre=y_pre, y_post=y_post, treated=treated
    )


class TestCellMeanArithmetic:
    def test_reported_fleet_means(self):
        # control 205.30 -> 218.93, treatment 190.45 -> 204.36
        v = ate_did_from_means(205.30, 218.93, 190.45, 204.36)
        assert v == pytest.approx(0.28, abs=0.005)

    def test_hand_values(self):
        assert ate_did_from_means(1.0, 2.0, 3.0, 5.0) == pytest.approx(1.0)

    def test_no_change_anywhere(self):
        assert ate_did_from_means(4.2, 4.2, 7.7, 7.7) == 0.0

    def test_common_shock_cancels(self):
        base = ate_did_from_means(1.0, 2.0, 3.0, 5.0)
        shocked = ate_did_from_means(1.0 + 9, 2.0 + 9, 3.0, 5.0 + 9 - 9)
        # adding the same shock to both post cells leaves the value alone
        assert ate_did_from_means(1.0, 2.0 + 9, 3.0, 5.0 + 9) == pytest.approx(base)
        del shocked


class TestPanelDataset:
    def test_one_group_missing(self):
        with pytest.raises(ContractError):
            PanelDataset(
                unit_ids=np.arange(3),
                y_pre=np.zeros(3),
                y_post=np.zeros(3),
                treated=np.ones(3, dtype=bool),
            )

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            PanelDataset(
                unit_ids=np.arange(3),
                y_pre=np.zeros(2),
                y_post=np.zeros(3),
                treated=np.array([True, False, False]),
            )

    def test_covariates_both_or_neither(self):
        with pytest.raises(ContractError):
            PanelDataset(
                unit_ids=np.arange(2),
                y_pre=np.zeros(2),
                y_post=np.zeros(2),
                treated=np.array([True, False]),
                X_pre=np.zeros((2, 1)),
            )


class TestFitDid:
    def test_recovers_interaction(self):
        panel = make_panel(seed=1, effect=1.0)
        post = fit_did(panel, cfg=FAST)
        est = ate_did(post)
        lo, hi = est.interval
        assert lo <= 1.0 <= hi
        assert abs(est.point - 1.0) < 0.3

    def test_constant_outcome_shift_invariance(self):
        panel = make_panel(seed=2)
        shifted = PanelDataset(
            unit_ids=panel.unit_ids,
            y_pre=panel.y_pre + 5.0,
            y_post=panel.y_post + 5.0,
            treated=panel.treated,
        )
        a = ate_did(fit_did(panel, cfg=FAST))
        b = ate_did(fit_did(shifted, cfg=FAST))
        # the interaction term is shift invariant up to sampler noise
        assert abs(a.point - b.point) < 0.15

    def test_cell_mean_consistency(self):
        panel = make_panel(seed=3, effect=0.8)
        post = fit_did(panel, cfg=SamplerConfig(draws=2200, warmup=400, chains=2, seed=4))
        est = ate_did(post)
        cells = ate_did_from_means(
            float(np.mean(panel.y_pre[~panel.treated])),
            float(np.mean(panel.y_post[~panel.treated])),
            float(np.mean(panel.y_pre[panel.treated])),
            float(np.mean(panel.y_post[panel.treated])),
        )
        # saturated model: posterior mean approaches the cell-mean value
        assert est.point == pytest.approx(cells, abs=0.12)

    def test_missing_interaction_param(self):
        post = PosteriorSamples(
            param_names=["alpha"], draws=np.zeros((1, 10, 1))
        )
        with pytest.raises(ContractError):
            ate_did(post)


class TestParallelTrend:
    def test_identical_series_pass(self):
        r = parallel_trend_check([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
        assert r["pass"]
        assert r["abs_slope_gap"] == pytest.approx(0.0, abs=1e-12)

    def test_hand_slopes(self):
        r = parallel_trend_check([0.0, 2.0], [0.0, 1.0], tolerance=0.5)
        assert r["slope_c"] == pytest.approx(2.0)
        assert r["slope_t"] == pytest.approx(1.0)
        assert r["abs_slope_gap"] == pytest.approx(1.0)
        assert not r["pass"]

    def test_default_tolerance_is_quarter_sd(self):
        yc, yt = [1.0, 2.0, 3.0], [1.0, 2.5, 4.0]
        r = parallel_trend_check(yc, yt)
        expected = 0.25 * float(np.std(np.concatenate([yc, yt])))
        assert r["tolerance"] == pytest.approx(expected)

    def test_too_few_points(self):
        with pytest.raises(InsufficientDataError):
            parallel_trend_check([1.0], [1.0])

    def test_unequal_lengths(self):
        with pytest.raises(ContractError):
            parallel_trend_check([1.0, 2.0], [1.0, 2.0, 3.0])
