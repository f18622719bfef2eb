import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boat.bpsm import (
    MatchResult,
    PropensityScores,
    ate_psm,
    balance_report,
    caliper_match,
    cate,
    fit_propensity,
    nn_match_1to1,
    positivity_check,
    propensity_scores,
    standardized_mean_difference,
)
from boat.effects import naive_ate
from boat.errors import ContractError, EstimationError, PositivityError
from boat.nuts import PosteriorSamples, SamplerConfig
from boat.pipeline import DesignMatrix


def make_scores(treated_scores, control_scores):
    scores = list(treated_scores) + list(control_scores)
    n_t = len(treated_scores)
    return PropensityScores(
        unit_ids=np.arange(len(scores)),
        mean_score=np.array(scores),
        treated=np.array([True] * n_t + [False] * len(control_scores)),
    )


def greedy_oracle(treated, control, caliper):
    """Brute-force greedy re-implementation used as the matching oracle."""
    t_order = sorted(range(len(treated)), key=lambda i: (-treated[i][1], treated[i][0]))
    available = {cid: s for cid, s in control}
    pairs, unmatched = [], []
    for i in t_order:
        tid, ts = treated[i]
        if not available:
            unmatched.append(tid)
            continue
        best = min(available, key=lambda cid: (abs(ts - available[cid]), cid))
        d = abs(ts - available[best])
        if caliper is not None and d > caliper:
            unmatched.append(tid)
            continue
        pairs.append((tid, best, d))
        del available[best]
    return pairs, unmatched


class TestCaliperMatch:
    def test_single_feasible(self):
        scores = make_scores([0.5], [0.48, 0.9])
        m = caliper_match(scores, 0.05)
        assert m.pairs == [(0, 1, pytest.approx(0.02))]
        assert m.unmatched_treated == []

    def test_caliper_excludes(self):
        scores = make_scores([0.5], [0.6])
        m = caliper_match(scores, 0.05)
        assert m.pairs == []
        assert m.unmatched_treated == [0]

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            n_t = rng.integers(1, 11)
            n_c = rng.integers(1, 15)
            ts = rng.uniform(0.05, 0.95, n_t)
            cs = rng.uniform(0.05, 0.95, n_c)
            scores = make_scores(ts, cs)
            m = caliper_match(scores, 0.1)
            treated = [(i, ts[i]) for i in range(n_t)]
            control = [(n_t + j, cs[j]) for j in range(n_c)]
            pairs, unmatched = greedy_oracle(treated, control, 0.1)
            assert [(a, b) for a, b, _ in m.pairs] == [(a, b) for a, b, _ in pairs]
            assert m.unmatched_treated == unmatched

    def test_empty_group_rejected(self):
        scores = make_scores([0.5], [])
        with pytest.raises(ContractError):
            caliper_match(scores, 0.05)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_every_distance_within_caliper(self, seed):
        rng = np.random.default_rng(seed)
        scores = make_scores(rng.uniform(0.01, 0.99, 8), rng.uniform(0.01, 0.99, 12))
        m = caliper_match(scores, 0.07)
        assert all(d <= 0.07 for _, _, d in m.pairs)


class TestNNMatch:
    def test_nearest(self):
        scores = make_scores([0.9], [0.1, 0.85])
        m = nn_match_1to1(scores)
        assert m.pairs == [(0, 2, pytest.approx(0.05))]

    def test_symmetric_perfect(self):
        scores = make_scores([0.4, 0.6], [0.4, 0.6])
        m = nn_match_1to1(scores)
        assert m.total_distance() == pytest.approx(0.0)
        assert len(m.pairs) == 2

    def test_infeasible(self):
        scores = make_scores([0.4, 0.6], [0.5])
        with pytest.raises(EstimationError):
            nn_match_1to1(scores)

    def test_controls_unique(self):
        rng = np.random.default_rng(4)
        scores = make_scores(rng.uniform(0.2, 0.8, 10), rng.uniform(0.2, 0.8, 20))
        m = nn_match_1to1(scores)
        controls = m.control_ids()
        assert len(controls) == len(set(controls)) == 10

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n_t = int(rng.integers(1, 11))
            n_c = int(rng.integers(n_t, n_t + 15))
            ts = rng.uniform(0.05, 0.95, n_t)
            cs = rng.uniform(0.05, 0.95, n_c)
            scores = make_scores(ts, cs)
            m = nn_match_1to1(scores)
            treated = [(i, ts[i]) for i in range(n_t)]
            control = [(n_t + j, cs[j]) for j in range(n_c)]
            pairs, _ = greedy_oracle(treated, control, None)
            assert [(a, b) for a, b, _ in m.pairs] == [(a, b) for a, b, _ in pairs]

    def test_matches_everyone_when_feasible(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            scores = make_scores(rng.uniform(0.1, 0.9, 6), rng.uniform(0.1, 0.9, 12))
            m = nn_match_1to1(scores)
            assert len(m.pairs) == 6
            assert m.unmatched_treated == []


class TestPropensityScores:
    def point_mass_posterior(self, names, values, n=100):
        draws = np.tile(np.asarray(values, dtype=float), (1, n, 1))
        return PosteriorSamples(param_names=names, draws=draws)

    def test_zero_params_give_half(self):
        dm = DesignMatrix(
            unit_ids=np.arange(4),
            X=np.random.default_rng(0).uniform(0, 1, (4, 1)),
            t=np.array([1, 0, 1, 0]),
            y=np.zeros(4),
            covariate_names=["x"],
        )
        post = self.point_mass_posterior(["alpha", "beta_x"], [0.0, 0.0])
        s = propensity_scores(post, dm)
        np.testing.assert_allclose(s.mean_score, 0.5)

    def test_sigmoid_identity(self):
        dm = DesignMatrix(
            unit_ids=np.array([0, 1]), X=np.array([[1.0], [1.0]]),
            t=np.array([1, 0]), y=np.zeros(2), covariate_names=["x"],
        )
        post = self.point_mass_posterior(["alpha", "beta_x"], [0.0, np.log(3.0)])
        s = propensity_scores(post, dm)
        assert s.mean_score[0] == pytest.approx(0.75)

    def test_name_mismatch(self):
        dm = DesignMatrix(
            unit_ids=np.array([0]), X=np.array([[1.0]]), t=np.array([1]),
            y=np.zeros(1), covariate_names=["x"],
        )
        post = self.point_mass_posterior(["alpha", "beta_other"], [0.0, 0.0])
        with pytest.raises(ContractError):
            propensity_scores(post, dm)

    def test_uncertainty_draws_shape(self):
        dm = DesignMatrix(
            unit_ids=np.arange(3), X=np.random.default_rng(1).uniform(0, 1, (3, 1)),
            t=np.array([1, 0, 0]), y=np.zeros(3), covariate_names=["x"],
        )
        post = self.point_mass_posterior(["alpha", "beta_x"], [0.2, -0.4])
        s = propensity_scores(post, dm, n_uncertainty_draws=25)
        assert s.draw_scores.shape == (25, 3)


class TestFitPropensity:
    def test_separation_error(self):
        dm = DesignMatrix(
            unit_ids=np.arange(4), X=np.random.default_rng(0).uniform(0, 1, (4, 2)),
            t=np.ones(4, dtype=int), y=np.zeros(4), covariate_names=["a", "b"],
        )
        with pytest.raises(PositivityError):
            fit_propensity(dm)

    def test_unscaled_covariates_warn(self):
        rng = np.random.default_rng(0)
        dm = DesignMatrix(
            unit_ids=np.arange(20), X=rng.uniform(0, 50, (20, 1)),
            t=rng.permutation([0, 1] * 10), y=np.zeros(20), covariate_names=["x"],
        )
        with pytest.warns(UserWarning):
            fit_propensity(dm, cfg=SamplerConfig(draws=20, warmup=10, chains=1, seed=0))

    def test_uninformative_covariate_beta_near_prior(self):
        rng = np.random.default_rng(5)
        n = 200
        dm = DesignMatrix(
            unit_ids=np.arange(n), X=np.zeros((n, 1)),
            t=rng.permutation([0, 1] * (n // 2)), y=np.zeros(n),
            covariate_names=["x"],
        )
        post = fit_propensity(dm, cfg=SamplerConfig(draws=800, warmup=200, chains=2, seed=3))
        beta = post.pooled("beta_x")
        assert abs(beta.mean()) < 0.2


class TestBalanceAndPositivity:
    def test_identical_matched_groups_zero_diff(self):
        X = np.array([[0.1], [0.5], [0.1], [0.5]])
        dm = DesignMatrix(
            unit_ids=np.arange(4), X=X, t=np.array([1, 1, 0, 0]),
            y=np.zeros(4), covariate_names=["x"],
        )
        match = MatchResult(pairs=[(0, 2, 0.0), (1, 3, 0.0)], unmatched_treated=[], method="nn_1to1")
        report = balance_report(match, dm)
        assert report["x"]["mean_c"] == report["x"]["mean_t"]

    def test_smd_zero_denominator(self):
        assert standardized_mean_difference([1, 1], [1, 1]) == 0.0

    def test_overlap_identical(self):
        scores = make_scores([0.2, 0.5, 0.8], [0.2, 0.5, 0.8])
        assert positivity_check(scores, bins=10)["overlap_fraction"] == 1.0

    def test_disjoint_supports(self):
        rng = np.random.default_rng(6)
        scores = make_scores(rng.uniform(0.7, 0.99, 20), rng.uniform(0.01, 0.3, 20))
        report = positivity_check(scores, bins=10)
        assert report["overlap_fraction"] == 0.0
        occupied = set(np.clip((np.concatenate([scores.mean_score]) * 10).astype(int), 0, 9))
        assert set(report["violating_bins"]) == occupied

    def test_flags_match_direct_oracle(self):
        rng = np.random.default_rng(7)
        scores = make_scores(rng.uniform(0, 1, 30), rng.uniform(0, 1, 30))
        bins = 8
        report = positivity_check(scores, bins=bins)
        edges = np.linspace(0, 1, bins + 1)
        expected = []
        for b in range(bins):
            lo, hi = edges[b], edges[b + 1]
            in_bin = (scores.mean_score >= lo) & (
                (scores.mean_score < hi) if b < bins - 1 else (scores.mean_score <= hi)
            )
            n_t = np.sum(in_bin & scores.treated)
            n_c = np.sum(in_bin & ~scores.treated)
            if (n_t == 0) != (n_c == 0):
                expected.append(b)
        assert report["violating_bins"] == expected

    def test_bins_validation(self):
        with pytest.raises(ValueError):
            positivity_check(make_scores([0.5], [0.5]), bins=1)


class TestAtePsm:
    def test_reported_group_means(self):
        # one pair with the reported group means reproduces the arithmetic
        match = MatchResult(pairs=[("t0", "c0", 0.0)], unmatched_treated=[], method="nn_1to1")
        est = ate_psm(match, {"t0": 0.355, "c0": 0.391})
        assert est.point == pytest.approx(-0.036, abs=1e-12)

    def test_identical_outcomes_zero(self):
        match = MatchResult(
            pairs=[(0, 10, 0.0), (1, 11, 0.0)], unmatched_treated=[], method="nn_1to1"
        )
        y = {0: 2.0, 1: 3.0, 10: 2.0, 11: 3.0}
        assert ate_psm(match, y).point == 0.0

    def test_hand_arithmetic(self):
        match = MatchResult(
            pairs=[(0, 3, 0.0), (1, 4, 0.0), (2, 5, 0.0)],
            unmatched_treated=[], method="nn_1to1",
        )
        y = {0: 1.0, 1: 2.0, 2: 6.0, 3: 0.0, 4: 1.0, 5: 2.0}
        est = ate_psm(match, y)
        assert est.point == pytest.approx((9 - 3) / 3)

    def test_self_matched_exactly_zero(self):
        match = MatchResult(
            pairs=[(i, i, 0.0) for i in range(5)], unmatched_treated=[], method="nn_1to1"
        )
        y = {i: float(i) ** 1.5 for i in range(5)}
        assert ate_psm(match, y).point == 0.0

    def test_empty_pairs(self):
        with pytest.raises(EstimationError):
            ate_psm(MatchResult([], [], "nn_1to1"), {})

    def test_missing_id(self):
        match = MatchResult(pairs=[(0, 1, 0.0)], unmatched_treated=[], method="nn_1to1")
        with pytest.raises(ContractError):
            ate_psm(match, {0: 1.0})


class TestCate:
    def make_data(self):
        X = np.array([[0.2], [0.3], [0.8], [0.9], [0.1], [0.7]])
        t = np.array([1, 0, 1, 0, 1, 0])
        y = np.array([1.0, 0.0, 5.0, 3.0, 2.0, 4.0])
        dm = DesignMatrix(
            unit_ids=np.arange(6), X=X, t=t, y=y, covariate_names=["z"]
        )
        return dm, y

    def test_full_subgroup_equals_ate(self):
        dm, y = self.make_data()
        full = cate(dm, y, lambda row: True)
        assert full.point == pytest.approx(naive_ate(dm.t, y).point)

    def test_partition_decomposition(self):
        dm, y = self.make_data()
        low = cate(dm, y, lambda row: row["z"] < 0.5)
        high = cate(dm, y, lambda row: row["z"] >= 0.5)
        mask = dm.X[:, 0] < 0.5
        # weights per arm: subgroup share within each treatment arm
        w_t = np.mean(dm.t[mask]) * np.sum(mask) / np.sum(dm.t)
        total = naive_ate(dm.t, y).point
        t_low = np.sum(mask & (dm.t == 1)) / np.sum(dm.t == 1)
        c_low = np.sum(mask & (dm.t == 0)) / np.sum(dm.t == 0)
        recombined_t = t_low * np.mean(y[mask & (dm.t == 1)]) + (1 - t_low) * np.mean(
            y[~mask & (dm.t == 1)]
        )
        recombined_c = c_low * np.mean(y[mask & (dm.t == 0)]) + (1 - c_low) * np.mean(
            y[~mask & (dm.t == 0)]
        )
        assert recombined_t - recombined_c == pytest.approx(total)
        # and the subgroup estimates are consistent with their own cells
        assert low.point == pytest.approx(
            np.mean(y[mask & (dm.t == 1)]) - np.mean(y[mask & (dm.t == 0)])
        )
        assert high.point == pytest.approx(
            np.mean(y[~mask & (dm.t == 1)]) - np.mean(y[~mask & (dm.t == 0)])
        )

    def test_single_group_subgroup(self):
        dm, y = self.make_data()
        with pytest.raises(PositivityError):
            cate(dm, y, lambda row: row["z"] < 0.15)


class TestMatchExport:
    def test_csv(self, tmp_path):
        match = MatchResult(pairs=[(0, 1, 0.25)], unmatched_treated=[], method="nn_1to1")
        path = tmp_path / "matches.csv"
        match.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "treated_id,control_id,distance"
        assert lines[1] == "0,1,0.25"
