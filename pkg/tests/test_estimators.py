import math

import numpy as np
import pytest

from groupdyn import (
    ConfigError,
    DegenerateModelError,
    DegeneratePairError,
    EstimationError,
    FactorPair,
    GroupModelParams,
    GroupTrajectory,
    IndividualModel,
    ObservedActions,
    TickTally,
    estimate_factors,
    estimate_factors_pair,
    estimate_mu,
    meso_to_macro,
    micro_to_meso,
    mixture_density,
    mixture_log_slope,
    predict_group_next,
    non_radical_exponent,
    winner_threshold,
)
from groupdyn.dataio import EventRecord
from groupdyn.simulator import substream

E = math.e


class TestMicroToMeso:
    def test_two_half_users(self):
        params = micro_to_meso(IndividualModel(np.array([0.5, 0.5])))
        assert params.drift == pytest.approx(1.0)
        assert params.variance == pytest.approx(0.5)

    def test_degenerate_model(self):
        with pytest.raises(DegenerateModelError):
            micro_to_meso(IndividualModel(np.array([1.0, 0.0])))

    def test_homogeneous_closed_form(self):
        m, p = 1000, 0.37
        params = micro_to_meso(IndividualModel.homogeneous(m, p))
        assert params.drift == pytest.approx(m * p, rel=1e-12)
        assert params.variance == pytest.approx(m * p * (1 - p), rel=1e-12)

    def test_linearity_over_disjoint_union(self):
        rng = substream(42, 9)
        for _ in range(10):
            mu_a = rng.uniform(0.05, 0.95, size=rng.integers(2, 20))
            mu_b = rng.uniform(0.05, 0.95, size=rng.integers(2, 20))
            pa = micro_to_meso(IndividualModel(mu_a))
            pb = micro_to_meso(IndividualModel(mu_b))
            pu = micro_to_meso(IndividualModel(np.concatenate([mu_a, mu_b])))
            assert pu.drift == pytest.approx(pa.drift + pb.drift, rel=1e-12)
            assert pu.variance == pytest.approx(pa.variance + pb.variance, rel=1e-12)


class TestMesoToMacro:
    def test_reference_point(self):
        macro = meso_to_macro(GroupModelParams(1.0, 1.0), 0.5)
        assert macro.exponent == pytest.approx(-math.sqrt(2.0), rel=1e-14)
        assert macro.amplitude == pytest.approx(0.5 / math.sqrt(2.0), rel=1e-14)

    def test_small_rate_limit(self):
        # alpha -> -1 - rate + O(rate^2) at drift = variance = 1
        alpha = meso_to_macro(GroupModelParams(1.0, 1.0), 1e-6).exponent
        assert abs(alpha + 1.0 + 1e-6) < 1e-11

    def test_accepts_small_observed_rates(self):
        for rate in (0.008, 0.1, 0.23):
            macro = meso_to_macro(GroupModelParams(2.0, 1.5), rate)
            assert macro.window_rate == rate

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ConfigError):
            meso_to_macro(GroupModelParams(1.0, 1.0), 0.0)


class TestMixtureOracle:
    def test_slope_matches_closed_form(self):
        params = GroupModelParams(1.0, 1.0)
        slope = mixture_log_slope(params, 0.5, np.logspace(1, 4, 20))
        assert slope == pytest.approx(-math.sqrt(2.0), abs=0.01)

    def test_density_finite_at_unit_total(self):
        params = GroupModelParams(1.0, 1.0)
        value = mixture_density(params, 0.5, 1.0)
        assert math.isfinite(value) and value > 0
        # At N = 1 the closed form collapses to the amplitude itself.
        assert value == pytest.approx(meso_to_macro(params, 0.5).amplitude, rel=1e-6)

    def test_doubling_ratio(self):
        params = GroupModelParams(1.0, 1.0)
        alpha = meso_to_macro(params, 0.5).exponent
        ratio = mixture_density(params, 0.5, 2e4) / mixture_density(params, 0.5, 1e4)
        assert ratio == pytest.approx(2.0**alpha, rel=1e-6)

    def test_subgrid_agreement_and_alt_form_gap(self):
        totals = np.logspace(2, 5, 15)
        gap_seen = 0.0
        for tau in (0.5, 2.0):
            for var in (0.5, 2.0):
                for lam in (0.1, 1.0):
                    params = GroupModelParams(tau, var)
                    slope = mixture_log_slope(params, lam, totals)
                    macro = meso_to_macro(params, lam)
                    assert slope == pytest.approx(macro.exponent, abs=0.01)
                    # density level, not just slope
                    for total in (1e3, 1e5):
                        closed = macro.amplitude * total**macro.exponent
                        assert mixture_density(params, lam, total) == pytest.approx(
                            closed, rel=1e-3
                        )
                    gap_seen = max(gap_seen, abs(slope - non_radical_exponent(params, lam)))
        assert gap_seen > 0.05


class TestWinnerThreshold:
    def test_reference_value(self):
        assert winner_threshold(99, 0.5) == pytest.approx(0.03, rel=1e-12)

    def test_exceeds_reciprocal_user_count(self):
        for m in (2, 10, 1000, 10**6):
            for lam in (0.01, 0.5, 3.0):
                assert winner_threshold(m, lam) > 1.0 / m

    def test_monotonicity(self):
        assert winner_threshold(100, 0.5) < winner_threshold(50, 0.5)
        assert winner_threshold(100, 0.5) < winner_threshold(100, 1.0)

    def test_alpha_negative_above_threshold_under_both_forms(self):
        m, lam, p = 100, 0.5, 0.05
        assert p > winner_threshold(m, lam)
        params = micro_to_meso(IndividualModel.homogeneous(m, p))
        assert meso_to_macro(params, lam).exponent < 0
        assert non_radical_exponent(params, lam) < 0


def build_obs(adoptions_v, adoptions_neighbors):
    """Two-neighbor star graph: v follows u1 and u2."""
    users = ["v", "u1", "u2"]
    edges = [("v", "u1"), ("v", "u2")]
    events = []
    t = 0
    for _ in range(adoptions_v):
        events.append(EventRecord(tick=t, user="v", action="z", value=1))
        t += 1
    for i in range(adoptions_neighbors):
        events.append(
            EventRecord(tick=i, user="u1" if i % 2 else "u2", action="z", value=1)
        )
    return ObservedActions(users, edges, events)


class TestEstimateMu:
    def test_plain_ratio(self):
        est = estimate_mu(build_obs(2, 10), "z", "v")
        assert est.value == pytest.approx(0.2)
        assert est.exposed and not est.clamped

    def test_zero_numerator(self):
        est = estimate_mu(build_obs(0, 7), "z", "v")
        assert est.value == 0.0 and est.exposed

    def test_clamped_above_one(self):
        est = estimate_mu(build_obs(3, 2), "z", "v")
        assert est.value == 1.0 and est.clamped

    def test_unobserved_exposure_floor(self):
        obs = build_obs(3, 0)
        est = estimate_mu(obs, "z", "v", floor=0.25)
        assert not est.exposed and est.value == 0.25
        assert estimate_mu(obs, "z", "v").value == 0.0

    def test_always_in_unit_interval(self):
        rng = substream(3, 9)
        for _ in range(30):
            est = estimate_mu(
                build_obs(int(rng.integers(0, 9)), int(rng.integers(0, 9))), "z", "v"
            )
            assert 0.0 <= est.value <= 1.0


def synthetic_trajectory(factors, adopters, users, action_id="syn"):
    """Forward-iterate the exact group update from crafted tallies."""
    tallies = [
        TickTally(tick=i + 1, adopters=int(a), non_adopters=users - int(a))
        for i, a in enumerate(adopters)
    ]
    log_counts = [0.0]
    for t in tallies:
        log_counts.append(
            log_counts[-1] + t.adopters * factors.log_up - t.non_adopters * factors.log_down
        )
    return GroupTrajectory(
        action_id=action_id,
        log_counts=np.array(log_counts),
        duration=float(len(tallies)),
        tallies=tallies,
    )


class TestFactorEstimation:
    def test_decoupled_pair(self):
        traj = GroupTrajectory(
            action_id="x",
            log_counts=np.array([0.0, 1.0, 0.5]),
            duration=2.0,
            tallies=[TickTally(1, 1, 0), TickTally(2, 0, 1)],
        )
        pair = estimate_factors_pair(traj, 0, 1)
        assert pair.up == pytest.approx(E, rel=1e-12)
        assert pair.down == pytest.approx(math.exp(0.5), rel=1e-12)

    def test_exact_recovery_every_pair(self):
        factors = FactorPair(1.5, 1.2)
        rng = substream(8, 9)
        adopters = rng.integers(1, 10, size=12)
        traj = synthetic_trajectory(factors, adopters, users=10)
        for t1 in range(11):
            for t2 in range(t1 + 1, 12):
                try:
                    pair = estimate_factors_pair(traj, t1, t2)
                except DegeneratePairError:
                    continue
                assert pair.up == pytest.approx(1.5, rel=1e-10)
                assert pair.down == pytest.approx(1.2, rel=1e-10)

    def test_windowed_average_recovery(self):
        factors = FactorPair(1.5, 1.2)
        rng = substream(9, 9)
        traj = synthetic_trajectory(factors, rng.integers(1, 10, size=15), users=10)
        est = estimate_factors(traj, window=10)
        assert est.factors.up == pytest.approx(1.5, rel=1e-9)
        assert est.factors.down == pytest.approx(1.2, rel=1e-9)
        assert est.pairs_used + est.pairs_skipped == 45

    def test_single_transition_fails(self):
        traj = synthetic_trajectory(FactorPair(1.5, 1.2), [3, 4], users=10)
        with pytest.raises(EstimationError):
            estimate_factors(traj, window=1)

    def test_proportional_tallies_degenerate(self):
        traj = GroupTrajectory(
            action_id="x",
            log_counts=np.array([0.0, 0.5, 1.0]),
            duration=2.0,
            tallies=[TickTally(1, 2, 4), TickTally(2, 1, 2)],
        )
        with pytest.raises(DegeneratePairError):
            estimate_factors_pair(traj, 0, 1)
        with pytest.raises(EstimationError):
            estimate_factors(traj)

    def test_equal_factor_trajectory(self):
        factors = FactorPair(E, E)
        rng = substream(10, 9)
        traj = synthetic_trajectory(factors, rng.integers(0, 8, size=10), users=8)
        est = estimate_factors(traj)
        assert est.factors.up == pytest.approx(E, rel=1e-9)
        assert est.factors.down == pytest.approx(E, rel=1e-9)


class TestPredictGroupNext:
    def test_cancelling_tallies(self):
        assert predict_group_next(100.0, TickTally(1, 5, 5), FactorPair(E, E)) == pytest.approx(
            100.0, rel=1e-12
        )

    def test_identity_factors(self):
        assert predict_group_next(42.0, TickTally(1, 9, 3), FactorPair(1.0, 1.0)) == pytest.approx(
            42.0
        )

    def test_zero_error_on_heldout_tail(self):
        factors = FactorPair(1.5, 1.2)
        rng = substream(11, 9)
        traj = synthetic_trajectory(factors, rng.integers(1, 10, size=20), users=10)
        est = estimate_factors(traj, window=10).factors
        counts = np.exp(traj.log_counts)
        for t in range(10, 19):
            predicted = predict_group_next(counts[t], traj.tallies[t], est)
            assert predicted == pytest.approx(counts[t + 1], rel=1e-9)
