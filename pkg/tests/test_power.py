import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom as binom_dist

from sampleplan.errors import InfeasibleError
from sampleplan.power import (
    MonteCarloPower,
    SampleSizePlan,
    TwoProportionSpec,
    allocation_samsize,
    analytic_power,
    equal_allocation_samsize,
    max_power_vs_infinite_test,
    n_new_for_fixed_n_old,
    simulated_power,
)
from sampleplan.special import norm_ppf


def spec(p1, p2, n1, n2, alpha=0.05):
    return TwoProportionSpec(p1=p1, p2=p2, n1=n1, n2=n2, alpha=alpha)


def exact_pooled_rejection(p1, p2, n1, n2, alpha=0.05):
    """Brute-force rejection probability by enumerating all (k1, k2)."""
    zc = norm_ppf(1 - alpha / 2)
    k1 = np.arange(n1 + 1)
    k2 = np.arange(n2 + 1)
    w1 = binom_dist.pmf(k1, n1, p1)[:, None]
    w2 = binom_dist.pmf(k2, n2, p2)[None, :]
    p1h = (k1 / n1)[:, None]
    p2h = (k2 / n2)[None, :]
    pp = (k1[:, None] + k2[None, :]) / (n1 + n2)
    var = pp * (1 - pp) * (1 / n1 + 1 / n2)
    d = np.abs(p1h - p2h)
    rej = np.where(var > 0, d >= zc * np.sqrt(var), d > 0)
    return float((w1 * w2 * rej).sum())


class TestAnalyticPower:
    def test_null_gives_alpha(self):
        for alpha in [0.01, 0.05, 0.1]:
            assert analytic_power(spec(0.6, 0.6, 40, 70, alpha)) == pytest.approx(
                alpha, abs=1e-12
            )

    def test_small_old_test_set(self):
        # the approximation gives ~0.647 here; the simulated truth is lower
        assert analytic_power(spec(0.75, 0.9, 25, 10**5)) == pytest.approx(
            0.647, abs=2e-3
        )

    def test_consistent_with_equal_allocation(self):
        assert analytic_power(spec(0.75, 0.9, 100, 100)) == pytest.approx(0.80, abs=5e-3)

    def test_degenerate_both_proportions(self):
        with pytest.raises(ValueError, match="degenerate"):
            analytic_power(spec(0.0, 1.0, 10, 10))

    def test_monotone_in_sample_sizes_and_effect(self):
        base = analytic_power(spec(0.7, 0.85, 50, 50))
        assert analytic_power(spec(0.7, 0.85, 80, 50)) >= base
        assert analytic_power(spec(0.7, 0.85, 50, 80)) >= base
        assert analytic_power(spec(0.7, 0.9, 50, 50)) >= base


class TestEqualAllocation:
    def test_published_table_value(self):
        assert equal_allocation_samsize(0.75, 0.9) == pytest.approx(99.54, abs=0.01)

    def test_direct_formula_evaluation(self):
        assert equal_allocation_samsize(0.5, 1.0) == pytest.approx(10.5, abs=0.3)

    def test_symmetric_in_swap(self):
        assert equal_allocation_samsize(0.1, 0.9) == pytest.approx(
            equal_allocation_samsize(0.9, 0.1), abs=1e-12
        )

    def test_equal_proportions_infeasible(self):
        with pytest.raises(InfeasibleError):
            equal_allocation_samsize(0.8, 0.8)


class TestAllocation:
    def test_reduces_to_equal_at_half(self):
        plan = allocation_samsize(0.75, 0.9, fraction=0.5)
        assert plan.n1 == pytest.approx(99.54, abs=0.01)
        assert plan.n2 == pytest.approx(plan.n1, abs=1e-9)

    def test_total_symmetric_under_relabeling(self):
        for f in [0.2, 0.35, 0.45]:
            a = allocation_samsize(0.75, 0.9, fraction=f)
            b = allocation_samsize(0.9, 0.75, fraction=1 - f)
            assert a.total == pytest.approx(b.total, rel=1e-9)

    def test_plan_power_round_trip(self):
        # the size formula inverts the main rejection term of the two-sided
        # power, so plugging the plan back in recovers the target up to the
        # (tiny, always positive) wrong-side rejection probability
        for f in [0.25, 0.5, 0.7]:
            for power in [0.8, 0.9]:
                plan = allocation_samsize(0.8, 0.95, fraction=f, power=power)
                achieved = analytic_power(
                    spec(0.8, 0.95, plan.n1, plan.n2, plan.alpha)
                )
                assert power - 1e-9 <= achieved <= power + 1e-4

    def test_plan_power_round_trip_tight_for_moderate_effect(self):
        plan = allocation_samsize(0.75, 0.9, fraction=0.5, power=0.8)
        achieved = analytic_power(spec(0.75, 0.9, plan.n1, plan.n2, plan.alpha))
        assert achieved == pytest.approx(0.8, abs=1e-6)

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            allocation_samsize(0.7, 0.9, fraction=0.0)


class TestNNewForFixedNOld:
    def test_published_63(self):
        assert n_new_for_fixed_n_old(0.75, 25, 0.975, alpha=0.1, power=0.9) == 63

    def test_published_117(self):
        assert n_new_for_fixed_n_old(0.75, 25, 0.96, alpha=0.1, power=0.9) == 117

    def test_figure_anchor_116(self):
        n = n_new_for_fixed_n_old(0.75, 25, 0.99, alpha=0.05, power=0.95)
        assert abs(n - 116) <= 6

    def test_infeasible_names_max_power(self):
        with pytest.raises(InfeasibleError, match="power 0.6"):
            n_new_for_fixed_n_old(0.75, 25, 0.9, alpha=0.05, power=0.8)

    def test_non_increasing_in_p_new(self):
        # infeasible targets count as an infinite requirement
        def n_or_inf(p_new):
            try:
                return n_new_for_fixed_n_old(0.75, 25, p_new, alpha=0.1, power=0.9)
            except InfeasibleError:
                return np.inf

        prev = np.inf
        for p_new in np.arange(0.90, 1.0001, 0.005):
            n = n_or_inf(float(p_new))
            assert n <= prev
            prev = n


class TestMaxPower:
    def test_moderate_improvement_ceiling(self):
        assert max_power_vs_infinite_test(0.75, 25, 0.9) == pytest.approx(0.65, abs=5e-3)

    def test_null_is_alpha(self):
        assert max_power_vs_infinite_test(0.8, 30, 0.8, alpha=0.05) == pytest.approx(
            0.05, abs=1e-9
        )

    def test_large_improvement(self):
        assert max_power_vs_infinite_test(0.75, 25, 0.975) == pytest.approx(
            0.97, abs=5e-3
        )


class TestSimulatedPower:
    def test_type_one_error_rate(self):
        mc = simulated_power(spec(0.5, 0.5, 50, 50), replicates=100_000, seed=11)
        assert mc.estimate == pytest.approx(0.05, abs=0.01)

    def test_matches_analytic_at_moderate_sizes(self):
        mc = simulated_power(spec(0.75, 0.9, 100, 100), replicates=100_000, seed=3)
        assert mc.estimate == pytest.approx(0.80, abs=0.02)

    def test_deterministic_given_seed(self):
        a = simulated_power(spec(0.7, 0.9, 40, 60), replicates=20_000, seed=42)
        b = simulated_power(spec(0.7, 0.9, 40, 60), replicates=20_000, seed=42)
        assert a == b

    def test_worker_count_invariance(self):
        a = simulated_power(spec(0.7, 0.9, 40, 60), replicates=50_000, seed=9, workers=1)
        b = simulated_power(spec(0.7, 0.9, 40, 60), replicates=50_000, seed=9, workers=4)
        assert a.estimate == b.estimate

    def test_matches_exact_enumeration(self):
        for p1, p2, n1, n2 in [(0.75, 0.9, 20, 30), (0.6, 0.8, 15, 15), (0.5, 0.95, 25, 10)]:
            exact = exact_pooled_rejection(p1, p2, n1, n2)
            mc = simulated_power(spec(p1, p2, n1, n2), replicates=100_000, seed=5)
            se = np.sqrt(exact * (1 - exact) / 100_000)
            assert abs(mc.estimate - exact) <= 3 * se

    def test_non_integer_sizes_flagged(self):
        mc = simulated_power(spec(0.7, 0.9, 40.4, 60), replicates=2000, seed=1)
        assert mc.n_rounded

    def test_too_few_replicates(self):
        with pytest.raises(ValueError, match="1000"):
            simulated_power(spec(0.7, 0.9, 40, 60), replicates=500)

    def test_degenerate_proportions_never_reject_equal(self):
        mc = simulated_power(spec(1.0, 1.0, 10, 10), replicates=2000, seed=2)
        assert mc.estimate == 0.0

    def test_degenerate_proportions_always_reject_different(self):
        mc = simulated_power(spec(0.0, 1.0, 10, 10), replicates=2000, seed=2)
        assert mc.estimate == 1.0


class TestTypes:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            TwoProportionSpec(p1=1.2, p2=0.5, n1=10, n2=10)
        with pytest.raises(ValueError):
            TwoProportionSpec(p1=0.5, p2=0.5, n1=0.5, n2=10)
        with pytest.raises(ValueError):
            TwoProportionSpec(p1=0.5, p2=0.6, n1=10, n2=10, alpha=0.0)

    def test_plan_fraction_consistency(self):
        with pytest.raises(ValueError):
            SampleSizePlan(n1=10, n2=20, fraction=0.5, power=0.8, alpha=0.05)

    def test_mc_interval_ordering(self):
        with pytest.raises(ValueError):
            MonteCarloPower(0.5, 0.6, 0.7, 1000, 0)

    @given(
        p1=st.floats(min_value=0.05, max_value=0.95),
        delta=st.floats(min_value=0.02, max_value=0.5),
        n1=st.integers(min_value=2, max_value=500),
        n2=st.integers(min_value=2, max_value=500),
    )
    @settings(max_examples=50, deadline=None)
    def test_power_always_probability(self, p1, delta, n1, n2):
        p2 = min(1.0, p1 + delta)
        pw = analytic_power(spec(p1, p2, n1, n2))
        assert 0.0 <= pw <= 1.0
