"""
Unit tests for the Crump-Mode-Jagers comparison processes
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from analytics import UnsupportedRegimeError, compute_R0_star, solve_qtilde_star
from branching import (
    ReproductionLaw,
    early_phase_law,
    expected_population,
    extinction_time_ensemble,
    extinction_time_subcritical,
    final_phase_law,
    growth_trend,
    hitting_time_ensemble,
    hitting_time_supercritical,
    malthusian_parameter,
    simulate_cmj,
    survival_decay_rate,
)
from distributions import ConstantPeriod, DomainError, ExponentialPeriod, InfinitePeriod, RegularDegree
from tests.test_utils import (
    MARKOV_ALPHA_PRIME,
    MARKOV_ALPHA_STAR,
    cutoff_regular4,
    markov_regular4,
)


class TestReproductionLaws(unittest.TestCase):
    """Early- and final-phase laws of the Markov regular(4) epidemic"""

    def setUp(self):
        self.params = markov_regular4()
        self.early = early_phase_law(self.params)
        self.final = final_phase_law(self.params)

    def test_early_phase_mean_is_R0(self):
        self.assertAlmostEqual(self.early.mean_trials(), 3.0, places=12)
        self.assertAlmostEqual(self.early.mean_offspring(), 1.5, places=12)

    def test_final_phase_mean_is_R0_star(self):
        qtilde = solve_qtilde_star(self.params)
        self.assertAlmostEqual(self.final.mean_offspring(), compute_R0_star(self.params, qtilde), places=9)
        self.assertLess(self.final.mean_offspring(), 1.0)

    def test_malthusian_parameters_match_analytics(self):
        self.assertAlmostEqual(malthusian_parameter(self.early), MARKOV_ALPHA_PRIME, places=9)
        self.assertAlmostEqual(malthusian_parameter(self.final), MARKOV_ALPHA_STAR, places=8)

    def test_critical_law_has_zero_rate(self):
        law = ReproductionLaw(RegularDegree(3), 1.0, ExponentialPeriod(1.0), 1.0)
        self.assertAlmostEqual(law.mean_offspring(), 1.0, places=14)
        self.assertEqual(malthusian_parameter(law), 0.0)

    def test_trial_counts_are_thinned(self):
        law = ReproductionLaw(RegularDegree(4), 1.0, ExponentialPeriod(1.0), success=0.5)
        counts = law.sample_trials(np.random.default_rng(2), 100_000)
        self.assertTrue(((counts >= 0) & (counts <= 3)).all())
        self.assertAlmostEqual(float(counts.mean()), 1.5, delta=0.02)

    def test_invalid_laws(self):
        with self.assertRaises(DomainError):
            ReproductionLaw(RegularDegree(3), 0.0, ExponentialPeriod(1.0))
        with self.assertRaises(DomainError):
            ReproductionLaw(RegularDegree(3), 1.0, ExponentialPeriod(1.0), success=1.5)


class TestExpectedPopulation(unittest.TestCase):
    """Simulated E[Z(t)] against the renewal-equation closed form"""

    def _simulated_mean(self, law, t, replicates, seed):
        values = [simulate_cmj(law, 1, seed + r, horizon=t).alive_at(t) for r in range(replicates)]
        return float(np.mean(values))

    def test_early_phase_mean(self):
        law = early_phase_law(markov_regular4())
        expected = float(expected_population(law, 1.0))
        self.assertAlmostEqual(expected, (3.0 * math.e - math.exp(-1.0)) / 2.0, places=12)
        self.assertAlmostEqual(self._simulated_mean(law, 1.0, 3000, 100), expected, delta=0.4)

    def test_single_trial_mean(self):
        law = ReproductionLaw(RegularDegree(4), 1.0, ExponentialPeriod(1.0), success=1.0 / 3.0)
        expected = float(expected_population(law, 1.0))
        self.assertAlmostEqual(expected, 2.0 * math.exp(-1.0), places=12)
        self.assertAlmostEqual(self._simulated_mean(law, 1.0, 4000, 500), expected, delta=0.08)

    def test_scales_with_ancestors(self):
        law = early_phase_law(markov_regular4())
        times = np.array([0.0, 0.5, 2.0])
        np.testing.assert_allclose(expected_population(law, times, ancestors=4),
                                   4 * expected_population(law, times), rtol=1e-14)
        self.assertAlmostEqual(float(expected_population(law, 0.0)), 1.0, places=14)

    def test_requires_exponential_lifetimes(self):
        with self.assertRaises(DomainError):
            expected_population(early_phase_law(cutoff_regular4()), 1.0)


class TestPopulationTrace(unittest.TestCase):
    """Bookkeeping of a recorded run"""

    def setUp(self):
        self.final = final_phase_law(markov_regular4())
        self.early = early_phase_law(markov_regular4())

    def test_subcritical_run_dies_out(self):
        trace = simulate_cmj(self.final, 5, seed=3)
        self.assertTrue(trace.extinct)
        self.assertEqual(trace.stop_reason, "extinct")
        self.assertEqual(trace.alive_end, 0)
        self.assertEqual(int(trace.alive_at(trace.extinction_time)), 0)

    def test_line_extinction_times(self):
        trace = simulate_cmj(self.final, 5, seed=4)
        lines = trace.line_extinction_times()
        self.assertEqual(lines.shape, (5,))
        self.assertEqual(float(lines.max()), trace.extinction_time)
        self.assertTrue((lines > 0).all())

    def test_stop_at_k_alive(self):
        trace = simulate_cmj(self.early, 1, seed=8, stop_alive=50)
        if trace.hit_time is not None:
            self.assertEqual(trace.first_time_reaching(50), trace.hit_time)
            self.assertEqual(int(trace.alive_at(trace.hit_time)), 50)
        else:
            self.assertTrue(trace.extinct)

    def test_age_profile_counts_alive(self):
        trace = simulate_cmj(self.early, 3, seed=5, horizon=2.0)
        t = 1.5
        counts = trace.age_profile(t, np.linspace(0.0, t, 11))
        self.assertEqual(int(counts.sum()), int(trace.alive_at(t)))
        self.assertGreaterEqual(int(trace.total_at(t)), int(trace.alive_at(t)))

    def test_population_cap_truncates(self):
        with self.assertLogs('branching', level='WARNING'):
            trace = simulate_cmj(self.early, 50, seed=1, population_cap=200)
        self.assertTrue(trace.truncated)
        self.assertEqual(trace.stop_reason, "cap")
        self.assertFalse(trace.extinct)

    def test_needs_an_ancestor(self):
        with self.assertRaises(DomainError):
            simulate_cmj(self.early, 0)


class TestHittingAndExtinction(unittest.TestCase):
    """Single-run times and the ensemble tables built from them"""

    def setUp(self):
        self.early = early_phase_law(markov_regular4())
        self.final = final_phase_law(markov_regular4())

    def test_hitting_time_conditions_on_survival(self):
        result = hitting_time_supercritical(self.early, 100, seed=2)
        self.assertFalse(result.truncated)
        self.assertGreater(result.time, 0.0)
        self.assertGreaterEqual(result.rejected, 0)

    def test_total_count_is_reached_first(self):
        trace = simulate_cmj(self.early, 1, seed=6, stop_alive=200)
        if trace.hit_time is not None:
            self.assertLessEqual(trace.first_time_reaching(200, "total"), trace.first_time_reaching(200))

    def test_hitting_ensemble_schema(self):
        frame = hitting_time_ensemble(self.early, [10, 100], replicates=5, base_seed=3)
        self.assertEqual(list(frame.columns),
                         ["replicate", "seed", "k", "time", "survived", "rejected", "truncated"])
        self.assertEqual(len(frame), 10)
        self.assertTrue(frame["survived"].all())
        self.assertEqual(sorted(frame["seed"].unique().tolist()), [3, 4, 5, 6, 7])
        for _, group in frame.groupby("replicate"):
            self.assertTrue(group["time"].is_monotonic_increasing)

    def test_hitting_ensemble_is_reproducible(self):
        first = hitting_time_ensemble(self.early, [50], replicates=3, base_seed=9)
        second = hitting_time_ensemble(self.early, [50], replicates=3, base_seed=9)
        self.assertTrue(first.equals(second))

    def test_extinction_ensemble_schema(self):
        frame = extinction_time_ensemble(self.final, [1, 10], replicates=3, base_seed=0)
        self.assertEqual(len(frame), 6)
        self.assertTrue((frame["time"] > 0).all())
        self.assertFalse(frame["truncated"].any())

    def test_more_ancestors_take_longer_on_average(self):
        few = np.mean([extinction_time_subcritical(self.final, 1, seed).time for seed in range(300)])
        many = np.mean([extinction_time_subcritical(self.final, 1000, seed).time for seed in range(30)])
        self.assertGreater(many, few)

    def test_wrong_regime_is_rejected(self):
        with self.assertRaises(UnsupportedRegimeError):
            hitting_time_supercritical(self.final, 10, seed=0)
        with self.assertRaises(UnsupportedRegimeError):
            extinction_time_subcritical(self.early, 10, seed=0)
        with self.assertRaises(UnsupportedRegimeError):
            hitting_time_ensemble(self.final, [10], replicates=1)

    def test_immortal_particles_never_go_extinct(self):
        # mean offspring 2 * 0.2 = 0.4
        law = ReproductionLaw(RegularDegree(3), 1.0, InfinitePeriod(), success=0.2)
        with self.assertRaises(DomainError):
            extinction_time_subcritical(law, 10, seed=0)

    def test_invalid_count(self):
        with self.assertRaises(DomainError):
            hitting_time_supercritical(self.early, 10, seed=0, count="dead")


class TestTrends(unittest.TestCase):
    """Survival decay and growth summaries"""

    def test_survival_decays(self):
        law = final_phase_law(markov_regular4())
        slope, frame = survival_decay_rate(law, [0.5, 1.0, 1.5, 2.0], replicates=2000, base_seed=1)
        self.assertLess(slope, 0.0)
        self.assertEqual(list(frame.columns), ["t", "survival"])
        self.assertTrue(frame["survival"].is_monotonic_decreasing)

    def test_growth_trend_columns(self):
        law = ReproductionLaw(RegularDegree(4), 1.0, ConstantPeriod(1.0))
        frame = growth_trend(law, [1.0, 2.0, 3.0], replicates=100, base_seed=2)
        self.assertEqual(list(frame.columns), ["t", "mean_alive", "survivors", "scaled"])
        self.assertTrue((frame["survivors"] <= 100).all())
        self.assertTrue(frame["mean_alive"].is_monotonic_increasing)


if __name__ == '__main__':
    unittest.main()
