"""
Unit tests for the degree laws, vaccination thinning and infectious-period laws
"""

import math
import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from distributions import (
    ConstantPeriod,
    DomainError,
    ExponentialCutoffPeriod,
    ExponentialPeriod,
    GammaPeriod,
    InfinitePeriod,
    ParetoPeriod,
    PoissonDegree,
    PowerLawDegree,
    RegularDegree,
    TableDegree,
    ThinnedDegree,
    vaccinate,
)


EXAMPLE3_WEIGHTS = {1: 100 / 201, 2: 100 / 201, 100: 1 / 201}

BASE_DEGREES = [
    RegularDegree(4),
    PoissonDegree(3.0),
    TableDegree.from_weights(EXAMPLE3_WEIGHTS),
    PowerLawDegree(3.5, k_min=2, k_max=200),
]

PERIODS = [
    ExponentialPeriod(1.0),
    ConstantPeriod(1.5),
    ExponentialCutoffPeriod(0.5, 3.0),
    GammaPeriod(2.0, 1.5),
    InfinitePeriod(),
    ParetoPeriod(3.0, 2.0),
]


class TestDegreeModels(unittest.TestCase):
    """Generating functions and size-biased quantities of every family"""

    def test_regular_degree(self):
        degree = RegularDegree(4)
        self.assertEqual(degree.size_biased_excess_mean(), 3.0)
        self.assertAlmostEqual(degree.pgf(0.5), 0.0625, places=14)
        self.assertAlmostEqual(degree.excess_pgf(0.5), 0.125, places=14)
        self.assertAlmostEqual(degree.excess_derivative_weighted(0.5), 3 * 0.25, places=14)
        np.testing.assert_array_equal(degree.size_biased_pmf([3, 4, 5]), [0.0, 1.0, 0.0])

    def test_poisson_excess_is_poisson(self):
        degree = PoissonDegree(2.5)
        for x in (0.0, 0.3, 0.9):
            self.assertAlmostEqual(degree.excess_pgf(x), degree.pgf(x), places=14)
        self.assertAlmostEqual(degree.size_biased_excess_mean(), 2.5, places=12)

    def test_truncation_degree_covers_the_mass(self):
        self.assertEqual(RegularDegree(5).truncation_degree(), 5)
        upper = PoissonDegree(3.0).truncation_degree()
        self.assertGreater(upper, 3)
        self.assertLess(float(stats.poisson.sf(upper, 3.0)), 1e-12)

    def test_table_example3_moments(self):
        degree = TableDegree.from_weights(EXAMPLE3_WEIGHTS)
        self.assertAlmostEqual(degree.mean, 400 / 201, places=12)
        self.assertAlmostEqual(degree.size_biased_excess_mean(), 25.25, places=10)
        self.assertAlmostEqual(float(degree.probabilities.sum()), 1.0, places=12)

    def test_table_must_sum_to_one(self):
        with self.assertRaises(DomainError):
            TableDegree(((1, 0.5), (2, 0.4)))
        with self.assertRaises(DomainError):
            TableDegree(((1, -0.5), (2, 1.5)))

    def test_table_pgf_matches_direct_sum(self):
        degree = TableDegree.from_weights({0: 1.0, 3: 2.0, 7: 1.0})
        x = 0.7
        expected = (1.0 + 2.0 * x ** 3 + x ** 7) / 4.0
        self.assertAlmostEqual(degree.pgf(x), expected, places=14)
        self.assertAlmostEqual(degree.pgf_derivative(x, 2), (2.0 * 6 * x + 42 * x ** 5) / 4.0, places=12)

    def test_power_law_variance_regimes(self):
        heavy = PowerLawDegree(2.5, k_min=2)
        light = PowerLawDegree(3.5, k_min=2)
        self.assertTrue(math.isinf(heavy.size_biased_excess_mean()))
        self.assertTrue(math.isfinite(light.size_biased_excess_mean()))
        self.assertGreater(light.size_biased_excess_mean(), 0.0)

    def test_power_law_series_matches_truncated_sum(self):
        degree = PowerLawDegree(2.5, k_min=1)
        x = 0.5
        ks = np.arange(1, 400, dtype=float)
        direct = float(np.sum(degree.pmf(ks) * x ** ks))
        self.assertAlmostEqual(degree.pgf(x), direct, places=12)
        direct_excess = float(np.sum(ks * degree.pmf(ks) * x ** (ks - 1))) / degree.mean
        self.assertAlmostEqual(degree.excess_pgf(x), direct_excess, places=12)

    def test_power_law_sampling_respects_support(self):
        rng = np.random.default_rng(3)
        draws = PowerLawDegree(2.5, k_min=2).sample(rng, 5000)
        self.assertTrue((draws >= 2).all())

    def test_tilted_moment_poisson(self):
        # p_k x^k / E[x^D] is Poisson(lam x)
        degree = PoissonDegree(3.0)
        x = 0.4
        self.assertAlmostEqual(degree.tilted_moment(x, 0), 1.0, places=12)
        self.assertAlmostEqual(degree.tilted_moment(x, 1), 1.2, places=12)
        self.assertAlmostEqual(degree.tilted_moment(x, 2), 1.2 + 1.2 ** 2, places=12)

    def test_tilted_moment_finite_for_heavy_tail(self):
        degree = PowerLawDegree(2.5, k_min=2)
        value = degree.tilted_moment(0.6, 3)
        self.assertTrue(math.isfinite(value))
        self.assertGreater(value, 0.0)

    def test_tilted_moments_match_direct_sums(self):
        ks = np.arange(0, 5000, dtype=float)
        for degree in (PoissonDegree(3.0), TableDegree.from_weights(EXAMPLE3_WEIGHTS),
                       PowerLawDegree(2.5, k_min=2)):
            weights = degree.pmf(ks)
            for x in (0.1, 0.5, 0.9):
                tilted = weights * x ** ks
                for j in range(5):
                    with self.subTest(degree=degree.describe(), x=x, j=j):
                        direct = float(np.sum(ks ** j * tilted) / np.sum(tilted))
                        self.assertAlmostEqual(degree.tilted_moment(x, j) / direct, 1.0, places=8)

    def test_size_biased_sample_mean(self):
        degree = TableDegree.from_weights({1: 1.0, 2: 1.0, 5: 1.0})
        rng = np.random.default_rng(7)
        draws = degree.sample_size_biased(rng, 200_000)
        expected = degree.second_moment / degree.mean
        self.assertAlmostEqual(float(draws.mean()), expected, delta=0.02)

    def test_domain_errors(self):
        with self.assertRaises(DomainError):
            RegularDegree(0)
        with self.assertRaises(DomainError):
            PoissonDegree(-1.0)
        with self.assertRaises(DomainError):
            PowerLawDegree(2.0)
        with self.assertRaises(DomainError):
            RegularDegree(3).pgf(1.5)


class TestVaccination(unittest.TestCase):
    """Independent thinning of half-edges"""

    def test_full_retention_is_identity(self):
        for degree in BASE_DEGREES:
            self.assertIs(vaccinate(degree, 1.0), degree)

    def test_poisson_thins_to_poisson(self):
        thinned = vaccinate(PoissonDegree(4.0), 0.25)
        self.assertIsInstance(thinned, PoissonDegree)
        self.assertAlmostEqual(thinned.lam, 1.0, places=14)

    def test_thinned_regular_is_binomial(self):
        thinned = vaccinate(RegularDegree(4), 0.5)
        self.assertIsInstance(thinned, ThinnedDegree)
        ks = np.arange(0, 5)
        np.testing.assert_allclose(thinned.pmf(ks), stats.binom.pmf(ks, 4, 0.5), atol=1e-14)
        self.assertAlmostEqual(thinned.mean, 2.0, places=14)

    def test_repeated_thinning_composes(self):
        twice = vaccinate(vaccinate(RegularDegree(6), 0.5), 0.4)
        self.assertIsInstance(twice, ThinnedDegree)
        self.assertAlmostEqual(twice.coverage, 0.2, places=14)

    def test_rejects_coverage_outside_unit_interval(self):
        for coverage in (0.0, -0.1, 1.2):
            with self.assertRaises(DomainError):
                vaccinate(RegularDegree(3), coverage)

    def test_thinned_excess_derivative_identity(self):
        # E[(D~_c - 1)(1 - x)^(D~_c - 2)] = c E[(D~ - 1)(1 - c x)^(D~ - 2)]
        coverage = 0.6
        for base in (RegularDegree(6), TableDegree.from_weights(EXAMPLE3_WEIGHTS),
                     PowerLawDegree(3.5, k_min=2, k_max=200)):
            thinned = vaccinate(base, coverage)
            ks = np.arange(0, base.truncation_degree() + 1, dtype=float)
            for x in (0.1, 0.5, 0.9):
                with self.subTest(base=base.describe(), x=x):
                    direct = float(np.sum(ks * (ks - 1) * thinned.pmf(ks) * (1 - x) ** (ks - 2))) / thinned.mean
                    expected = coverage * base.excess_derivative_weighted(1 - coverage * x)
                    self.assertAlmostEqual(direct, expected, places=10)
                    self.assertAlmostEqual(thinned.excess_derivative_weighted(1 - x), expected, places=10)

    def test_thinned_poisson_excess_derivative_identity(self):
        base = PoissonDegree(4.0)
        for coverage in (0.3, 0.8):
            thinned = vaccinate(base, coverage)
            for x in (0.1, 0.5, 0.9):
                self.assertAlmostEqual(thinned.excess_derivative_weighted(1 - x),
                                       coverage * base.excess_derivative_weighted(1 - coverage * x),
                                       places=12)

    @settings(deadline=None, max_examples=60)
    @given(index=st.integers(0, len(BASE_DEGREES) - 1),
           coverage=st.floats(0.05, 1.0),
           x=st.floats(0.0, 1.0))
    def test_excess_pgf_composes(self, index, coverage, x):
        base = BASE_DEGREES[index]
        thinned = vaccinate(base, coverage)
        expected = base.excess_pgf(1.0 - coverage + coverage * x)
        self.assertAlmostEqual(thinned.excess_pgf(x), expected, places=10)

    @settings(deadline=None, max_examples=40)
    @given(index=st.integers(0, len(BASE_DEGREES) - 1), coverage=st.floats(0.05, 1.0))
    def test_excess_mean_scales_with_coverage(self, index, coverage):
        base = BASE_DEGREES[index]
        thinned = vaccinate(base, coverage)
        self.assertAlmostEqual(thinned.size_biased_excess_mean(),
                               coverage * base.size_biased_excess_mean(), places=9)


class TestInfectiousPeriods(unittest.TestCase):
    """Survival transforms, Laplace transforms and tail rates"""

    def test_exponential_closed_forms(self):
        period = ExponentialPeriod(2.0)
        self.assertAlmostEqual(period.survival_transform(1.0), 1.0 / 3.0, places=14)
        self.assertAlmostEqual(period.laplace(1.0), 2.0 / 3.0, places=14)
        self.assertEqual(period.tail_rate, 2.0)
        self.assertTrue(math.isinf(period.survival_transform(-2.5)))

    def test_closed_form_matches_quadrature(self):
        for period in PERIODS[:4]:
            for s in (0.5, 1.0, 3.0):
                with self.subTest(period=period.describe(), s=s):
                    closed = period.survival_transform(s)
                    numeric = period.survival_transform_quadrature(s)
                    self.assertAlmostEqual(closed / numeric, 1.0, places=8)

    def test_infection_probability_two_ways(self):
        # psi = beta int exp(-beta t) P(L > t) dt = 1 - E[exp(-beta L)]
        beta = 0.8
        for period in PERIODS:
            with self.subTest(period=period.describe()):
                self.assertAlmostEqual(period.contact_transform(beta, 0.0),
                                       1.0 - period.laplace(beta), places=7)

    def test_bounded_support_tail_rate(self):
        for period in (ConstantPeriod(1.0), ExponentialCutoffPeriod(0.01, 1000.0)):
            self.assertTrue(math.isinf(period.tail_rate))
            self.assertTrue(math.isfinite(period.survival_transform(-0.5)))

    def test_heavy_tails_have_zero_tail_rate(self):
        for period in (InfinitePeriod(), ParetoPeriod(2.5, 1.0)):
            self.assertEqual(period.tail_rate, 0.0)
            self.assertTrue(math.isinf(period.survival_transform(-0.01)))
        self.assertAlmostEqual(InfinitePeriod().survival_transform(4.0), 0.25, places=14)

    def test_sampling_means(self):
        rng = np.random.default_rng(11)
        for period in (ExponentialPeriod(2.0), GammaPeriod(2.0, 1.5), ExponentialCutoffPeriod(0.5, 3.0)):
            with self.subTest(period=period.describe()):
                draws = period.sample(rng, 200_000)
                self.assertAlmostEqual(float(draws.mean()), period.mean, delta=0.02)

    def test_samplers_follow_their_survival_function(self):
        rng = np.random.default_rng(23)
        for period in (ExponentialPeriod(2.0), GammaPeriod(2.0, 1.5), ParetoPeriod(3.0, 1.0),
                       ExponentialCutoffPeriod(1.0, 20.0)):
            with self.subTest(period=period.describe()):
                draws = period.sample(rng, 5000)
                result = stats.kstest(draws, lambda t: 1.0 - period.survival(t))
                self.assertGreater(result.pvalue, 1e-3)

    @settings(deadline=None, max_examples=60)
    @given(index=st.integers(0, len(PERIODS) - 1),
           x=st.floats(0.0, 5.0), step=st.floats(0.01, 5.0))
    def test_contact_transform_decreasing(self, index, x, step):
        period = PERIODS[index]
        self.assertGreaterEqual(period.contact_transform(1.0, x) + 1e-12,
                                period.contact_transform(1.0, x + step))


if __name__ == '__main__':
    unittest.main()
