import unittest
import numpy as np
import scipy.stats
from ..tests_common import *
from ..chain import BudgetModel, DEFAULT_BUDGET
from ..exceptions import ContractViolation, SamplerConfigurationError
from ..planner import (
    JPolicy, JSampler, VarianceProfile, build_j_weights, q_table, rule_of_thumb_h,
    sample_j, sample_j_many, solve_h_star, variance_bound_q
)

class TestVarianceBound(unittest.TestCase):
    def testExamples(self):
        profile = VarianceProfile(0.0, 1.0)
        self.assertAlmostEqual(variance_bound_q(4, 10, profile), 25.0)
        profile = VarianceProfile(0.1, 1.0)
        self.assertAlmostEqual(variance_bound_q(9, 10, profile), (10 * 0.1)**2)

    def testNonIncreasing(self):
        profile = VarianceProfile(0.05, 1.0)
        values = [variance_bound_q(h, 50, profile) for h in range(0, 49)]
        self.assertTrue(np.all(np.diff(values) <= 0))

    def testRange(self):
        self.assertRaises(ContractViolation, variance_bound_q, 10, 10, VarianceProfile(0, 1))
        self.assertRaises(ContractViolation, VarianceProfile, 1.0, 1.0)

    def testWarning(self):
        with self.assertLogs(level='WARNING'):
            VarianceProfile(0.6, 1.0)

class TestSolveHStar(unittest.TestCase):
    def testRecommendedH(self):
        result = solve_h_star(DEFAULT_BUDGET, 50, VarianceProfile(0.0, 1.0))
        self.assertEqual(result.h, 2)
        self.assertEqual(result.binding, 'budget')
        self.assertEqual(result.variance_term, 24)

    def testLargerBudget(self):
        result = solve_h_star(BudgetModel(8, 0.24, 40), 50, VarianceProfile(0.0, 1.0))
        self.assertEqual(result.h, 3)
        self.assertEqual(result.binding, 'budget')

    def testRuleOfThumb(self):
        self.assertEqual(rule_of_thumb_h(BudgetModel(8, 0.24, 40)), 2)
        self.assertEqual(rule_of_thumb_h(DEFAULT_BUDGET), 2)
        self.assertIsNone(rule_of_thumb_h(BudgetModel(8, 0.24, 41)))
        self.assertIsNone(rule_of_thumb_h(BudgetModel(8, 0.24, 29.9)))

    def testVertex(self):
        result = solve_h_star(DEFAULT_BUDGET, 50, VarianceProfile(0.0, 1.0))
        self.assertAlmostEqual(result.vertex, 49.0)
        self.assertAlmostEqual(result.unconstrained, 24.0)

    def testVarianceBinds(self):
        result = solve_h_star(BudgetModel(8, 0.24, 150), 20, VarianceProfile(0.0, 1.0))
        self.assertEqual((result.h, result.binding), (9, 'variance'))

    def testBoundaryNudge(self):
        # (B - B_z (T - 1)) / (B_h - B_z) is exactly 3
        result = solve_h_star(BudgetModel(1.1, 0.1, 3.9), 10, VarianceProfile(0.0, 1.0))
        self.assertEqual(result.budget_term, 3)

    def testDegenerateBudget(self):
        with self.assertLogs(level='WARNING'):
            result = solve_h_star(BudgetModel(8, 0.24, 5), 50, VarianceProfile(0.0, 1.0))
        self.assertEqual(result.h, 0)

    def testBudgetSatisfied(self):
        for B in (12.0, 20.0, 30.0, 40.0, 100.0):
            budget = BudgetModel(8, 0.24, B)
            result = solve_h_star(budget, 50, VarianceProfile(0.0, 1.0))
            if result.binding == 'budget' and result.h > 0:
                self.assertLessEqual(8 * result.h + 0.24 * (49 - result.h), B + 1e-9)

    def testQTable(self):
        table = q_table(DEFAULT_BUDGET, 50, VarianceProfile(0.0, 1.0))
        self.assertEqual(list(table.columns), ['h', 'Q', 'cost'])
        self.assertEqual(list(table['h']), [0, 1, 2])
        self.assertTrue(np.all(table['cost'] <= 30))

class TestJWeights(unittest.TestCase):
    def testEqualNorms(self):
        np.testing.assert_allclose(build_j_weights([1.0] * 4, 2, T=7), np.full(4, 0.25))

    def testSaturation(self):
        weights = build_j_weights([0.0, 100.0, 0.0], 0)
        self.assertGreaterEqual(weights[1], 1 - 1e-9)

    def testNormalized(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            weights = build_j_weights(rng.exponential(size=10), 1, temperature=0.5)
            self.assertAlmostEqual(float(np.sum(weights)), 1.0, delta=1e-12)

    def testHistoryPrefix(self):
        weights = build_j_weights([1.0, 2.0, 3.0, 4.0], 2, T=5)
        self.assertEqual(weights.size, 2)

    def testInvalid(self):
        self.assertRaises(ContractViolation, build_j_weights, [1.0, -1.0], 0)
        self.assertRaises(ContractViolation, build_j_weights, [1.0], 0, T=5)
        self.assertRaises(ContractViolation, build_j_weights, [1.0], 0, temperature=0.0)

class TestSampleJ(unittest.TestCase):
    def testUniform(self):
        draws = sample_j_many(JSampler(), 2, 5, seed=0, n=10000)
        self.assertEqual(set(np.unique(draws)), {2, 3})
        self.assertAlmostEqual(np.mean(draws == 2), 0.5, delta=0.02)

    def testWindow(self):
        sampler = JSampler(JPolicy.windowed_uniform, window=(30, 40))
        draws = sample_j_many(sampler, 2, 50, seed=1, n=10000)
        self.assertTrue(np.all((draws >= 30) & (draws <= 40)))
        counts = np.bincount(draws - 30, minlength=11)
        self.assertGreater(scipy.stats.chisquare(counts).pvalue, 0.01)

    def testSoftmaxWithoutHistoryIsUniform(self):
        sampler = JSampler(JPolicy.softmax_gradnorm)
        np.testing.assert_allclose(sampler.probabilities(10, 2), np.full(7, 1 / 7))
        zeros = sampler.with_history([0.0] * 8)
        np.testing.assert_allclose(zeros.probabilities(10, 2), np.full(7, 1 / 7))

    def testSoftmaxFollowsNorms(self):
        sampler = JSampler(JPolicy.softmax_gradnorm).with_history([0.0, 0.0, 50.0, 0.0])
        draws = sample_j_many(sampler, 1, 5, seed=2, n=1000)
        self.assertTrue(np.all(draws == 4))

    def testNeverOutsideSupport(self):
        for seed in range(200):
            j = sample_j(JSampler(), 3, 8, seed)
            self.assertTrue(2 <= j <= 5)

    def testDeterminism(self):
        self.assertEqual(sample_j(JSampler(), 1, 30, 123), sample_j(JSampler(), 1, 30, 123))

    def testAllowJ1(self):
        draws = sample_j_many(JSampler(), 1, 4, seed=0, n=1000, allow_j1=True)
        self.assertEqual(set(np.unique(draws)), {1, 2, 3})

    def testConfigurationErrors(self):
        self.assertRaises(SamplerConfigurationError, sample_j, JSampler(), 3, 4, 0)
        bad_window = JSampler(JPolicy.windowed_uniform, window=(30, 32))
        self.assertRaises(SamplerConfigurationError, sample_j, bad_window, 2, 50, 0)
        self.assertRaises(SamplerConfigurationError, JPolicy.from_name, 'greedy')
