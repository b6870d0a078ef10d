import unittest
import numpy as np
from ..tests_common import *
from ..exceptions import ContractViolation, MeterFailure
from ..stat_utils import (
    MCStats, allowed_flags, chunk_seeds, is_non_decreasing, mc_stats, medians,
    rolling_mean, uniformity_pvalue, variance_decomposition
)

def constant_thunk(seed, n):
    return np.ones((n, 3))

def normal_thunk(seed, n):
    return np.random.default_rng(seed).standard_normal((n, 4))

def sometimes_nan_thunk(seed, n, every=50):
    samples = np.random.default_rng(seed).standard_normal((n, 2))
    samples[::every] = np.nan
    return samples

class TestMCStats(unittest.TestCase):
    def testConstant(self):
        stats = mc_stats(constant_thunk, 1000, seed=0)
        self.assertEqual(stats.n_samples, 1000)
        np.testing.assert_equal(stats.variance, np.zeros(3))
        np.testing.assert_equal(stats.mean, np.ones(3))

    def testNormalTraceVariance(self):
        stats = mc_stats(normal_thunk, 100000, seed=1, chunk_size=10000)
        self.assertAlmostEqual(stats.trace_variance, 4.0, delta=0.2)
        np.testing.assert_allclose(stats.standard_errors, np.sqrt(stats.variance / 100000))

    def testMerge(self):
        rng = np.random.default_rng(3)
        a = rng.normal(2.0, 3.0, (500, 3))
        b = rng.normal(-1.0, 0.5, (1300, 3))
        merged = MCStats.from_samples(a).merge(MCStats.from_samples(b))
        whole = MCStats.from_samples(np.concatenate([a, b]))
        self.assertEqual(merged.n_samples, 1800)
        np.testing.assert_allclose(merged.mean, whole.mean, rtol=1e-9)
        np.testing.assert_allclose(merged.variance, whole.variance, rtol=1e-9)

    def testMergeWithEmpty(self):
        stats = MCStats.from_samples(np.arange(6.0).reshape(3, 2))
        merged = MCStats.empty(2).merge(stats)
        np.testing.assert_equal(merged.mean, stats.mean)

    def testDivergentExcluded(self):
        stats = mc_stats(lambda seed, n: sometimes_nan_thunk(seed, n, every=200), 2000, 0)
        self.assertEqual(stats.n_diverged, 10)
        self.assertEqual(stats.n_samples, 1990)

    def testMeterFailure(self):
        self.assertRaises(MeterFailure, mc_stats, sometimes_nan_thunk, 2000, 0)

    def testWorkersDoNotChangeResult(self):
        a = mc_stats(normal_thunk, 5000, seed=7, chunk_size=1000, workers=1)
        b = mc_stats(normal_thunk, 5000, seed=7, chunk_size=1000, workers=2)
        np.testing.assert_equal(a.mean, b.mean)
        np.testing.assert_equal(a.m2, b.m2)

    def testChunkSeeds(self):
        chunks = chunk_seeds(0, 10500, 4096)
        self.assertEqual([size for _, size in chunks], [4096, 4096, 2308])
        self.assertEqual(len({seed for seed, _ in chunks}), 3)

    def testTooFewSamples(self):
        self.assertRaises(ContractViolation, mc_stats, constant_thunk, 1, 0)

class TestReports(unittest.TestCase):
    def testVarianceDecomposition(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((2000, 3))
        terms = {'fo': a, 'ho': 0.5 * a + rng.standard_normal((2000, 3)),
                 'zo': 3 * rng.standard_normal((2000, 3))}
        result = variance_decomposition(terms)
        self.assertLessEqual(result['total'], result['bound'])
        self.assertAlmostEqual(result['var_c'], 27.0, delta=2.0)

    def testAllowedFlags(self):
        self.assertEqual(allowed_flags(22, 4.0), 0)
        self.assertGreater(allowed_flags(10000, 2.0), 455)

    def testUniformity(self):
        rng = np.random.default_rng(5)
        self.assertGreater(uniformity_pvalue(rng.integers(30, 41, 10000), range(30, 41)), 0.01)
        self.assertLess(uniformity_pvalue(np.full(1000, 30), range(30, 41)), 1e-6)
        self.assertRaises(ContractViolation, uniformity_pvalue, [1, 2, 99], range(1, 5))

    def testRollingMean(self):
        np.testing.assert_allclose(rolling_mean([1.0, 3.0, 5.0, 7.0], 2), [1.0, 2.0, 4.0, 6.0])
        self.assertTrue(is_non_decreasing(rolling_mean([0, 2, 1, 3, 2, 4], 2)))
        self.assertFalse(is_non_decreasing([0.0, 1.0, 0.5]))

    def testMedians(self):
        curves = [np.array([1.0, 2.0, 3.0]), np.array([3.0, 4.0]), np.array([2.0, 0.0, 9.0])]
        np.testing.assert_equal(medians(curves), [2.0, 2.0])
