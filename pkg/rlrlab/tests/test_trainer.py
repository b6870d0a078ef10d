import tempfile
import unittest
from pathlib import Path
import numpy as np
import pandas as pd
from ..tests_common import *
from ..estimators import FullBP, TruncatedBP
from ..exceptions import ContractViolation
from ..planner import JPolicy, JSampler
from ..trainer import (
    TRAIN_LOG_COLUMNS, Adam, SGD, TrainConfig, _collapse, convergence_report,
    estimate_delta0, estimate_sigma2, estimate_smoothness, evaluate_rewards,
    iterations_to_threshold, reference_seed, theorem2_bound, theorem2_step_size, train,
    train_seeds, unbiasedness_report
)

class TestTheorem2(unittest.TestCase):
    def testStepSize(self):
        self.assertEqual(theorem2_step_size(2.0, 0.0, 1.0, 10), 0.5)
        self.assertEqual(theorem2_step_size(2.0, 1.0, 0.0, 10), 0.5)
        self.assertAlmostEqual(theorem2_step_size(1.0, 1.0, 1.0, 7), 1 / 3)
        rng = np.random.default_rng(0)
        for _ in range(50):
            L, delta0, sigma2 = rng.exponential(size=3)
            self.assertLessEqual(theorem2_step_size(L, delta0, sigma2, 20), 1 / L)
        self.assertRaises(ContractViolation, theorem2_step_size, 0.0, 1.0, 1.0, 1)
        self.assertRaises(ContractViolation, theorem2_step_size, 1.0, -1.0, 1.0, 1)

    def testBound(self):
        self.assertEqual(theorem2_bound(1.0, 0.0, 0.0, 10), 0.0)
        bounds = [theorem2_bound(2.0, 1.5, 0.7, K) for K in (10, 100, 1000)]
        self.assertTrue(bounds[0] > bounds[1] > bounds[2])
        for K, bound in zip((10, 100, 1000), bounds):
            self.assertAlmostEqual(bound, np.sqrt(16.8 / (K + 1)) + 6.0 / (K + 1), places=12)
        # the square-root term alone scales as 1 / sqrt(K + 1)
        noise_terms = [bound - 6.0 / (K + 1) for K, bound in zip((100, 1000), bounds[1:])]
        self.assertAlmostEqual(noise_terms[0] / noise_terms[1], np.sqrt(1001 / 101), places=9)
        self.assertAlmostEqual(bounds[1] / bounds[2], 3.447217241887867, places=9)

class TestOptimizers(unittest.TestCase):
    def testSGDAscends(self):
        np.testing.assert_allclose(SGD(0.1).step(np.zeros(2), np.array([1.0, -2.0])), [0.1, -0.2])

    def testAdamFirstStep(self):
        step = Adam(0.01).step(np.zeros(2), np.array([3.0, -0.5]))
        np.testing.assert_allclose(step, [0.01, -0.01], rtol=1e-6)

class TestTrainConfig(unittest.TestCase):
    def testInvalid(self):
        self.assertRaises(ContractViolation, TrainConfig, iterations=0)
        self.assertRaises(ContractViolation, TrainConfig, batch=0)
        self.assertRaises(ContractViolation, TrainConfig, optimizer='rmsprop')
        self.assertRaises(ContractViolation, TrainConfig, optimizer='theorem2')
        self.assertEqual(TrainConfig(iterations=1).K, 0)

class TestTrain(unittest.TestCase):
    def setUp(self) -> None:
        self.spec = reference_spec()
        self.params = reference_params(self.spec)

    def testSingleIteration(self):
        log = train(self.spec, TrainConfig(estimator='full-bp', iterations=1), self.params)
        self.assertEqual(len(log.records), 1)
        self.assertTrue(log.complete)
        self.assertFalse(np.array_equal(log.final_params, self.params))
        np.testing.assert_equal(log.snapshots[0], self.params)

    def testCsvHeader(self):
        log = train(self.spec, TrainConfig(iterations=3, batch=4), self.params)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'train.csv'
            log.to_csv(path)
            header = path.read_text().splitlines()[0]
            frame = pd.read_csv(path)
        self.assertEqual(header, 'iter,reward_mean,grad_sq_norm,step_size,j,cost_units,collapsed')
        self.assertEqual(list(frame['iter']), [0, 1, 2])
        self.assertEqual(list(frame.columns), TRAIN_LOG_COLUMNS)

    def testDeterminism(self):
        config = TrainConfig(iterations=5, batch=4, seed=3)
        a = train(self.spec, config, self.params).to_frame()
        b = train(self.spec, config, self.params).to_frame()
        pd.testing.assert_frame_equal(a, b)

    def testRewardNonDecreasingFullBP(self):
        spec = linear_gaussian_spec(T=3)
        config = TrainConfig(estimator='full-bp', step_size=0.01, iterations=30, batch=8,
                             common_noise=True)
        rewards = train(spec, config, linear_gaussian_params()).reward_curve()
        self.assertTrue(np.all(np.diff(rewards) >= -1e-12))
        self.assertGreater(rewards[-1], rewards[0])

    def testTheorem2StepSize(self):
        config = TrainConfig(estimator='full-bp', optimizer='theorem2', iterations=4,
                             L=10.0, delta0=1.0, sigma2=2.0)
        log = train(self.spec, config, self.params)
        for record in log.records:
            self.assertLessEqual(record.step_size, 1 / 10.0)

    def testSoftmaxPolicy(self):
        config = TrainConfig(estimator='rlr', h=1, iterations=6, batch=4, step_size=1e-4,
                             sampler=JSampler(JPolicy.softmax_gradnorm, temperature=100.0))
        log = train(self.spec, config, self.params)
        self.assertEqual(len(log.records), 6)
        for record in log.records:
            self.assertTrue(2 <= record.j <= 4)

    def testDivergenceCollapses(self):
        spec = linear_gaussian_spec(T=10)
        log = train(spec, TrainConfig(estimator='full-bp', iterations=5), np.array([50.0, 0.0]))
        self.assertTrue(log.collapsed)
        self.assertEqual(log.diverged_at, 0)
        self.assertEqual(len(log.records), 0)

    def testCollapseDetector(self):
        self.assertFalse(_collapse([-1.0] * 25, 10, 1.0))
        self.assertTrue(_collapse([-1.0] * 10 + [-5.0] * 15, 10, 1.0))
        self.assertFalse(_collapse([-1.0] * 10, 10, 1.0))

    def testAdam(self):
        config = TrainConfig(estimator='score-rl', optimizer='adam', step_size=1e-3,
                             iterations=3, batch=4)
        log = train(self.spec, config, self.params)
        self.assertEqual(len(log.records), 3)

    def testTrainSeeds(self):
        config = TrainConfig(estimator='full-bp', iterations=2, batch=2)
        logs = train_seeds(self.spec, config, self.params, [4, 5])
        self.assertEqual([log.config.seed for log in logs], [4, 5])

class TestReports(unittest.TestCase):
    def setUp(self) -> None:
        self.spec = reference_spec()
        self.params = reference_params(self.spec)

    def testSelfComparison(self):
        estimator = FullBP(self.spec)
        report = unbiasedness_report(estimator, estimator, self.params, 2000, seed=1)
        self.assertTrue(report.passed)
        self.assertLessEqual(report.max_abs_z, 6.0)

    def testIndependentStreams(self):
        estimator = FullBP(self.spec)
        report = unbiasedness_report(estimator, estimator, self.params, 500, seed=1)
        self.assertNotEqual(reference_seed(1), 1)
        self.assertTrue(np.any(report.stats_a.mean != report.stats_b.mean))
        self.assertTrue(np.any(report.z != 0))

    def testTruncationBiasDetected(self):
        spec = linear_gaussian_spec()
        report = unbiasedness_report(
            TruncatedBP(spec, 1), FullBP(spec), linear_gaussian_params(), 20000, seed=2)
        self.assertGreater(report.flags, 0)
        self.assertFalse(report.passed)

    def testConvergenceReport(self):
        log = train(self.spec, TrainConfig(estimator='full-bp', iterations=3, batch=4),
                    self.params)
        report = convergence_report(log, 10.0, 1.0, 2.0, n_mc=100)
        self.assertEqual(report.K, 2)
        self.assertAlmostEqual(report.bound, theorem2_bound(10.0, 1.0, 2.0, 2))
        self.assertGreaterEqual(report.observed, 0.0)

        log.snapshots = []
        self.assertRaises(ContractViolation, convergence_report, log, 10.0, 1.0, 2.0)

    def testEstimators(self):
        L = estimate_smoothness(self.spec, self.params, n_directions=5, n_draws=32)
        self.assertGreater(L, 0.0)
        self.assertEqual(L, estimate_smoothness(self.spec, self.params, n_directions=5, n_draws=32))
        self.assertEqual(estimate_delta0(self.spec, self.params, self.params), 0.0)
        self.assertGreater(estimate_sigma2(FullBP(self.spec), self.params, n_samples=500), 0.0)

    def testEvaluateRewards(self):
        log = train(self.spec, TrainConfig(estimator='full-bp', iterations=4, batch=4),
                    self.params)
        curve = evaluate_rewards(log, n_draws=32)
        self.assertEqual(curve.shape, (5,))
        np.testing.assert_equal(curve, evaluate_rewards(log, n_draws=32))

    def testIterationsToThreshold(self):
        self.assertEqual(iterations_to_threshold([-3.0, -2.0, -1.0], -2.0), 1)
        self.assertEqual(iterations_to_threshold([-3.0, -2.0], 0.0), 2)
        # a run cut short at two entries of a planned five
        self.assertEqual(iterations_to_threshold([-3.0, -2.5], 0.0, 5), 5)
        self.assertEqual(iterations_to_threshold([-3.0, -2.5], -2.5, 5), 1)
