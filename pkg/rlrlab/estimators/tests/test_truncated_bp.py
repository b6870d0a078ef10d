import unittest
import numpy as np
from ...tests_common import *
from ...chain import EstimatorPlan, draw_noise, forward_chain
from ...estimators import (
    FullBP, RandomizedTruncatedBP, TruncatedBP, grad_fo_term, grad_full_bp, grad_truncated_bp,
    scalar_chain_bias, scalar_chain_expected_bias, truncation_bias, truncation_bias_samples
)
from ...estimators.truncated_bp import truncation_draws
from ...exceptions import ContractViolation
from ...stat_utils import MCStats, combined_standard_errors

class TestTruncatedBP(TestCommon, unittest.TestCase):
    def setUp(self) -> None:
        return super().setUp(TruncatedBP, T_prime=2)

class TestRandomizedTruncatedBP(TestCommon, unittest.TestCase):
    def setUp(self) -> None:
        return super().setUp(RandomizedTruncatedBP)

class TestTruncation(unittest.TestCase):
    def setUp(self) -> None:
        self.spec = reference_spec()
        self.params = reference_params(self.spec)
        self.noise = draw_noise(self.spec, EstimatorPlan.full_bp(self.spec.T), seed=6,
                                n_samples=16)

    def testFullTruncationIsFullBP(self):
        np.testing.assert_equal(
            grad_truncated_bp(self.spec, self.params, self.noise, self.spec.T).grad,
            grad_full_bp(self.spec, self.params, self.noise).grad)
        self.assertTrue(TruncatedBP(self.spec, self.spec.T).unbiased)
        self.assertFalse(TruncatedBP(self.spec, 1).unbiased)

    def testOneStepIsFOTerm(self):
        trajectory = forward_chain(self.spec, EstimatorPlan.full_bp(self.spec.T),
                                   self.params, self.noise)
        np.testing.assert_allclose(
            grad_truncated_bp(self.spec, self.params, self.noise, 1).grad,
            grad_fo_term(self.spec, self.params, trajectory), rtol=1e-14, atol=1e-15)

    def testInvalidTruncation(self):
        self.assertRaises(ContractViolation, TruncatedBP, self.spec, 0)
        self.assertRaises(ContractViolation, TruncatedBP, self.spec, self.spec.T + 1)
        self.assertRaises(ContractViolation, truncation_bias, self.spec, self.params, 1, 0, 0)

    def testLinearClosedFormBias(self):
        spec = linear_gaussian_spec(T=4)
        params = linear_gaussian_params()
        noise = draw_noise(spec, EstimatorPlan.full_bp(4), seed=8, n_samples=32)
        trajectory = forward_chain(spec, EstimatorPlan.full_bp(4), params, noise)
        difference = grad_full_bp(spec, params, noise).grad -\
            grad_truncated_bp(spec, params, noise, 2).grad
        expected = scalar_chain_bias(spec, params, trajectory, 2)
        self.assertLess(np.max(np.abs(difference - expected)), 1e-10)

    def testBiasZeroWithoutTruncation(self):
        np.testing.assert_equal(
            truncation_bias(self.spec, self.params, self.spec.T, 64, 0),
            np.zeros(self.spec.n_params))

    def testBiasMatchesClosedForm(self):
        spec = linear_gaussian_spec(T=4)
        params = linear_gaussian_params()
        samples = truncation_bias_samples(spec, params, 2, 9, 20000)
        se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
        expected = scalar_chain_expected_bias(spec, params, 2)
        self.assertTrue(np.all(np.abs(samples.mean(axis=0) - expected) <= 3 * se))

    def testBiasIdentity(self):
        n, seed, T = 2000, 10, self.spec.T
        for T_prime in (1, -(-T // 2), T):
            with self.subTest(T_prime=T_prime):
                bias = truncation_bias(self.spec, self.params, T_prime, n, seed)
                truncated = TruncatedBP(self.spec, T_prime).estimate(
                    self.params, seed, n_samples=n)
                full = grad_full_bp(
                    self.spec, self.params,
                    draw_noise(self.spec, EstimatorPlan.full_bp(T), seed, n)).grad
                np.testing.assert_allclose(bias + truncated.grad.mean(axis=0), full.mean(axis=0),
                                           rtol=1e-9, atol=1e-12)

    def testBiasOnIndependentDraws(self):
        spec = linear_gaussian_spec(T=4)
        params = linear_gaussian_params()
        n = 20000
        full = MCStats.from_samples(FullBP(spec).estimate(params, 21, n_samples=n).grad)
        for T_prime in (1, 2, spec.T):
            with self.subTest(T_prime=T_prime):
                truncated = MCStats.from_samples(
                    TruncatedBP(spec, T_prime).estimate(params, 22, n_samples=n).grad)
                bias = MCStats.from_samples(truncation_bias_samples(spec, params, T_prime, 23, n))
                se = np.sqrt(combined_standard_errors(full, truncated)**2 +
                             bias.standard_errors**2)
                gap = full.mean - truncated.mean - bias.mean
                self.assertTrue(np.all(np.abs(gap) <= 3 * se), f'gap {gap}, se {se}')
                np.testing.assert_allclose(
                    bias.mean, scalar_chain_expected_bias(spec, params, T_prime),
                    atol=3 * np.max(bias.standard_errors) + 1e-12)

    def testRandomizedRows(self):
        T, n, seed = self.spec.T, 64, 12
        estimate = RandomizedTruncatedBP(self.spec).estimate(self.params, seed, n_samples=n)
        T_primes = truncation_draws(seed, T, n)
        noise = draw_noise(self.spec, EstimatorPlan.full_bp(T), seed, n)
        for T_prime in (1, T):
            rows = T_primes == T_prime
            self.assertTrue(np.any(rows))
            np.testing.assert_allclose(
                estimate.grad[rows],
                grad_truncated_bp(self.spec, self.params, noise, T_prime).grad[rows],
                rtol=1e-12, atol=1e-14)
        self.assertTrue(np.all((1 <= T_primes) & (T_primes <= T)))
