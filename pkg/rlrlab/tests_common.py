import abc
import unittest
from typing import Type
import numpy as np
from .backbones import LinearAffine, MLPTanh
from .chain import ChainSpec, DEFAULT_BUDGET, plan_cost, sigma_preset
from .estimators import EstimatorBase, estimate_samples
from .rewards import Constant, NegQuadratic


# reference chain: mlp-tanh, d=2, m=4, T=5, sigma_t=0.1, sigma_param=1e-2
def reference_spec(T: int = 5, sigma: float = 0.1, sigma_param: float = 1e-2,
                   reward=None) -> ChainSpec:
    backbone = MLPTanh(d=2, m=4)
    reward = NegQuadratic([0.5, -0.5]) if reward is None else reward
    return ChainSpec(T, sigma_preset('constant', T, sigma), sigma_param, backbone, reward)

def reference_params(spec: ChainSpec, seed: int = 0, scale: float = 0.5) -> np.ndarray:
    return spec.backbone.init_params(seed, scale)

def constant_reward_spec(T: int = 5) -> ChainSpec:
    return reference_spec(T, reward=Constant(2))

# linear-Gaussian chain: x_{t-1} = w x_t + b + z_t, d=1, fixed x_T
def linear_gaussian_spec(
        T: int = 4,
        sigma: float = 0.3,
        x_T: float = 1.0,
        target: float = 0.5,
        sigma_param: float = 1e-2,
    ) -> ChainSpec:
    return ChainSpec(T, sigma_preset('constant', T, sigma), sigma_param,
                     LinearAffine(d=1), NegQuadratic([target]), x_T=(x_T,))

def linear_gaussian_params(w: float = 0.8, b: float = 0.1) -> np.ndarray:
    return np.array([w, b])

def assert_mc_close(test: unittest.TestCase, stats_a, stats_b, k_sigma: float):
    se = np.sqrt(stats_a.standard_errors**2 + stats_b.standard_errors**2)
    diff = np.abs(stats_a.mean - stats_b.mean)
    test.assertTrue(np.all(diff <= k_sigma * se + 1e-12),
                    f'max |z| = {np.max(diff / np.maximum(se, 1e-300))}')


class TestCommon(abc.ABC):
    """Contract tests every estimator class has to pass."""
    @abc.abstractmethod
    def setUp(self, estimator: Type[EstimatorBase], **kwargs) -> None:
        self._estimator = estimator
        self._kwargs = kwargs
        self._spec = reference_spec()
        self._params = reference_params(self._spec)
        return super().setUp()

    def tearDown(self) -> None:
        return super().tearDown()

    def make(self, spec=None) -> EstimatorBase:
        return self._estimator(self._spec if spec is None else spec, **self._kwargs)

    def testShapeAndFinite(self):
        estimate = self.make().estimate(self._params, seed=3)
        self.assertEqual(estimate.grad.shape, (self._spec.n_params,))
        self.assertTrue(np.all(np.isfinite(estimate.grad)))

    def testBatchShape(self):
        estimate = self.make().estimate(self._params, seed=3, n_samples=16)
        self.assertEqual(estimate.grad.shape, (16, self._spec.n_params))
        self.assertEqual(estimate.reward_value.shape, (16,))

    def testDeterminism(self):
        estimator = self.make()
        a = estimator.estimate(self._params, seed=11, n_samples=8)
        b = estimator.estimate(self._params, seed=11, n_samples=8)
        np.testing.assert_equal(a.grad, b.grad)

        c = estimator.estimate(self._params, seed=12, n_samples=8)
        self.assertFalse(np.array_equal(a.grad, c.grad))

    def testCostUnits(self):
        estimator = self.make()
        estimate = estimator.estimate(self._params, seed=0)
        self.assertEqual(estimate.cost_units, plan_cost(estimator.plan(), DEFAULT_BUDGET))

    def testZeroReward(self):
        spec = constant_reward_spec()
        estimate = self.make(spec).estimate(reference_params(spec), seed=5, n_samples=4)
        np.testing.assert_equal(estimate.grad, np.zeros((4, spec.n_params)))

    def testSamplesThunk(self):
        samples = estimate_samples(self.make(), self._params, 7, 5)
        self.assertEqual(samples.shape, (5, self._spec.n_params))
