import unittest
import numpy as np
from ..tests_common import *
from ..diff_utils import fd_gradient
from ..exceptions import ContractViolation
from ..rewards import (
    Constant, NegQuadratic, RandomMLPScore, RewardEnum, Rosenbrock2D, make_reward,
    reward_grad
)

class TestRewards(unittest.TestCase):
    def testNegQuadraticAtTarget(self):
        reward = NegQuadratic([0.5, -0.5])
        self.assertEqual(float(reward.value(np.array([0.5, -0.5]))), 0.0)
        np.testing.assert_equal(reward_grad(reward, np.array([0.5, -0.5])), np.zeros(2))

    def testNegQuadraticGradient(self):
        reward = NegQuadratic([0.5, -0.5])
        u = np.array([0.2, 0.3])
        np.testing.assert_allclose(reward_grad(reward, reward.target + u), -2 * u)

    def testGradientsAgainstFiniteDifferences(self):
        points = {
            NegQuadratic([1.0, 2.0]): np.array([0.3, -0.1]),
            Rosenbrock2D(): np.array([0.3, -0.1]),
            RandomMLPScore(2, seed=7): np.array([0.3, -0.1]),
            RandomMLPScore(3, seed=1): np.array([0.3, -0.1, 0.8]),
        }
        for reward, x0 in points.items():
            fd = fd_gradient(lambda x: float(reward.value(x)), x0)
            grad = reward_grad(reward, x0)
            self.assertLess(np.linalg.norm(grad - fd) / np.linalg.norm(fd), 1e-6)

    def testBatched(self):
        reward = RandomMLPScore(2)
        x0 = np.random.default_rng(0).standard_normal((7, 2))
        self.assertEqual(reward.value(x0).shape, (7,))
        self.assertEqual(reward.grad(x0).shape, (7, 2))
        np.testing.assert_allclose(reward.grad(x0)[3], reward.grad(x0[3]))

    def testConstant(self):
        reward = Constant(3, value=1.5)
        np.testing.assert_equal(reward.value(np.zeros((4, 3))), np.full(4, 1.5))
        np.testing.assert_equal(reward.grad(np.ones(3)), np.zeros(3))

    def testMakeReward(self):
        self.assertIsInstance(make_reward('neg-quadratic', 2, [0.5, -0.5]), NegQuadratic)
        self.assertIsInstance(make_reward('random-mlp-score', 4, seed=3), RandomMLPScore)
        self.assertIs(RewardEnum.from_kind('rosenbrock-2d').value, Rosenbrock2D)
        self.assertRaises(ContractViolation, make_reward, 'rosenbrock-2d', 3)
        self.assertRaises(ContractViolation, make_reward, 'neg-quadratic', 2, [1.0])
        self.assertRaises(ContractViolation, make_reward, 'aesthetic', 2)

    def testDimensionMismatch(self):
        self.assertRaises(ContractViolation, NegQuadratic([0.0, 0.0]).value, np.zeros(3))
