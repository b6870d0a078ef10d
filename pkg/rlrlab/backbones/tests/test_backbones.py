import unittest
import numpy as np
from ...tests_common import *
from ...diff_utils import fd_gradient
from ...exceptions import ContractViolation
from .. import (
    BackboneEnum, LinearAffine, MLPTanh, backbone_forward, backbone_vjp_theta, backbone_vjp_x
)

def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)

class TestBackboneVJP(unittest.TestCase):
    def setUp(self) -> None:
        self.rng = np.random.default_rng(42)
        self.backbones = [
            LinearAffine(d=2),
            LinearAffine(d=3, time_conditioning=True, horizon=6),
            MLPTanh(d=2, m=4),
            MLPTanh(d=3, m=5, time_conditioning=True, horizon=6),
        ]

    def testVJPAgainstFiniteDifferences(self):
        for backbone in self.backbones:
            for probe in range(20):
                params = backbone.init_params(seed=probe, scale=1.0)
                x = self.rng.standard_normal(backbone.d)
                v = self.rng.standard_normal(backbone.d)
                t = int(self.rng.integers(1, 7))

                fd_x = fd_gradient(lambda y: v @ backbone.forward(params, y, t), x)
                fd_theta = fd_gradient(lambda p: v @ backbone.forward(p, x, t), params)

                self.assertLess(relative_error(backbone.vjp_x(params, x, t, v), fd_x), 1e-6)
                self.assertLess(
                    relative_error(backbone.vjp_theta(params, x, t, v), fd_theta), 1e-6)

    def testFunctionalForms(self):
        backbone = LinearAffine(d=1)
        params = np.array([0.8, 0.1])
        x = np.array([1.0])
        v = np.array([2.0])
        np.testing.assert_allclose(backbone_forward(backbone, params, x, 3), [0.9])
        np.testing.assert_allclose(backbone_vjp_x(backbone, params, x, 3, v), [1.6])
        np.testing.assert_allclose(backbone_vjp_theta(backbone, params, x, 3, v), [2.0, 2.0])

    def testVJPLinearInCotangent(self):
        backbone = MLPTanh(d=2, m=4)
        params = backbone.init_params(seed=1)
        x = np.array([0.3, -0.7])
        v1 = np.array([1.0, 2.0])
        v2 = np.array([-0.5, 0.25])
        np.testing.assert_allclose(
            backbone.vjp_theta(params, x, 1, v1 + 2 * v2),
            backbone.vjp_theta(params, x, 1, v1) + 2 * backbone.vjp_theta(params, x, 1, v2),
            rtol=1e-12, atol=1e-14)

    def testBatchedMatchesRows(self):
        for backbone in self.backbones:
            params = backbone.init_params(seed=3)
            x = self.rng.standard_normal((5, backbone.d))
            v = self.rng.standard_normal((5, backbone.d))
            batched = backbone_vjp_theta(backbone, params, x, 2, v)
            self.assertEqual(batched.shape, (5, backbone.n_params))
            for row in range(5):
                np.testing.assert_allclose(
                    batched[row], backbone.vjp_theta(params, x[row], 2, v[row]),
                    rtol=1e-12, atol=1e-14)

    def testPerRowParameters(self):
        backbone = MLPTanh(d=2, m=3)
        params = np.stack([backbone.init_params(seed=s) for s in range(4)])
        x = self.rng.standard_normal((4, 2))
        out = backbone.forward(params, x, 1)
        for row in range(4):
            np.testing.assert_allclose(out[row], backbone.forward(params[row], x[row], 1))

class TestBackboneLayout(unittest.TestCase):
    def testParameterCounts(self):
        self.assertEqual(LinearAffine(d=2).n_params, 6)
        self.assertEqual(LinearAffine(d=2, time_conditioning=True, horizon=5).n_params, 8)
        self.assertEqual(MLPTanh(d=2, m=4).n_params, 22)

    def testFlattenUnflatten(self):
        backbone = MLPTanh(d=2, m=4)
        params = backbone.init_params(seed=0)
        blocks = backbone.unflatten(params)
        self.assertEqual(blocks['W1'].shape, (4, 2))
        self.assertEqual(blocks['b2'].shape, (2,))
        np.testing.assert_equal(backbone.flatten(blocks), params)

    def testIdentityParams(self):
        backbone = LinearAffine(d=2)
        x = np.array([1.0, -2.0])
        np.testing.assert_equal(backbone.forward(backbone.identity_params(), x, 1), x)

    def testTimeFeature(self):
        backbone = LinearAffine(d=1, time_conditioning=True, horizon=4)
        params = backbone.flatten({'W': np.array([[0.0, 1.0]]), 'b': np.zeros(1)})
        self.assertAlmostEqual(float(backbone.forward(params, np.array([5.0]), 2)[0]), 0.5)

    def testWrongShapes(self):
        backbone = MLPTanh(d=2, m=4)
        self.assertRaises(ContractViolation, backbone.forward, np.zeros(5), np.zeros(2), 1)
        self.assertRaises(
            ContractViolation, backbone.forward, backbone.init_params(), np.zeros(3), 1)
        self.assertRaises(ContractViolation, MLPTanh, d=2, m=0)

    def testEnum(self):
        self.assertIs(BackboneEnum.from_kind('mlp-tanh').value, MLPTanh)
        self.assertIs(BackboneEnum.from_code(1).value, LinearAffine)
        self.assertRaisesRegex(ContractViolation, 'unknown backbone kind', BackboneEnum.from_kind, 'conv')
