import unittest
from functools import partial
import numpy as np
from ...tests_common import *
from ...chain import EstimatorPlan, draw_noise, forward_chain
from ...estimators import FullBP, ScoreRL, estimate_samples, grad_ho_term, grad_score_rl
from ...exceptions import StepModeMismatch
from ...stat_utils import mc_stats

class TestScoreRL(TestCommon, unittest.TestCase):
    def setUp(self) -> None:
        return super().setUp(ScoreRL)

class TestScoreRLTerms(unittest.TestCase):
    def testSingleStepIsHOTerm(self):
        spec = reference_spec(T=1)
        params = reference_params(spec)
        plan = EstimatorPlan.score_rl(1)
        noise = draw_noise(spec, plan, seed=2, n_samples=8)
        trajectory = forward_chain(spec, plan, params, noise)
        np.testing.assert_allclose(grad_score_rl(spec, params, noise).grad,
                                   grad_ho_term(spec, params, trajectory, 1, 0),
                                   rtol=1e-14, atol=1e-15)

    def testRequiresAdditiveNoise(self):
        spec = reference_spec()
        noise = draw_noise(spec, EstimatorPlan.pure_zo(spec.T), seed=0)
        self.assertRaises(StepModeMismatch, grad_score_rl, spec, reference_params(spec), noise)

    def testUnbiased(self):
        spec = reference_spec(T=3)
        params = reference_params(spec)
        score = mc_stats(partial(estimate_samples, ScoreRL(spec), params), 50000, seed=4)
        full = mc_stats(partial(estimate_samples, FullBP(spec), params), 50000, seed=4)
        assert_mc_close(self, score, full, 4.0)
