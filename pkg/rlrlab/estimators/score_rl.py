# -*- coding: utf-8 -*-

# File: score_rl.py

"""This module contains the score-function baseline in which every step is an
HO term of length zero, so no Jacobian spans more than one step.
"""

from typing import Optional
import numpy as np
from .estimator_base import (
    EstimatorBase, GradientEstimate, finish_estimate, require_additive,
    reverse_sweep, reward_factor
)
from ..chain import (
    BudgetModel, ChainSpec, EstimatorPlan, NoiseDraw, draw_noise, forward_chain,
    gaussian_log_score
)

def grad_score_rl(
        spec: ChainSpec,
        params: np.ndarray,
        noise: NoiseDraw,
        budget: Optional[BudgetModel] = None,
        strict: bool = True,
    ) -> GradientEstimate:
    """Sum over t of -R(x_0) D_theta phi_t(x_t)^T grad_z ln f(z_t)."""
    require_additive(noise, 'the score-function baseline')
    plan = EstimatorPlan.score_rl(spec.T)
    params = spec.backbone.check_params(params)
    trajectory = forward_chain(spec, plan, params, noise, strict)
    reward = reward_factor(trajectory)

    grad = None
    for t in range(1, spec.T + 1):
        score = gaussian_log_score(noise.latent_noise[t], spec.sigma(t))
        term = -reward * reverse_sweep(spec, params, trajectory, score, t, t)
        grad = term if grad is None else grad + term
    return finish_estimate(grad, plan, trajectory, budget, strict)

class ScoreRL(EstimatorBase):
    kind = 'score-rl'

    def plan(self) -> EstimatorPlan:
        return EstimatorPlan.score_rl(self.spec.T)

    def estimate(self, params, seed, n_samples=None, strict=True):
        noise = draw_noise(self.spec, self.plan(), seed, n_samples)
        return grad_score_rl(self.spec, params, noise, self.budget, strict)
