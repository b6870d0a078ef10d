# -*- coding: utf-8 -*-

# File: full_bp.py

"""This module contains full backpropagation through every step of the chain,
the first-order reference estimator.
"""

from typing import Optional
import numpy as np
from .estimator_base import (
    EstimatorBase, GradientEstimate, finish_estimate, require_additive,
    reverse_sweep
)
from ..chain import (
    BudgetModel, ChainSpec, EstimatorPlan, NoiseDraw, draw_noise, forward_chain
)

def grad_full_bp(
        spec: ChainSpec,
        params: np.ndarray,
        noise: NoiseDraw,
        budget: Optional[BudgetModel] = None,
        strict: bool = True,
    ) -> GradientEstimate:
    """Pathwise gradient of R(x_0) with the additive noise held fixed, by one
    reverse sweep that accumulates the parameter VJP of every step while
    pulling the cotangent back through the latents.
    """
    require_additive(noise, 'full backpropagation')
    plan = EstimatorPlan.full_bp(spec.T)
    params = spec.backbone.check_params(params)
    trajectory = forward_chain(spec, plan, params, noise, strict)
    cotangent = spec.reward.grad(trajectory.x0)
    grad = reverse_sweep(spec, params, trajectory, cotangent, 1, spec.T)
    return finish_estimate(grad, plan, trajectory, budget, strict)

class FullBP(EstimatorBase):
    kind = 'full-bp'

    def plan(self) -> EstimatorPlan:
        return EstimatorPlan.full_bp(self.spec.T)

    def estimate(self, params, seed, n_samples=None, strict=True):
        noise = draw_noise(self.spec, self.plan(), seed, n_samples)
        return grad_full_bp(self.spec, params, noise, self.budget, strict)
