# -*- coding: utf-8 -*-

# File: pure_zo.py

"""This module contains the pure zeroth-order estimator: every step, step 1
included, perturbs the parameters, and the estimate uses only R(x_0) and the
perturbations.
"""

from typing import Optional
import numpy as np
from .estimator_base import EstimatorBase, GradientEstimate
from .rlr import composite_estimate
from ..chain import BudgetModel, ChainSpec, EstimatorPlan, NoiseDraw, draw_noise

def grad_pure_zo(
        spec: ChainSpec,
        params: np.ndarray,
        noise: NoiseDraw,
        budget: Optional[BudgetModel] = None,
        strict: bool = True,
    ) -> GradientEstimate:
    return composite_estimate(
        spec, params, EstimatorPlan.pure_zo(spec.T), noise, budget, strict)

class PureZO(EstimatorBase):
    kind = 'pure-zo'

    def plan(self) -> EstimatorPlan:
        return EstimatorPlan.pure_zo(self.spec.T)

    def estimate(self, params, seed, n_samples=None, strict=True):
        noise = draw_noise(self.spec, self.plan(), seed, n_samples)
        return grad_pure_zo(self.spec, params, noise, self.budget, strict)
