# -*- coding: utf-8 -*-

# File: rlr.py

"""This module contains the recursive likelihood ratio (RLR) estimator and its
three kinds of terms:

* FO: D_theta phi_1(x_1)^T dR/dx_0, exact backpropagation through step 1,
* HO: -R(x_0) D_theta phi_{j:j+h}^T grad_z ln f(z_j), a score at the additive
  noise of step j pulled back through the sub-chain of steps j..j+h,
* ZO: -R(x_0) grad_z ln f(z_i) for the parameter perturbation of step i.

An RLR estimate is FO + HO + the ZO terms of every step outside {1} and
outside the HO block.
"""

import copy
from typing import Dict, Optional
import numpy as np
from .estimator_base import (
    EstimatorBase, GradientEstimate, finish_estimate, reverse_sweep,
    reward_factor
)
from .plan_validation import validate_plan
from ..chain import (
    BudgetModel, ChainSpec, EstimatorPlan, NoiseDraw, StepMode, Trajectory,
    draw_noise, forward_chain, gaussian_log_score
)
from ..planner import JSampler, sample_j, sample_j_many
from ..exceptions import OutOfRange, StepModeMismatch

_SEED_MASK = (1 << 64) - 1

def grad_fo_term(spec: ChainSpec, params: np.ndarray, trajectory: Trajectory) -> np.ndarray:
    """D_theta phi_1(x_1; theta)^T dR(x_0)/dx_0."""
    cotangent = spec.reward.grad(trajectory.x0)
    return reverse_sweep(spec, params, trajectory, cotangent, 1, 1)

def grad_ho_term(
        spec: ChainSpec,
        params: np.ndarray,
        trajectory: Trajectory,
        j: int,
        h: int,
    ) -> np.ndarray:
    """Score of z_j seeded at the output of step j and swept back through
    steps j..j+h. The noises of steps j+1..j+h are differentiated pathwise.

    Parameters
    ----------
    spec : ChainSpec
        Chain definition.
    params : numpy.ndarray
        Parameter vector theta.
    trajectory : Trajectory
        Simulation with additive noise and retained inputs on steps j..j+h.
    j : int
        First step of the block, the one whose noise carries the score.
    h : int
        Number of further steps differentiated pathwise.

    Returns
    -------
    term : numpy.ndarray
        Parameter-space vector (one per row for batches).
    """
    if h < 0 or j < 1 or j + h > spec.T:
        raise OutOfRange(f'HO block [{j}, {j + h}] does not fit in 1..{spec.T}')
    for t in range(j, j + h + 1):
        if not trajectory.plan.mode(t).additive:
            raise StepModeMismatch(f'HO block step {t} has mode {trajectory.plan.mode(t).value}')

    score = gaussian_log_score(trajectory.noise.latent_noise[j], spec.sigma(j))
    return -reward_factor(trajectory) *\
        reverse_sweep(spec, params, trajectory, score, j, j + h)

def grad_zo_term(
        trajectory: Trajectory,
        step_i: int,
        noise: NoiseDraw,
        sigma_param: float,
    ) -> np.ndarray:
    """-R(x_0) grad_z ln f(z_i) = R(x_0) z_i / sigma_param^2."""
    if trajectory.plan.mode(step_i) is not StepMode.ZO:
        raise StepModeMismatch(
            f'step {step_i} has mode {trajectory.plan.mode(step_i).value}, not zo')
    score = gaussian_log_score(noise.param_noise[step_i], sigma_param)
    return -reward_factor(trajectory) * score

def _mean_norm(term: np.ndarray) -> float:
    norms = np.linalg.norm(term, axis=-1)
    norms = np.asarray(norms)[np.isfinite(norms)]
    return float(norms.mean()) if norms.size else float('nan')

def ho_block(plan: EstimatorPlan):
    """(j, h) of the plan's HO block, or None."""
    score_steps = plan.steps(StepMode.HO_SCORE)
    if not score_steps:
        return None
    return score_steps[0], len(plan.steps(StepMode.HO_PATH))

def composite_estimate(
        spec: ChainSpec,
        params: np.ndarray,
        plan: EstimatorPlan,
        noise: NoiseDraw,
        budget: Optional[BudgetModel] = None,
        strict: bool = True,
        include_ho: bool = True,
        include_zo: bool = True,
    ) -> GradientEstimate:
    """Simulates the chain under `plan` and sums the FO term (when step 1 is
    pathwise), the HO term (when the plan has an HO block) and the ZO terms
    of all ZO steps. Every term is returned in `terms`, also the ones left
    out of the sum.
    """
    params = spec.backbone.check_params(params)
    trajectory = forward_chain(spec, plan, params, noise, strict)
    shape = trajectory.x0.shape[:-1] + (spec.n_params,)
    step_norms: Dict[int, float] = {}

    with np.errstate(over='ignore', invalid='ignore'):
        fo = np.zeros(shape)
        if plan.mode(1) is StepMode.PATHWISE_FO:
            fo = grad_fo_term(spec, params, trajectory)

        ho = np.zeros(shape)
        block = ho_block(plan)
        if block is not None:
            ho = grad_ho_term(spec, params, trajectory, *block)
            step_norms[block[0]] = _mean_norm(ho)

        zo = np.zeros(shape)
        for i in plan.zo_steps:
            term = grad_zo_term(trajectory, i, noise, spec.sigma_param)
            step_norms[i] = _mean_norm(term)
            zo = zo + term

        grad = fo
        if include_ho:
            grad = grad + ho
        if include_zo:
            grad = grad + zo

    return finish_estimate(
        grad, plan, trajectory, budget, strict,
        terms={'fo': fo, 'ho': ho, 'zo': zo},
        j=None if block is None else block[0],
        step_norms=step_norms,
    )

def grad_rlr(
        spec: ChainSpec,
        params: np.ndarray,
        j: int,
        h: int,
        seed: int,
        budget: Optional[BudgetModel] = None,
        n_samples: Optional[int] = None,
        allow_j1: bool = False,
        strict: bool = True,
    ) -> GradientEstimate:
    """RLR estimate for a fixed HO block [j, j + h].

    The plan is validated first, including the budget when one is given.
    Noise comes from `seed`, so equal arguments give bit-identical results.

    Examples
    --------
    >>> from rlrlab.tests_common import reference_spec, reference_params
    >>> from rlrlab.estimators import grad_rlr
    >>> spec = reference_spec()
    >>> grad_rlr(spec, reference_params(spec), j=2, h=2, seed=0).grad.shape
    (22,)
    """
    plan = EstimatorPlan.rlr(spec.T, j, h)
    validate_plan(plan, spec, allow_j1, budget)
    noise = draw_noise(spec, plan, seed, n_samples)
    return composite_estimate(spec, params, plan, noise, budget, strict)

def group_seed(seed: int, j: int) -> int:
    """Seed of the rows of a batch that share the HO block start j."""
    state = np.random.SeedSequence([int(seed) & _SEED_MASK, int(j)])
    return int(state.generate_state(1, dtype=np.uint64)[0])

class RLR(EstimatorBase):
    """RLR estimator with the HO block start drawn by a `JSampler` on every
    evaluation. Batches draw j per row and simulate each j group with its
    own seed.
    """
    kind = 'rlr'
    include_ho = True
    include_zo = True

    def __init__(
            self,
            spec: ChainSpec,
            h: int = 2,
            sampler: Optional[JSampler] = None,
            budget: Optional[BudgetModel] = None,
            allow_j1: bool = False,
        ):
        super().__init__(spec, budget)
        self.h = h
        self.sampler = JSampler() if sampler is None else sampler
        self.allow_j1 = allow_j1
        validate_plan(self.plan(), spec, allow_j1, budget)

    @property
    def label(self) -> str:
        return f'{self.kind}(h={self.h})'

    def plan(self, j: Optional[int] = None) -> EstimatorPlan:
        if j is None:
            j = int(self.sampler.support(self.spec.T, self.h, self.allow_j1)[0])
        return EstimatorPlan.rlr(self.spec.T, j, self.h)

    def with_sampler(self, sampler: JSampler) -> 'RLR':
        estimator = copy.copy(self)
        estimator.sampler = sampler
        return estimator

    def _evaluate(self, params, j, seed, n_samples, strict) -> GradientEstimate:
        plan = self.plan(j)
        validate_plan(plan, self.spec, self.allow_j1, self.budget)
        noise = draw_noise(self.spec, plan, seed, n_samples)
        return composite_estimate(
            self.spec, params, plan, noise, self.budget, strict,
            self.include_ho, self.include_zo)

    def estimate(self, params, seed, n_samples=None, strict=True):
        T, h = self.spec.T, self.h
        if n_samples is None:
            j = sample_j(self.sampler, h, T, seed, self.allow_j1)
            return self._evaluate(params, j, seed, None, strict)

        js = sample_j_many(self.sampler, h, T, seed, n_samples, self.allow_j1)
        p = self.spec.n_params
        grad = np.full((n_samples, p), np.nan)
        terms = {key: np.full((n_samples, p), np.nan) for key in ('fo', 'ho', 'zo')}
        reward_value = np.full(n_samples, np.nan)
        diverged = np.zeros(n_samples, dtype=bool)
        norm_sums: Dict[int, float] = {}
        norm_counts: Dict[int, int] = {}
        digests = []
        cost_units = 0.0

        for j in np.unique(js):
            rows = np.flatnonzero(js == j)
            part = self._evaluate(params, int(j), group_seed(seed, j), rows.size, strict)
            grad[rows] = part.grad
            for key in terms:
                terms[key][rows] = part.terms[key]
            reward_value[rows] = part.reward_value
            if part.diverged is not None:
                diverged[rows] = part.diverged
            for t, norm in part.step_norms.items():
                if np.isfinite(norm):
                    norm_sums[t] = norm_sums.get(t, 0.0) + norm * rows.size
                    norm_counts[t] = norm_counts.get(t, 0) + rows.size
            digests.append(part.plan_digest)
            cost_units = part.cost_units

        return GradientEstimate(
            grad=grad,
            cost_units=cost_units,
            plan_digest='+'.join(digests),
            reward_value=reward_value,
            terms=terms,
            j=js,
            step_norms={t: norm_sums[t] / norm_counts[t] for t in sorted(norm_sums)},
            diverged=diverged,
        )

class RLRNoZO(RLR):
    """FO and HO terms only. Drops the parameter dependence of the ZO steps,
    so it is biased.
    """
    kind = 'rlr-no-zo'
    unbiased = False
    include_zo = False

class RLRNoHO(EstimatorBase):
    """FO at step 1 and ZO at every other step."""
    kind = 'rlr-no-ho'

    def plan(self) -> EstimatorPlan:
        return EstimatorPlan.fo_zo(self.spec.T)

    def estimate(self, params, seed, n_samples=None, strict=True):
        noise = draw_noise(self.spec, self.plan(), seed, n_samples)
        return composite_estimate(
            self.spec, params, self.plan(), noise, self.budget, strict)
