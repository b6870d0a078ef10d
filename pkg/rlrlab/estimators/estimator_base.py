# -*- coding: utf-8 -*-

# File: estimator_base.py

"""This module contains the GradientEstimate record, the reverse sweep every
estimator is assembled from and the abstract class EstimatorBase which all
estimators inherit.
"""

import abc
from dataclasses import dataclass, field
from typing import ClassVar, Dict, Iterator, Optional, Tuple
import numpy as np
from ..chain import (
    BudgetModel, ChainSpec, DEFAULT_BUDGET, EstimatorPlan, NoiseDraw, StepMode,
    Trajectory, forward_chain, plan_cost
)
from ..exceptions import ContractViolation, StepModeMismatch

@dataclass
class GradientEstimate:
    """Result of one estimator evaluation (or a batch of them).

    Attributes
    ----------
    grad : numpy.ndarray
        Gradient estimate of shape (p,), or (n, p) for a batch.
    cost_units : float
        Memory cost of the producing plan.
    plan_digest : str
        Identifier of the producing plan.
    reward_value : numpy.ndarray
        R(x_0) of the simulation(s).
    terms : Dict[str, numpy.ndarray]
        Components of composite estimators ('fo', 'ho', 'zo').
    j : int | numpy.ndarray | None
        Start of the HO block (per row for batches).
    step_norms : Dict[int, float]
        Mean norm of the score term attributed to each step.
    diverged : numpy.ndarray | None
        Rows whose simulation diverged; their gradient is NaN.
    """
    grad: np.ndarray
    cost_units: float
    plan_digest: str
    reward_value: np.ndarray
    terms: Dict[str, np.ndarray] = field(default_factory=dict)
    j: Optional[object] = None
    step_norms: Dict[int, float] = field(default_factory=dict)
    diverged: Optional[np.ndarray] = None

    @property
    def n_diverged(self) -> int:
        return 0 if self.diverged is None else int(np.sum(self.diverged))

    def mean_grad(self) -> np.ndarray:
        """Average over the finite rows of a batch."""
        if self.grad.ndim == 1:
            return self.grad
        finite = np.all(np.isfinite(self.grad), axis=-1)
        if not np.any(finite):
            raise ContractViolation('every row of the batch diverged')
        return self.grad[finite].mean(axis=0)

def finish_estimate(
        grad: np.ndarray,
        plan: EstimatorPlan,
        trajectory: Trajectory,
        budget: Optional[BudgetModel],
        strict: bool,
        **extra,
    ) -> GradientEstimate:
    """Wraps a gradient into a GradientEstimate. Non-finite rows are an error
    in strict mode and count as diverged otherwise.
    """
    nonfinite = ~np.all(np.isfinite(grad), axis=-1)
    if strict and np.any(nonfinite):
        raise ContractViolation('gradient estimate has non-finite entries')

    diverged = trajectory.diverged
    if np.ndim(nonfinite) > 0:
        diverged = nonfinite if diverged is None else diverged | nonfinite

    return GradientEstimate(
        grad=grad,
        cost_units=plan_cost(plan, budget or DEFAULT_BUDGET),
        plan_digest=plan.digest,
        reward_value=trajectory.reward_value,
        diverged=diverged,
        **extra,
    )

def require_additive(noise: NoiseDraw, name: str):
    if noise.param_noise:
        raise StepModeMismatch(
            f'{name} needs additive noise at every step, got parameter noise at '+
            f'steps {sorted(noise.param_noise)}')

def step_params(
        params: np.ndarray,
        trajectory: Trajectory,
        t: int,
        perturbed: bool,
    ) -> np.ndarray:
    """Parameters step t was evaluated with."""
    if perturbed and trajectory.plan.mode(t) is StepMode.ZO:
        return params + trajectory.noise.param_noise[t]
    return params

def sweep_contributions(
        spec: ChainSpec,
        params: np.ndarray,
        trajectory: Trajectory,
        cotangent: np.ndarray,
        first: int,
        last: int,
        perturbed: bool = False,
    ) -> Iterator[Tuple[int, np.ndarray]]:
    """Reverse-mode sweep from the output of step `first` up to the input of
    step `last`, yielding the parameter VJP of every step on the way.

    Parameters
    ----------
    spec : ChainSpec
        Chain definition.
    params : numpy.ndarray
        Parameter vector theta.
    trajectory : Trajectory
        Forward simulation with the inputs of steps first..last retained.
    cotangent : numpy.ndarray
        Cotangent at x_{first - 1}.
    first, last : int
        Step range, first <= last.
    perturbed : bool
        Differentiate ZO steps at theta + z_t instead of theta.
    """
    v = cotangent
    for t in range(first, last + 1):
        theta = step_params(params, trajectory, t, perturbed)
        x = trajectory.input_of(t)
        yield t, spec.backbone.vjp_theta(theta, x, t, v)
        if t < last:
            v = spec.backbone.vjp_x(theta, x, t, v)

def reverse_sweep(
        spec: ChainSpec,
        params: np.ndarray,
        trajectory: Trajectory,
        cotangent: np.ndarray,
        first: int,
        last: int,
        perturbed: bool = False,
    ) -> np.ndarray:
    """Sum of the parameter VJPs of steps first..last, i.e. the cotangent
    pulled back to theta through the sub-chain.
    """
    grad = None
    for _, contribution in sweep_contributions(
            spec, params, trajectory, cotangent, first, last, perturbed):
        grad = contribution if grad is None else grad + contribution
    return grad

def reward_factor(trajectory: Trajectory) -> np.ndarray:
    """R(x_0) shaped to multiply parameter-space vectors."""
    return np.asarray(trajectory.reward_value)[..., None]

def grad_pathwise_reference(
        spec: ChainSpec,
        params: np.ndarray,
        plan: EstimatorPlan,
        noise: NoiseDraw,
        budget: Optional[BudgetModel] = None,
        strict: bool = True,
    ) -> GradientEstimate:
    """Full reverse sweep under any plan. ZO steps are differentiated through
    phi(x; theta + z); for all-additive plans this is full backpropagation.
    The expectation is the gradient of the plan's own objective.
    """
    params = spec.backbone.check_params(params)
    trajectory = forward_chain(spec, plan, params, noise, strict, retain_all=True)
    cotangent = spec.reward.grad(trajectory.x0)
    grad = reverse_sweep(spec, params, trajectory, cotangent, 1, spec.T, perturbed=True)
    return finish_estimate(grad, plan, trajectory, budget, strict)

class EstimatorBase(abc.ABC):
    """All estimator classes must inherit this class and implement `plan` and
    `estimate`. For use from the CLI the estimator needs to be added in the
    `EstimatorEnum` enum.

    An estimator is a pure function of (spec, params, seed): evaluating it
    twice with the same seed gives bit-identical results, and a batch of
    `n_samples` rows consists of independent replications.
    """
    kind: ClassVar[str] = ''
    unbiased: ClassVar[bool] = True

    def __init__(self, spec: ChainSpec, budget: Optional[BudgetModel] = None):
        self.spec = spec
        self.budget = budget

    @abc.abstractmethod
    def plan(self) -> EstimatorPlan:
        raise NotImplementedError('Inherited estimator must implement this function')

    @abc.abstractmethod
    def estimate(
            self,
            params: np.ndarray,
            seed: int,
            n_samples: Optional[int] = None,
            strict: bool = True,
        ) -> GradientEstimate:
        raise NotImplementedError('Inherited estimator must implement this function')

    @property
    def cost_units(self) -> float:
        return plan_cost(self.plan(), self.budget or DEFAULT_BUDGET)

    @property
    def label(self) -> str:
        return self.kind

def estimate_samples(
        estimator: EstimatorBase,
        params: np.ndarray,
        seed: int,
        n: int,
    ) -> np.ndarray:
    """(n, p) gradient samples with diverged rows as NaN; the thunk form
    used by `mc_stats` (bind with functools.partial).
    """
    estimate = estimator.estimate(params, seed, n_samples=n, strict=False)
    grad = np.array(estimate.grad, dtype=np.float64)
    if estimate.diverged is not None:
        grad[estimate.diverged] = np.nan
    return grad
