# -*- coding: utf-8 -*-

# File: truncated_bp.py

"""This module contains truncated backpropagation, which stops the reverse
sweep after the T' steps closest to x_0, its structural bias and the
randomized-truncation variant.
"""

from typing import Optional
import numpy as np
from .estimator_base import (
    EstimatorBase, GradientEstimate, finish_estimate, require_additive,
    reverse_sweep, sweep_contributions
)
from ..chain import (
    BudgetModel, ChainSpec, EstimatorPlan, NoiseDraw, Trajectory, draw_noise,
    forward_chain
)
from ..exceptions import ContractViolation

_SEED_MASK = (1 << 64) - 1
# spawn key of the T' draw of the randomized variant
_TRUNCATION_SPAWN_KEY = 2

def _check_truncation(spec: ChainSpec, T_prime: int):
    if not 1 <= T_prime <= spec.T:
        raise ContractViolation(f"T' must lie in [1, {spec.T}], got {T_prime}")

def grad_truncated_bp(
        spec: ChainSpec,
        params: np.ndarray,
        noise: NoiseDraw,
        T_prime: int,
        budget: Optional[BudgetModel] = None,
        strict: bool = True,
    ) -> GradientEstimate:
    """Full-backpropagation sweep that keeps only the parameter VJPs of steps
    1..T'. With T' = T it is full backpropagation.
    """
    _check_truncation(spec, T_prime)
    require_additive(noise, 'truncated backpropagation')
    plan = EstimatorPlan.truncated(spec.T, T_prime)
    params = spec.backbone.check_params(params)
    trajectory = forward_chain(spec, plan, params, noise, strict)
    cotangent = spec.reward.grad(trajectory.x0)
    grad = reverse_sweep(spec, params, trajectory, cotangent, 1, T_prime)
    return finish_estimate(grad, plan, trajectory, budget, strict)

def truncation_bias_samples(
        spec: ChainSpec,
        params: np.ndarray,
        T_prime: int,
        seed: int,
        n: int,
    ) -> np.ndarray:
    """(n, p) replications of the dropped part of the chain rule, the
    parameter VJPs of steps T'+1..T, each computed on the same noise as the
    full sweep it belongs to. Diverged rows are NaN.
    """
    _check_truncation(spec, T_prime)
    plan = EstimatorPlan.full_bp(spec.T)
    params = spec.backbone.check_params(params)
    noise = draw_noise(spec, plan, seed, n)
    trajectory = forward_chain(spec, plan, params, noise, strict=False)
    cotangent = spec.reward.grad(trajectory.x0)

    bias = np.zeros((n, spec.n_params))
    with np.errstate(over='ignore', invalid='ignore'):
        for t, contribution in sweep_contributions(
                spec, params, trajectory, cotangent, 1, spec.T):
            if t > T_prime:
                bias = bias + contribution
    if trajectory.diverged is not None:
        bias[trajectory.diverged] = np.nan
    return bias

def truncation_bias(
        spec: ChainSpec,
        params: np.ndarray,
        T_prime: int,
        n_samples: int,
        seed: int,
    ) -> np.ndarray:
    """Monte Carlo estimate of E[full BP - truncated BP(T')] with common
    random numbers per replication.
    """
    if n_samples < 1:
        raise ContractViolation('n_samples must be positive')
    samples = truncation_bias_samples(spec, params, T_prime, seed, n_samples)
    finite = np.all(np.isfinite(samples), axis=1)
    if not np.any(finite):
        raise ContractViolation('every replication diverged')
    return samples[finite].mean(axis=0)

def _scalar_chain(spec: ChainSpec):
    if spec.d != 1 or spec.backbone.kind != 'linear-affine' or\
            spec.backbone.time_conditioning:
        raise ContractViolation('closed forms need the scalar affine chain')
    if not hasattr(spec.reward, 'target'):
        raise ContractViolation('closed forms need a neg-quadratic reward')
    return float(spec.reward.target[0])

def scalar_chain_bias(
        spec: ChainSpec,
        params: np.ndarray,
        trajectory: Trajectory,
        T_prime: int,
    ) -> np.ndarray:
    """Dropped chain-rule terms of truncation at T' for x_{t-1} = w x_t + b + z_t
    written out: sum_{i>T'} w^(i-1) g [x_i, 1] with g = -2 (x_0 - x*).
    """
    target = _scalar_chain(spec)
    _check_truncation(spec, T_prime)
    w = params[0]
    g = -2.0 * (trajectory.x0[..., 0] - target)
    bias = np.zeros(np.shape(g) + (2,))
    for i in range(T_prime + 1, spec.T + 1):
        x_i = trajectory.latents[i][..., 0]
        bias[..., 0] += w**(i - 1) * g * x_i
        bias[..., 1] += w**(i - 1) * g
    return bias

def scalar_chain_moments(spec: ChainSpec, params: np.ndarray):
    """Means m_t and variances V_t of x_t, t = 0..T, of the scalar affine
    chain started from its fixed x_T.
    """
    _scalar_chain(spec)
    if spec.x_T is None:
        raise ContractViolation('closed forms need a fixed x_T')
    w, b = params
    m = np.zeros(spec.T + 1)
    V = np.zeros(spec.T + 1)
    m[spec.T] = spec.x_T[0]
    for t in range(spec.T, 0, -1):
        m[t - 1] = w * m[t] + b
        V[t - 1] = w**2 * V[t] + spec.sigma(t)**2
    return m, V

def scalar_chain_expected_bias(spec: ChainSpec, params: np.ndarray, T_prime: int) -> np.ndarray:
    """Expectation of `scalar_chain_bias`."""
    target = _scalar_chain(spec)
    _check_truncation(spec, T_prime)
    w = params[0]
    m, V = scalar_chain_moments(spec, params)
    expected_g = -2.0 * (m[0] - target)
    bias = np.zeros(2)
    for i in range(T_prime + 1, spec.T + 1):
        # Cov(x_0, x_i) = w^i V_i
        e_x0_xi = w**i * V[i] + m[0] * m[i]
        bias[0] += w**(i - 1) * -2.0 * (e_x0_xi - target * m[i])
        bias[1] += w**(i - 1) * expected_g
    return bias

def truncation_draws(seed: int, T_max: int, n: int) -> np.ndarray:
    """T' ~ Uniform{1, ..., T_max}, one per replication."""
    rng = np.random.default_rng(np.random.SeedSequence(
        int(seed) & _SEED_MASK, spawn_key=(_TRUNCATION_SPAWN_KEY,)))
    return rng.integers(1, T_max + 1, size=n)

class TruncatedBP(EstimatorBase):
    kind = 'truncated-bp'

    def __init__(self, spec, T_prime=1, budget=None):
        super().__init__(spec, budget)
        _check_truncation(spec, T_prime)
        self.T_prime = T_prime
        self.unbiased = T_prime == spec.T

    @property
    def label(self) -> str:
        return f"truncated-bp(T'={self.T_prime})"

    def plan(self) -> EstimatorPlan:
        return EstimatorPlan.truncated(self.spec.T, self.T_prime)

    def estimate(self, params, seed, n_samples=None, strict=True):
        noise = draw_noise(self.spec, self.plan(), seed, n_samples)
        return grad_truncated_bp(
            self.spec, params, noise, self.T_prime, self.budget, strict)

class RandomizedTruncatedBP(EstimatorBase):
    """Truncated backpropagation with T' drawn uniformly from {1..T_max} for
    every replication. Biased unless T_max = T is the only value drawn.
    """
    kind = 'randomized-truncated-bp'
    unbiased = False

    def __init__(self, spec, T_max=None, budget=None):
        super().__init__(spec, budget)
        self.T_max = spec.T if T_max is None else T_max
        _check_truncation(spec, self.T_max)

    @property
    def label(self) -> str:
        return f'randomized-truncated-bp(T_max={self.T_max})'

    def plan(self) -> EstimatorPlan:
        return EstimatorPlan.truncated(self.spec.T, self.T_max)

    def estimate(self, params, seed, n_samples=None, strict=True):
        spec = self.spec
        plan = EstimatorPlan.full_bp(spec.T)
        params = spec.backbone.check_params(params)
        noise = draw_noise(spec, plan, seed, n_samples)
        trajectory = forward_chain(spec, plan, params, noise, strict)

        n = 1 if n_samples is None else n_samples
        T_primes = truncation_draws(seed, self.T_max, n)
        if n_samples is None:
            T_primes = T_primes[0]

        cotangent = spec.reward.grad(trajectory.x0)
        grad = None
        for t, contribution in sweep_contributions(
                spec, params, trajectory, cotangent, 1, self.T_max):
            kept = np.where(np.asarray(t <= T_primes)[..., None], contribution, 0.0)
            grad = kept if grad is None else grad + kept
        return finish_estimate(grad, self.plan(), trajectory, self.budget, strict)
