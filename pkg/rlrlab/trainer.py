# -*- coding: utf-8 -*-

# File: trainer.py

"""This module contains the stochastic gradient ascent loop driven by any
estimator, the step-size rule and bound of the non-convex convergence
theorem, the estimation procedures for its constants and the Monte Carlo
reports of the acceptance suite.
"""

import abc
import logging
import multiprocessing as mp
from dataclasses import dataclass, field, replace
from functools import partial
from typing import List, NamedTuple, Optional, Sequence
import numpy as np
import pandas as pd
from .chain import (
    BudgetModel, ChainSpec, EstimatorPlan, draw_noise, frozen_noise_objective
)
from .decorators import finite_output, perf
from .estimators import EstimatorBase, FullBP, estimate_samples, make_estimator
from .exceptions import ContractViolation, DivergenceError
from .planner import JPolicy, JSampler
from .stat_utils import (
    MCStats, allowed_flags, combined_standard_errors, mc_stats, rolling_mean
)

TRAIN_LOG_COLUMNS = [
    'iter', 'reward_mean', 'grad_sq_norm', 'step_size', 'j', 'cost_units', 'collapsed'
]
OPTIMIZERS = ('sgd', 'theorem2', 'adam')
_SEED_MASK = (1 << 64) - 1
# spawn key of the per-iteration seeds
_ITERATION_SPAWN_KEY = 3
# spawn key of the second estimator in unbiasedness_report
_REFERENCE_SPAWN_KEY = 4

@dataclass(frozen=True)
class TrainConfig:
    """Training run configuration.

    Attributes
    ----------
    estimator : str
        Estimator kind, see `EstimatorEnum`.
    h : int
        HO block length of RLR estimators.
    sampler : JSampler
        j policy of RLR estimators.
    T_prime : int
        Truncation of truncated backpropagation.
    optimizer : str
        'sgd' (constant step), 'theorem2' (step size from the convergence
        theorem, needs L, delta0 and sigma2) or 'adam'.
    step_size : float
        Step size of sgd, learning rate of adam.
    iterations : int
        Number of updates K + 1.
    batch : int
        Estimator draws averaged per update.
    seed : int
        Seed of the run.
    common_noise : bool
        Reuse the noise of iteration 0 in every iteration.
    """
    estimator: str = 'rlr'
    h: int = 2
    sampler: JSampler = field(default_factory=JSampler)
    T_prime: int = 1
    allow_j1: bool = False
    optimizer: str = 'sgd'
    step_size: float = 0.01
    iterations: int = 100
    batch: int = 8
    seed: int = 0
    budget: Optional[BudgetModel] = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    L: Optional[float] = None
    delta0: Optional[float] = None
    sigma2: Optional[float] = None
    ema_decay: float = 0.9
    collapse_window: int = 10
    collapse_tolerance: float = 1.0
    common_noise: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ContractViolation('iterations (K + 1) must be at least 1')
        if self.batch < 1:
            raise ContractViolation('batch size must be at least 1')
        if self.optimizer not in OPTIMIZERS:
            raise ContractViolation(f'unknown optimizer: {self.optimizer}')
        if self.optimizer == 'theorem2' and None in (self.L, self.delta0, self.sigma2):
            raise ContractViolation('theorem2 step size needs L, delta0 and sigma2')
        if self.optimizer != 'theorem2' and not self.step_size > 0:
            raise ContractViolation('step size must be positive')
        if not 0 <= self.ema_decay < 1:
            raise ContractViolation('EMA decay must lie in [0, 1)')

    @property
    def K(self) -> int:
        return self.iterations - 1

class TrainRecord(NamedTuple):
    iter: int
    reward_mean: float
    grad_sq_norm: float
    step_size: float
    j: Optional[int]
    cost_units: float
    collapsed: bool

@dataclass
class TrainLog:
    """Per-iteration records, the parameters each update started from and
    the terminal summary of a run.
    """
    spec: ChainSpec
    config: TrainConfig
    records: List[TrainRecord] = field(default_factory=list)
    snapshots: List[np.ndarray] = field(default_factory=list)
    final_params: Optional[np.ndarray] = None
    collapsed: bool = False
    diverged_at: Optional[int] = None
    wall_time: float = 0.0

    @property
    def complete(self) -> bool:
        return len(self.records) == self.config.iterations

    def reward_curve(self) -> np.ndarray:
        return np.array([r.reward_mean for r in self.records])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.records, columns=TRAIN_LOG_COLUMNS)
        frame['j'] = frame['j'].astype('Int64')
        frame['collapsed'] = frame['collapsed'].astype(int)
        return frame

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format='%.17g')

class OptimizerBase(abc.ABC):
    """Gradient ascent rule; `step` returns the next parameters."""
    def __init__(self, step_size: float):
        self.step_size = step_size

    @abc.abstractmethod
    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError('Inherited optimizer must implement this function')

class SGD(OptimizerBase):
    def step(self, params, grad):
        return params + self.step_size * grad

class Adam(OptimizerBase):
    def __init__(self, step_size, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(step_size)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.k = 0

    def step(self, params, grad):
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.k += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.k)
        v_hat = self.v / (1 - self.beta2**self.k)
        return params + self.step_size * m_hat / (np.sqrt(v_hat) + self.eps)

def _check_constants(L, delta0, sigma2, K):
    if not L > 0:
        raise ContractViolation('smoothness constant L must be positive')
    if delta0 < 0 or sigma2 < 0 or K < 0:
        raise ContractViolation('delta0, sigma2 and K must be non-negative')

@finite_output
def theorem2_step_size(L: float, delta0: float, sigma2: float, K: int) -> float:
    """gamma = [ (2 delta0 / ((K + 1) L sigma2))^(-1/2) + L ]^(-1), which is
    1 / L when sigma2 or delta0 is zero. Always gamma <= 1 / L.

    Examples
    --------
    >>> theorem2_step_size(1.0, 1.0, 1.0, 7)
    0.3333333333333333
    """
    _check_constants(L, delta0, sigma2, K)
    if sigma2 == 0 or delta0 == 0:
        return 1.0 / L
    first = np.sqrt((K + 1) * L * sigma2 / (2.0 * delta0))
    return float(1.0 / (first + L))

@finite_output
def theorem2_bound(L: float, delta0: float, sigma2: float, K: int) -> float:
    """Bound on the average squared gradient norm over K + 1 iterations:
    sqrt(8 L delta0 sigma2 / (K + 1)) + 2 L delta0 / (K + 1).
    """
    _check_constants(L, delta0, sigma2, K)
    return float(np.sqrt(8.0 * L * delta0 * sigma2 / (K + 1)) + 2.0 * L * delta0 / (K + 1))

def make_optimizer(config: TrainConfig) -> OptimizerBase:
    if config.optimizer == 'adam':
        return Adam(config.step_size, config.adam_beta1, config.adam_beta2, config.adam_eps)
    if config.optimizer == 'theorem2':
        return SGD(theorem2_step_size(config.L, config.delta0, config.sigma2, config.K))
    return SGD(config.step_size)

def iteration_seed(seed: int, k: int) -> int:
    state = np.random.SeedSequence(
        [int(seed) & _SEED_MASK, k], spawn_key=(_ITERATION_SPAWN_KEY,))
    return int(state.generate_state(1, dtype=np.uint64)[0])

def reference_seed(seed: int) -> int:
    """Seed of an independent stream for the estimator compared against."""
    state = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=(_REFERENCE_SPAWN_KEY,))
    return int(state.generate_state(1, dtype=np.uint64)[0])

def _majority_j(j) -> Optional[int]:
    if j is None:
        return None
    values = np.atleast_1d(np.asarray(j, dtype=np.int64))
    counts = np.bincount(values)
    return int(np.argmax(counts))

def _update_history(history, step_norms, T, decay):
    if history is None:
        history = np.zeros(T - 1)
        seen = np.zeros(T - 1, dtype=bool)
    else:
        history, seen = history
    for t, norm in step_norms.items():
        if 2 <= t <= T and np.isfinite(norm):
            k = t - 2
            history[k] = decay * history[k] + (1 - decay) * norm if seen[k] else norm
            seen[k] = True
    return history, seen

def _collapse(rewards: List[float], window: int, tolerance: float) -> bool:
    """Rolling mean of the batch reward fell below the initial window mean
    by more than tolerance * max(1, |initial mean|).
    """
    if len(rewards) < 2 * window:
        return False
    initial = float(np.mean(rewards[:window]))
    current = float(rolling_mean(rewards, window)[-1])
    return current < initial - tolerance * max(1.0, abs(initial))

@perf
def _train_loop(spec: ChainSpec, config: TrainConfig, params0: np.ndarray) -> TrainLog:
    log = TrainLog(spec, config)
    estimator = make_estimator(
        config.estimator, spec, config.budget, config.h, config.sampler,
        config.T_prime, config.allow_j1)
    softmax = config.sampler.policy is JPolicy.softmax_gradnorm and\
        hasattr(estimator, 'with_sampler')
    optimizer = make_optimizer(config)
    if config.optimizer == 'adam' and config.L is not None:
        logging.warning('the convergence bound step size does not apply to adam')

    theta = spec.backbone.check_params(params0).copy()
    history = None
    rewards = []
    for k in range(config.iterations):
        seed = iteration_seed(config.seed, 0 if config.common_noise else k)
        if softmax and history is not None:
            estimator = estimator.with_sampler(config.sampler.with_history(history[0]))
        try:
            estimate = estimator.estimate(theta, seed, n_samples=config.batch)
        except DivergenceError as e:
            logging.warning(f'training diverged at iteration {k}: {e}')
            log.collapsed = True
            log.diverged_at = k
            break

        grad = estimate.mean_grad()
        log.snapshots.append(theta.copy())
        theta = optimizer.step(theta, grad)
        if not np.all(np.isfinite(theta)):
            logging.warning(f'parameters became non-finite at iteration {k}')
            log.collapsed = True
            log.diverged_at = k
            theta = log.snapshots[-1]

        rewards.append(float(np.mean(estimate.reward_value)))
        log.collapsed = log.collapsed or _collapse(
            rewards, config.collapse_window, config.collapse_tolerance)
        log.records.append(TrainRecord(
            iter=k,
            reward_mean=rewards[-1],
            grad_sq_norm=float(np.sum(grad**2)),
            step_size=optimizer.step_size,
            j=_majority_j(estimate.j),
            cost_units=estimate.cost_units,
            collapsed=log.collapsed,
        ))
        logging.debug(f'iteration {k}: reward {rewards[-1]:.6g}')
        if softmax:
            history = _update_history(history, estimate.step_norms, spec.T, config.ema_decay)
        if log.diverged_at is not None:
            break

    log.final_params = theta
    return log

def train(spec: ChainSpec, config: TrainConfig, params0: np.ndarray) -> TrainLog:
    """Runs gradient ascent theta_{k+1} = theta_k + gamma G_k, where G_k is
    the estimator averaged over `config.batch` draws.

    Parameters
    ----------
    spec : ChainSpec
        Chain definition.
    config : TrainConfig
        Estimator, optimizer and run length.
    params0 : numpy.ndarray
        Starting parameters theta_0.

    Returns
    -------
    log : TrainLog
        K + 1 records, or fewer when the run diverged (then `collapsed`).
    """
    log, run_time = _train_loop(spec, config, params0)
    log.wall_time = run_time
    final = log.records[-1].reward_mean if log.records else float('nan')
    logging.info(
        f'{config.estimator} seed {config.seed}: {len(log.records)} iterations in '+
        f'{run_time:.2f} s, final reward {final:.6g}')
    return log

def _train_seed(spec, config, params0, seed) -> TrainLog:
    return train(spec, replace(config, seed=seed), params0)

def train_seeds(
        spec: ChainSpec,
        config: TrainConfig,
        params0: np.ndarray,
        seeds: Sequence[int],
        workers: int = 1,
    ) -> List[TrainLog]:
    """One training run per seed, in seed order."""
    run = partial(_train_seed, spec, config, params0)
    if workers > 1 and len(seeds) > 1:
        with mp.Pool(min(workers, len(seeds))) as pool:
            return pool.map(run, seeds)
    return [run(seed) for seed in seeds]

def reward_objective(spec: ChainSpec, n_draws: int = 256, seed: int = 0):
    """theta -> mean R(x_0) over a frozen set of all-additive noise draws."""
    plan = EstimatorPlan.full_bp(spec.T)
    noise = draw_noise(spec, plan, seed, n_draws)
    return frozen_noise_objective(spec, plan, noise)

def evaluate_rewards(log: TrainLog, n_draws: int = 256, seed: int = 0) -> np.ndarray:
    """Frozen-noise mean reward at every snapshot and at the final
    parameters, a yardstick shared by all estimators. Diverging parameters
    score -inf.
    """
    objective = reward_objective(log.spec, n_draws, seed)
    points = list(log.snapshots)
    if log.final_params is not None:
        points.append(log.final_params)
    rewards = []
    for theta in points:
        try:
            rewards.append(objective(theta))
        except DivergenceError:
            rewards.append(-np.inf)
    return np.array(rewards)

def iterations_to_threshold(
        curve: Sequence[float], threshold: float, limit: Optional[int] = None) -> int:
    """Index of the first entry reaching `threshold`. A curve that never does
    counts as `limit`, len(curve) by default. Runs cut short by divergence
    take the planned run length as `limit`.
    """
    reached = np.flatnonzero(np.asarray(curve) >= threshold)
    if reached.size:
        return int(reached[0])
    return len(curve) if limit is None else max(limit, len(curve))

def estimate_smoothness(
        spec: ChainSpec,
        points: np.ndarray,
        n_directions: int = 100,
        n_draws: int = 256,
        seed: int = 0,
        step: float = 1e-3,
    ) -> float:
    """L_est = 2 max |J(theta + eps u) - 2 J(theta) + J(theta - eps u)| / eps^2
    over random unit directions u, where J is the frozen-noise mean reward.
    Probes cycle through the rows of `points`.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    objective = reward_objective(spec, n_draws, seed)
    rng = np.random.default_rng(seed)
    curvature = 0.0
    for i in range(n_directions):
        theta = points[i % points.shape[0]]
        u = rng.standard_normal(theta.shape)
        u /= np.linalg.norm(u)
        second = (objective(theta + step * u) - 2.0 * objective(theta) +
                  objective(theta - step * u)) / step**2
        curvature = max(curvature, abs(second))
    return 2.0 * curvature

def estimate_sigma2(
        estimator: EstimatorBase,
        params: np.ndarray,
        n_samples: int = 10000,
        seed: int = 0,
        workers: int = 1,
    ) -> float:
    """Trace variance of one estimator draw at `params`."""
    thunk = partial(estimate_samples, estimator, params)
    return mc_stats(thunk, n_samples, seed, workers=workers).trace_variance

def estimate_delta0(
        spec: ChainSpec,
        params0: np.ndarray,
        reference_params: np.ndarray,
        n_draws: int = 256,
        seed: int = 0,
    ) -> float:
    """R_best_known - R(theta_0), with R_best_known taken at the parameters of
    a full-backpropagation reference run. Never negative.
    """
    objective = reward_objective(spec, n_draws, seed)
    return max(0.0, objective(reference_params) - objective(params0))

@dataclass
class UnbiasednessReport:
    """Coordinate-wise comparison of two estimators' Monte Carlo means."""
    label_a: str
    label_b: str
    stats_a: MCStats
    stats_b: MCStats
    k_sigma: float
    z: np.ndarray
    flags: int
    allowed: int

    @property
    def passed(self) -> bool:
        return self.flags <= self.allowed

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))

def unbiasedness_report(
        estimator_a: EstimatorBase,
        estimator_b: EstimatorBase,
        params: np.ndarray,
        n: int,
        k_sigma: float = 4.0,
        seed: int = 0,
        workers: int = 1,
        n_b: Optional[int] = None,
    ) -> UnbiasednessReport:
    """Flags coordinates where |mean_a - mean_b| > k_sigma combined standard
    errors and passes when the flag count is within the 99% binomial
    allowance for false flags at that level.

    Estimator a draws from `seed` and estimator b from `reference_seed(seed)`.
    The streams are disjoint, so the two means are independent as the
    combined standard error assumes.
    """
    stats_a = mc_stats(partial(estimate_samples, estimator_a, params), n, seed,
                       workers=workers)
    stats_b = mc_stats(partial(estimate_samples, estimator_b, params), n_b or n,
                       reference_seed(seed), workers=workers)
    se = combined_standard_errors(stats_a, stats_b)
    diff = stats_a.mean - stats_b.mean
    with np.errstate(divide='ignore', invalid='ignore'):
        z = np.where(se > 0, diff / se, np.where(diff == 0, 0.0, np.inf))
    flags = int(np.sum(np.abs(z) > k_sigma))
    report = UnbiasednessReport(
        estimator_a.label, estimator_b.label, stats_a, stats_b, k_sigma, z, flags,
        allowed_flags(z.size, k_sigma))
    logging.info(
        f'{report.label_a} vs {report.label_b}: {flags} flags (allowed {report.allowed}), '+
        f'max |z| {report.max_abs_z:.3g}')
    return report

class ConvergenceReport(NamedTuple):
    observed: float
    bound: float
    passed: bool
    K: int
    step_size_ok: bool
    note: str

def convergence_report(
        log: TrainLog,
        L_est: float,
        delta0_est: float,
        sigma2_est: float,
        n_mc: int = 1000,
        seed: int = 0,
    ) -> ConvergenceReport:
    """Compares the observed (1 / (K + 1)) sum ||grad R(theta_k)||^2, measured
    with full-backpropagation Monte Carlo means at the logged parameters,
    against the convergence bound. The run maximizes R, so the bound is
    applied to -R with delta0 = R* - R(theta_0).
    """
    if not log.snapshots or len(log.snapshots) != len(log.records):
        raise ContractViolation('train log has no parameter snapshot per iteration')

    K = len(log.records) - 1
    reference = FullBP(log.spec)
    sq_norms = [
        float(np.sum(reference.estimate(theta, seed + k, n_samples=n_mc,
                                        strict=False).mean_grad()**2))
        for k, theta in enumerate(log.snapshots)
    ]
    observed = float(np.mean(sq_norms))
    bound = theorem2_bound(L_est, delta0_est, sigma2_est, K)

    note = ''
    step_size_ok = True
    if log.config.optimizer == 'adam':
        note = 'adam: the bound assumes plain sgd with the theorem step size'
        logging.warning(note)
    else:
        step_size_ok = all(r.step_size <= 1.0 / L_est for r in log.records)
    return ConvergenceReport(observed, bound, observed <= bound and step_size_ok, K,
                             step_size_ok, note)
