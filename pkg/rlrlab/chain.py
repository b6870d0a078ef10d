# -*- coding: utf-8 -*-

# File: chain.py

"""This module contains the recursive stochastic chain x_T -> ... -> x_0, its
per-step noise modes, the counter-based noise draws and the memory cost model
used to budget estimator plans.

Step t maps x_t to x_{t-1}. Additive-noise steps compute
x_{t-1} = phi(x_t; theta) + z_t, parameter-perturbation (ZO) steps compute
x_{t-1} = phi(x_t; theta + z_t).
"""

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union
import numpy as np
from .backbones import BackboneBase
from .rewards import RewardBase
from .exceptions import ContractViolation, DivergenceError

DIVERGENCE_THRESHOLD = 1e12
_SEED_MASK = (1 << 64) - 1

class StepMode(Enum):
    PATHWISE_FO = 'pathwise-fo'
    HO_SCORE = 'ho-score'
    HO_PATH = 'ho-path'
    ZO = 'zo'
    SCORE_RL = 'score-rl'

    @property
    def additive(self) -> bool:
        return self is not StepMode.ZO

def sigma_preset(name: str, T: int, value: float = 0.1) -> Tuple[float, ...]:
    """Noise schedules: 'constant' (sigma_t = value) or 'geometric' (from
    0.5 at step T down to 0.01 at step 1).
    """
    if name == 'constant':
        return tuple(float(value) for _ in range(T))
    if name == 'geometric':
        return tuple(float(s) for s in np.geomspace(0.01, 0.5, T))
    raise ContractViolation(f'unknown sigma preset: {name}')

@dataclass(frozen=True)
class ChainSpec:
    """Generative chain definition.

    Attributes
    ----------
    T : int
        Number of steps.
    sigma_schedule : Tuple[float, ...]
        Standard deviation of the additive noise of steps 1..T.
    sigma_param : float
        Standard deviation of the ZO parameter perturbation.
    backbone : BackboneBase
        Shared map phi.
    reward : RewardBase
        Reward evaluated at x_0.
    x_T : Tuple[float, ...] | None
        Fixed starting latent, or None for x_T ~ N(0, I).
    """
    T: int
    sigma_schedule: Tuple[float, ...]
    sigma_param: float
    backbone: BackboneBase
    reward: RewardBase
    x_T: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.T < 1:
            raise ContractViolation('chain length T must be positive')
        object.__setattr__(
            self, 'sigma_schedule', tuple(float(s) for s in self.sigma_schedule))
        if len(self.sigma_schedule) != self.T:
            raise ContractViolation(
                f'sigma schedule has {len(self.sigma_schedule)} entries, '+
                f'expected {self.T}')
        if not all(s > 0 for s in self.sigma_schedule):
            raise ContractViolation('all sigma_t must be positive')
        if not self.sigma_param > 0:
            raise ContractViolation('sigma_param must be positive')
        if self.reward.d != self.backbone.d:
            raise ContractViolation('reward and backbone dimensions differ')
        if self.backbone.time_conditioning and self.backbone.horizon != self.T:
            raise ContractViolation(
                'time-conditioned backbone horizon must equal T')
        if self.x_T is not None:
            object.__setattr__(self, 'x_T', tuple(float(v) for v in self.x_T))
            if len(self.x_T) != self.backbone.d:
                raise ContractViolation('x_T dimension differs from d')

    @property
    def d(self) -> int:
        return self.backbone.d

    @property
    def n_params(self) -> int:
        return self.backbone.n_params

    def sigma(self, t: int) -> float:
        return self.sigma_schedule[t - 1]

@dataclass(frozen=True)
class EstimatorPlan:
    """Per-step mode assignment. `modes[t - 1]` is the mode of step t. For
    RLR-structured plans the HO block is [j, j + h]; `truncation` is the T'
    of truncated backpropagation plans.
    """
    modes: Tuple[StepMode, ...]
    h: int = 0
    j: int = 0
    truncation: Optional[int] = None

    @property
    def T(self) -> int:
        return len(self.modes)

    def mode(self, t: int) -> StepMode:
        return self.modes[t - 1]

    def steps(self, mode: StepMode) -> Tuple[int, ...]:
        return tuple(t for t in range(1, self.T + 1) if self.mode(t) is mode)

    @property
    def zo_steps(self) -> Tuple[int, ...]:
        return self.steps(StepMode.ZO)

    @property
    def retained_steps(self) -> Tuple[int, ...]:
        """Steps whose input latent has to be kept for backpropagation."""
        return tuple(
            t for t in range(1, self.T + 1) if self.mode(t) is not StepMode.ZO)

    @property
    def digest(self) -> str:
        text = ','.join(m.value for m in self.modes) +\
            f'|h={self.h}|j={self.j}|truncation={self.truncation}'
        return hashlib.sha256(text.encode('utf-8')).hexdigest()[:12]

    @classmethod
    def rlr(cls, T: int, j: int, h: int) -> 'EstimatorPlan':
        """FO at step 1, HO block [j, j + h], ZO everywhere else. The plan is
        built as asked; `validate_plan` decides whether it is admissible.
        """
        modes = []
        for t in range(1, T + 1):
            if j <= t <= j + h:
                modes.append(StepMode.HO_SCORE if t == j else StepMode.HO_PATH)
            elif t == 1:
                modes.append(StepMode.PATHWISE_FO)
            else:
                modes.append(StepMode.ZO)
        return cls(tuple(modes), h=h, j=j)

    @classmethod
    def full_bp(cls, T: int) -> 'EstimatorPlan':
        return cls((StepMode.PATHWISE_FO,) * T)

    @classmethod
    def truncated(cls, T: int, T_prime: int) -> 'EstimatorPlan':
        return cls((StepMode.PATHWISE_FO,) * T, truncation=T_prime)

    @classmethod
    def score_rl(cls, T: int) -> 'EstimatorPlan':
        return cls((StepMode.SCORE_RL,) * T)

    @classmethod
    def pure_zo(cls, T: int) -> 'EstimatorPlan':
        return cls((StepMode.ZO,) * T)

    @classmethod
    def fo_zo(cls, T: int) -> 'EstimatorPlan':
        """FO at step 1 and ZO at every other step (RLR without HO)."""
        return cls((StepMode.PATHWISE_FO,) + (StepMode.ZO,) * (T - 1))

@dataclass(frozen=True)
class BudgetModel:
    """Memory cost per backpropagated step (B_h), per perturbation step (B_z)
    and the total budget B, in abstract GB-equivalent units.
    """
    B_h: float
    B_z: float
    B: float

    def __post_init__(self):
        if not self.B_h > self.B_z > 0:
            raise ContractViolation('budget model requires B_h > B_z > 0')
        if not self.B > 0:
            raise ContractViolation('total budget B must be positive')

    def in_range(self, T: int) -> bool:
        """B_z T < B < B_h T: pure ZO underuses the budget, pure HO exceeds it."""
        return self.B_z * T < self.B < self.B_h * T

DEFAULT_BUDGET = BudgetModel(B_h=8.0, B_z=0.24, B=30.0)

@dataclass
class NoiseDraw:
    """Noise of one simulation (or a batch of `n_samples` simulations).
    Additive steps appear in `latent_noise`, ZO steps in `param_noise`.
    """
    latent_noise: Dict[int, np.ndarray]
    param_noise: Dict[int, np.ndarray]
    x_T: np.ndarray
    seed: int
    n_samples: Optional[int] = None

    def subset(self, rows: np.ndarray) -> 'NoiseDraw':
        """Rows of a batched draw."""
        if self.n_samples is None:
            raise ContractViolation('cannot take rows of an unbatched draw')
        rows = np.asarray(rows)
        return NoiseDraw(
            {t: z[rows] for t, z in self.latent_noise.items()},
            {t: z[rows] for t, z in self.param_noise.items()},
            self.x_T[rows],
            self.seed,
            int(self.x_T[rows].shape[0]),
        )

@dataclass
class Trajectory:
    """Realized chain. `latents[t]` is x_t for t = 0..T (batch dimensions
    follow the step index). `retained` holds the inputs of the steps that
    estimators may backpropagate through.
    """
    latents: np.ndarray
    reward_value: np.ndarray
    retained: Dict[int, np.ndarray]
    plan: EstimatorPlan
    noise: NoiseDraw
    diverged: Optional[np.ndarray] = field(default=None)

    @property
    def x0(self) -> np.ndarray:
        return self.latents[0]

    def input_of(self, t: int) -> np.ndarray:
        if t not in self.retained:
            raise ContractViolation(f'input latent of step {t} was not retained')
        return self.retained[t]

def noise_stream(seed: int, step: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, step); step 0 is x_T."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed) & _SEED_MASK, step])))

def draw_noise(
        spec: ChainSpec,
        plan: EstimatorPlan,
        seed: int,
        n_samples: Optional[int] = None,
    ) -> NoiseDraw:
    """Draws z_t ~ N(0, sigma_t^2 I_d) for additive steps and
    z_i ~ N(0, sigma_param^2 I_p) for ZO steps. Every step has its own stream,
    so any subset of steps is reproducible on its own.
    """
    if plan.T != spec.T:
        raise ContractViolation(f'plan has {plan.T} steps, chain has {spec.T}')

    batch = () if n_samples is None else (n_samples,)
    latent_noise = {}
    param_noise = {}
    for t in range(1, spec.T + 1):
        rng = noise_stream(seed, t)
        if plan.mode(t) is StepMode.ZO:
            param_noise[t] = rng.normal(0.0, spec.sigma_param, batch + (spec.n_params,))
        else:
            latent_noise[t] = rng.normal(0.0, spec.sigma(t), batch + (spec.d,))

    if spec.x_T is None:
        x_T = noise_stream(seed, 0).standard_normal(batch + (spec.d,))
    else:
        x_T = np.broadcast_to(np.asarray(spec.x_T), batch + (spec.d,)).copy()

    return NoiseDraw(latent_noise, param_noise, x_T, seed, n_samples)

def zero_noise(
        spec: ChainSpec,
        plan: EstimatorPlan,
        x_T: Optional[np.ndarray] = None,
        n_samples: Optional[int] = None,
    ) -> NoiseDraw:
    """All-zero noise for degenerate checks. Not a valid draw of any positive
    sigma schedule.
    """
    batch = () if n_samples is None else (n_samples,)
    latent_noise = {t: np.zeros(batch + (spec.d,)) for t in range(1, spec.T + 1)
                    if plan.mode(t).additive}
    param_noise = {t: np.zeros(batch + (spec.n_params,)) for t in plan.zo_steps}
    if x_T is None:
        x_T = np.zeros(spec.d) if spec.x_T is None else np.asarray(spec.x_T)
    x_T = np.broadcast_to(np.asarray(x_T, dtype=np.float64), batch + (spec.d,)).copy()
    return NoiseDraw(latent_noise, param_noise, x_T, 0, n_samples)

def _check_noise(plan: EstimatorPlan, noise: NoiseDraw):
    for t in range(1, plan.T + 1):
        store = noise.param_noise if plan.mode(t) is StepMode.ZO else noise.latent_noise
        if t not in store:
            raise ContractViolation(
                f'noise draw has no {plan.mode(t).value} noise for step {t}')

def forward_chain(
        spec: ChainSpec,
        plan: EstimatorPlan,
        params: np.ndarray,
        noise: NoiseDraw,
        strict: bool = True,
        retain_all: bool = False,
    ) -> Trajectory:
    """Simulates the chain from x_T down to x_0 and evaluates R(x_0).

    Parameters
    ----------
    spec : ChainSpec
        Chain definition.
    plan : EstimatorPlan
        Mode of every step; decides the noise mechanism and what is retained.
    params : numpy.ndarray
        Parameter vector theta of shape (p,).
    noise : NoiseDraw
        Noise matching `plan`.
    strict : bool
        When True a diverging latent raises `DivergenceError`. Otherwise the
        affected rows are set to NaN and reported in `Trajectory.diverged`.
    retain_all : bool
        Keep the input of every step, ZO steps included.

    Returns
    -------
    trajectory : Trajectory
        Latents, reward and retained step inputs.
    """
    if plan.T != spec.T:
        raise ContractViolation(f'plan has {plan.T} steps, chain has {spec.T}')
    _check_noise(plan, noise)
    params = spec.backbone.check_params(params)
    retained_steps = set(range(1, spec.T + 1)) if retain_all else\
        set(plan.retained_steps)

    x = spec.backbone.check_latent(noise.x_T, 'x_T')
    latents = np.empty((spec.T + 1,) + x.shape)
    latents[spec.T] = x
    retained = {}
    diverged = np.zeros(x.shape[:-1], dtype=bool)

    with np.errstate(over='ignore', invalid='ignore'):
        for t in range(spec.T, 0, -1):
            if t in retained_steps:
                retained[t] = x
            if plan.mode(t) is StepMode.ZO:
                x = spec.backbone.forward(params + noise.param_noise[t], x, t)
            else:
                x = spec.backbone.forward(params, x, t) + noise.latent_noise[t]

            bad = ~np.all(np.isfinite(x), axis=-1) |\
                (np.linalg.norm(x, axis=-1) > DIVERGENCE_THRESHOLD)
            if np.any(bad & ~diverged):
                if strict:
                    raise DivergenceError(t, bad if bad.ndim else None)
                logging.debug(f'{int(np.sum(bad & ~diverged))} rows diverged at step {t}')
                x = np.where(bad[..., None], np.nan, x)
                diverged |= bad
            latents[t - 1] = x

        reward_value = spec.reward.value(x)

    return Trajectory(
        latents,
        np.asarray(reward_value),
        retained,
        plan,
        noise,
        diverged if diverged.ndim else None,
    )

def gaussian_log_score(z: np.ndarray, sigma: float) -> np.ndarray:
    """Score of N(0, sigma^2 I) at z: -z / sigma^2."""
    if not sigma > 0:
        raise ContractViolation('sigma must be positive')
    return -np.asarray(z, dtype=np.float64) / sigma**2

def plan_cost(plan: EstimatorPlan, budget: BudgetModel) -> float:
    """Memory cost of a plan.

    Backpropagated steps (pathwise FO, HO-PATH) cost B_h each; perturbation
    steps (ZO, HO-SCORE, SCORE-RL) cost B_z each. A lone FO step at step 1
    rides on the reward backward pass and is free. Truncated plans cost
    B_h T'. For RLR plans this is B_h h + B_z (T - 1 - h).
    """
    if plan.truncation is not None:
        return budget.B_h * min(plan.truncation, plan.T)

    fo_steps = len(plan.steps(StepMode.PATHWISE_FO))
    if fo_steps == 1 and plan.mode(1) is StepMode.PATHWISE_FO:
        fo_steps = 0
    backprop_steps = fo_steps + len(plan.steps(StepMode.HO_PATH))
    perturb_steps = len(plan.zo_steps) + len(plan.steps(StepMode.HO_SCORE)) +\
        len(plan.steps(StepMode.SCORE_RL))
    return budget.B_h * backprop_steps + budget.B_z * perturb_steps

def frozen_noise_objective(
        spec: ChainSpec,
        plan: EstimatorPlan,
        noise: NoiseDraw,
    ) -> Callable[[np.ndarray], float]:
    """Returns theta -> mean R(x_0) with the noise held fixed, the
    deterministic function that finite differences are taken of.
    """
    def objective(params: np.ndarray) -> float:
        trajectory = forward_chain(spec, plan, params, noise)
        return float(np.mean(trajectory.reward_value))
    return objective

def dump_trajectory(trajectory: Trajectory, path: Union[str, Path]):
    """Writes x_T ... x_0 as text, one latent per line (batches flattened
    row by row).
    """
    lines = []
    for t in range(trajectory.latents.shape[0] - 1, -1, -1):
        latent = trajectory.latents[t].reshape(-1, trajectory.latents.shape[-1])
        for row in latent:
            lines.append(' '.join(f'{v:.17g}' for v in row))
    Path(path).write_text('\n'.join(lines) + '\n')

