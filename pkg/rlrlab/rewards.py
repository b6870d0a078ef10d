# -*- coding: utf-8 -*-

# File: rewards.py

"""This module contains the reward functions R(x_0) evaluated at the end of
the chain, with their exact analytic gradients.
"""

import abc
from enum import Enum as _Enum
from typing import Optional, Sequence
import numpy as np
from .exceptions import ContractViolation

class RewardBase(abc.ABC):
    """All reward classes must inherit this class and implement `value` and
    `grad`. Both accept latents of shape (..., d).
    """
    kind = ''

    def __init__(self, d: int):
        self.d = d

    def check(self, x0: np.ndarray) -> np.ndarray:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.ndim == 0 or x0.shape[-1] != self.d:
            raise ContractViolation(
                f'{self.kind}: expected latent dimension {self.d}, got shape '+
                f'{x0.shape}')
        return x0

    @abc.abstractmethod
    def value(self, x0: np.ndarray) -> np.ndarray:
        raise NotImplementedError('Inherited reward must implement this function')

    @abc.abstractmethod
    def grad(self, x0: np.ndarray) -> np.ndarray:
        raise NotImplementedError('Inherited reward must implement this function')

class NegQuadratic(RewardBase):
    """R(x) = -||x - x*||^2"""
    kind = 'neg-quadratic'

    def __init__(self, target: Sequence[float]):
        self.target = np.asarray(target, dtype=np.float64)
        super().__init__(self.target.size)

    def value(self, x0):
        return -np.sum((self.check(x0) - self.target)**2, axis=-1)

    def grad(self, x0):
        return -2.0 * (self.check(x0) - self.target)

class Rosenbrock2D(RewardBase):
    """Negated Rosenbrock function, R(x) = -((a - x1)^2 + b (x2 - x1^2)^2)."""
    kind = 'rosenbrock-2d'

    def __init__(self, a: float = 1.0, b: float = 100.0):
        super().__init__(2)
        self.a = a
        self.b = b

    def value(self, x0):
        x0 = self.check(x0)
        x1, x2 = x0[..., 0], x0[..., 1]
        return -((self.a - x1)**2 + self.b * (x2 - x1**2)**2)

    def grad(self, x0):
        x0 = self.check(x0)
        x1, x2 = x0[..., 0], x0[..., 1]
        g1 = 2.0 * (self.a - x1) + 4.0 * self.b * x1 * (x2 - x1**2)
        g2 = -2.0 * self.b * (x2 - x1**2)
        return np.stack([g1, g2], axis=-1)

class RandomMLPScore(RewardBase):
    """Frozen random scorer R(x) = w2 . tanh(W1 x + b1) + b2 standing in for a
    learned reward model.
    """
    kind = 'random-mlp-score'

    def __init__(self, d: int, seed: int = 7, hidden: int = 16):
        super().__init__(d)
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.W1 = rng.normal(0.0, 1.0 / np.sqrt(d), (hidden, d))
        self.b1 = rng.normal(0.0, 0.1, hidden)
        self.w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), hidden)
        self.b2 = float(rng.normal(0.0, 0.1))

    def value(self, x0):
        hidden = np.tanh(self.check(x0) @ self.W1.T + self.b1)
        return hidden @ self.w2 + self.b2

    def grad(self, x0):
        hidden = np.tanh(self.check(x0) @ self.W1.T + self.b1)
        return ((1.0 - hidden**2) * self.w2) @ self.W1

class Constant(RewardBase):
    """Reward that ignores x_0. With value 0 every score term vanishes."""
    kind = 'constant'

    def __init__(self, d: int, value: float = 0.0):
        super().__init__(d)
        self.constant = value

    def value(self, x0):
        return np.full(self.check(x0).shape[:-1], self.constant)

    def grad(self, x0):
        return np.zeros_like(self.check(x0))

class RewardEnum(_Enum):
    """This enum contains implemented reward functions.
    """
    neg_quadratic = NegQuadratic
    rosenbrock_2d = Rosenbrock2D
    random_mlp_score = RandomMLPScore
    constant = Constant

    @classmethod
    def from_kind(cls, kind: str) -> 'RewardEnum':
        for member in cls:
            if member.value.kind == kind:
                return member
        raise ContractViolation(f'unknown reward kind: {kind}')

def make_reward(
        kind: str,
        d: int,
        target: Optional[Sequence[float]] = None,
        seed: int = 7,
    ) -> RewardBase:
    """Builds a reward from its configuration name."""
    reward_class = RewardEnum.from_kind(kind).value
    if reward_class is NegQuadratic:
        target = np.zeros(d) if target is None else np.asarray(target, dtype=np.float64)
        if target.size != d:
            raise ContractViolation(f'target must have {d} entries')
        return NegQuadratic(target)
    if reward_class is Rosenbrock2D:
        if d != 2:
            raise ContractViolation('rosenbrock-2d requires d = 2')
        return Rosenbrock2D()
    if reward_class is RandomMLPScore:
        return RandomMLPScore(d, seed)
    return Constant(d)

def reward_grad(reward: RewardBase, x0: np.ndarray) -> np.ndarray:
    """Exact gradient dR/dx_0."""
    return reward.grad(x0)
