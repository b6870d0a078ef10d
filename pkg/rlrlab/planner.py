# -*- coding: utf-8 -*-

# File: planner.py

"""This module contains the budget planner for the HO block length h and the
samplers for the HO block start j.

The planner minimizes the quadratic variance bound
Q(h) = a (h + 1)^2 + b (h + 1) + c subject to the memory budget
B_h h + B_z (T - 1 - h) <= B.
"""

import logging
import dataclasses
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import floor
from typing import NamedTuple, Optional, Sequence, Tuple
import numpy as np
import pandas as pd
import scipy.special
from .chain import BudgetModel, EstimatorPlan, plan_cost
from .exceptions import ContractViolation, SamplerConfigurationError

# floor() boundary nudge of solve_h_star
FLOOR_NUDGE = Fraction(1, 10**9)
_SEED_MASK = (1 << 64) - 1
# spawn key of the j draw, separate from the noise streams of the chain
_J_SPAWN_KEY = 1
# fixed recommendation for mid-range budgets, reported next to h*
RULE_OF_THUMB_H = 2
RULE_OF_THUMB_BUDGETS = (30.0, 40.0)

@dataclass(frozen=True)
class VarianceProfile:
    """Per-step deviation magnitude of backpropagated steps (V_h) and of
    perturbation steps (V_z).
    """
    V_h: float
    V_z: float

    def __post_init__(self):
        if self.V_h < 0 or not self.V_z > 0:
            raise ContractViolation('variance profile needs V_h >= 0 and V_z > 0')
        if not self.V_h < self.V_z:
            raise ContractViolation('variance profile needs V_h < V_z')
        if self.V_h > 0.5 * self.V_z:
            logging.warning(
                f'V_h = {self.V_h} exceeds half of V_z = {self.V_z}, the planner '+
                'assumes V_h << V_z')

def q_coefficients(T: int, profile: VarianceProfile) -> Tuple[float, float, float]:
    V_h, V_z = profile.V_h, profile.V_z
    a = (V_h - V_z)**2
    b = -2.0 * T * V_z * (V_z - V_h)
    c = T**2 * V_z**2
    return a, b, c

def variance_bound_q(h: int, T: int, profile: VarianceProfile) -> float:
    """Quadratic upper bound on the variance of an RLR estimator with an HO
    block of length h, i.e. ((h + 1) V_h + (T - 1 - h) V_z)^2 up to the
    constant term.
    """
    if not 0 <= h <= T - 1:
        raise ContractViolation(f'h must lie in [0, {T - 1}], got {h}')
    a, b, c = q_coefficients(T, profile)
    n = h + 1
    return a * n**2 + b * n + c

class HStar(NamedTuple):
    """Planner result. `binding` names the term that decided h: 'budget',
    'variance' or 'chain-length'.
    """
    h: int
    binding: str
    budget_term: int
    variance_term: int
    vertex: float
    unconstrained: float

def _exact(value: float) -> Fraction:
    # shortest decimal repr, so 0.24 becomes 6/25
    return Fraction(repr(float(value)))

def _nudged_floor(value: Fraction) -> int:
    return floor(value + FLOOR_NUDGE)

def solve_h_star(budget: BudgetModel, T: int, profile: VarianceProfile) -> HStar:
    """Largest useful HO block length under the budget:

        h* = min( floor((B - B_z (T - 1)) / (B_h - B_z)),
                  floor(T V_z / (2 (V_z - V_h)) - 1) )

    Evaluated on rationals; values within 1e-9 below an integer round up to
    it. Degenerate budgets give h = 0 with a warning. h is also capped at
    T - 2, the longest block that still starts at step 2.

    Parameters
    ----------
    budget : BudgetModel
        Memory costs and total budget.
    T : int
        Chain length.
    profile : VarianceProfile
        Per-step deviation magnitudes.

    Returns
    -------
    result : HStar
        h*, the binding term, both terms, the vertex of Q and the
        unconstrained minimizer of the variance term.

    Examples
    --------
    >>> from rlrlab.chain import BudgetModel
    >>> from rlrlab.planner import VarianceProfile, solve_h_star
    >>> solve_h_star(BudgetModel(8, 0.24, 30), 50, VarianceProfile(0, 1)).h
    2
    """
    B, B_h, B_z = _exact(budget.B), _exact(budget.B_h), _exact(budget.B_z)
    V_h, V_z = _exact(profile.V_h), _exact(profile.V_z)

    budget_term = _nudged_floor((B - B_z * (T - 1)) / (B_h - B_z))
    unconstrained = T * V_z / (2 * (V_z - V_h)) - 1
    variance_term = _nudged_floor(unconstrained)
    vertex = T * V_z / (V_z - V_h) - 1

    if budget_term <= variance_term:
        h, binding = budget_term, 'budget'
    else:
        h, binding = variance_term, 'variance'

    if h <= 0:
        logging.warning(f'h* = {h} ({binding} term) for B = {budget.B}, T = {T}, using h = 0')
        h = 0
    if h > T - 2:
        logging.warning(f'h* = {h} does not fit a chain of {T} steps, using {max(T - 2, 0)}')
        h, binding = max(T - 2, 0), 'chain-length'

    return HStar(h, binding, budget_term, variance_term, float(vertex),
                 float(unconstrained))

def rule_of_thumb_h(budget: BudgetModel) -> Optional[int]:
    """h = 2 for budgets in [30, 40], otherwise None. At B = 40 the formula of
    `solve_h_star` gives 3, so both values are reported.
    """
    low, high = RULE_OF_THUMB_BUDGETS
    return RULE_OF_THUMB_H if low <= budget.B <= high else None

def q_table(budget: BudgetModel, T: int, profile: VarianceProfile) -> pd.DataFrame:
    """Q(h) and the plan cost for every h whose RLR plan fits the budget."""
    rows = []
    for h in range(0, max(T - 1, 1)):
        cost = plan_cost(EstimatorPlan.rlr(T, 2, h), budget)
        if cost <= budget.B:
            rows.append({'h': h, 'Q': variance_bound_q(h, T, profile), 'cost': cost})
    return pd.DataFrame(rows, columns=['h', 'Q', 'cost'])

class JPolicy(Enum):
    uniform = 'uniform'
    softmax_gradnorm = 'softmax-gradnorm'
    windowed_uniform = 'windowed-uniform'

    @classmethod
    def from_name(cls, name: str) -> 'JPolicy':
        for member in cls:
            if member.value == name:
                return member
        raise SamplerConfigurationError(f'unknown j policy: {name}')

def build_j_weights(
        norm_history: Sequence[float],
        h: int,
        temperature: float = 1.0,
        T: Optional[int] = None,
    ) -> np.ndarray:
    """Softmax of gradient norms over the HO block starts j = 2, 3, ...

    Parameters
    ----------
    norm_history : Sequence[float]
        Entry k is the norm estimate of step k + 2.
    h : int
        HO block length.
    temperature : float
        Softmax temperature tau.
    T : int | None
        Chain length. When given, the support is {2, ..., T - h} and only the
        first T - h - 1 entries are used; otherwise every entry is.

    Returns
    -------
    weights : numpy.ndarray
        Probabilities of j = 2, 3, ... in order.
    """
    norms = np.asarray(norm_history, dtype=np.float64)
    if T is not None:
        size = T - h - 1
        if size < 1:
            raise SamplerConfigurationError(f'no valid j for T = {T}, h = {h}')
        if norms.size < size:
            raise ContractViolation(
                f'norm history has {norms.size} entries, {size} needed')
        norms = norms[:size]
    if norms.size == 0:
        raise SamplerConfigurationError('empty norm history')
    if not np.all(np.isfinite(norms)) or np.any(norms < 0):
        raise ContractViolation('norm history must be finite and non-negative')
    if not temperature > 0:
        raise ContractViolation('temperature must be positive')
    return scipy.special.softmax(norms / temperature)

@dataclass(frozen=True)
class JSampler:
    """Policy for the start j of the HO block.

    The softmax policy without a history (the first training iteration)
    samples uniformly. The windowed policy restricts j to [a, b].
    """
    policy: JPolicy = JPolicy.uniform
    norm_history: Optional[Tuple[float, ...]] = None
    temperature: float = 1.0
    window: Optional[Tuple[int, int]] = None

    def with_history(self, norm_history: Sequence[float]) -> 'JSampler':
        return dataclasses.replace(
            self, norm_history=tuple(float(n) for n in norm_history))

    def check(self, T: int, h: int):
        if self.policy is JPolicy.windowed_uniform:
            if self.window is None:
                raise SamplerConfigurationError('windowed policy needs a window')
            a, b = self.window
            if not (1 < a < b < T - h and b - a > h):
                raise SamplerConfigurationError(
                    f'window [{a}, {b}] violates 1 < a < b < T - h = {T - h}, '+
                    f'b - a > h = {h}')
        if not self.temperature > 0:
            raise SamplerConfigurationError('temperature must be positive')

    def support(self, T: int, h: int, allow_j1: bool = False) -> np.ndarray:
        self.check(T, h)
        if self.policy is JPolicy.windowed_uniform:
            a, b = self.window
            return np.arange(a, min(b, T - h) + 1)
        first = 1 if allow_j1 and self.policy is JPolicy.uniform else 2
        if T - h < first:
            raise SamplerConfigurationError(f'no valid j for T = {T}, h = {h}')
        return np.arange(first, T - h + 1)

    def probabilities(self, T: int, h: int, allow_j1: bool = False) -> np.ndarray:
        support = self.support(T, h, allow_j1)
        if self.policy is JPolicy.softmax_gradnorm and self.norm_history is not None:
            return build_j_weights(self.norm_history, h, self.temperature, T)
        return np.full(support.size, 1.0 / support.size)

def j_stream(seed: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=(_J_SPAWN_KEY,)))

def sample_j(
        sampler: JSampler,
        h: int,
        T: int,
        seed: int,
        allow_j1: bool = False,
    ) -> int:
    """Draws the HO block start j; reproducible for a fixed seed."""
    support = sampler.support(T, h, allow_j1)
    p = sampler.probabilities(T, h, allow_j1)
    return int(j_stream(seed).choice(support, p=p))

def sample_j_many(
        sampler: JSampler,
        h: int,
        T: int,
        seed: int,
        n: int,
        allow_j1: bool = False,
    ) -> np.ndarray:
    """`n` independent draws of j from one seed."""
    support = sampler.support(T, h, allow_j1)
    p = sampler.probabilities(T, h, allow_j1)
    return j_stream(seed).choice(support, size=n, p=p)
