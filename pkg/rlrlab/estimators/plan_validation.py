# -*- coding: utf-8 -*-

# File: plan_validation.py

"""This module contains the structural check of RLR plans: FO at step 1, one
contiguous HO block [j, j + h] with 2 <= j and ZO at every other step.
"""

from typing import Optional
from ..chain import BudgetModel, ChainSpec, EstimatorPlan, StepMode, plan_cost
from ..exceptions import (
    BudgetExceeded, FONotAtStart, NonContiguousHO, OutOfRange, OverlapWithFO,
    StepModeMismatch
)

HO_MODES = (StepMode.HO_SCORE, StepMode.HO_PATH)

def validate_plan(
        plan: EstimatorPlan,
        spec: ChainSpec,
        allow_j1: bool = False,
        budget: Optional[BudgetModel] = None,
    ):
    """Raises the error of the first violated constraint, returns None for an
    admissible plan.

    Parameters
    ----------
    plan : EstimatorPlan
        Plan to check.
    spec : ChainSpec
        Chain the plan is meant for.
    allow_j1 : bool
        Let the HO block start at step 1, replacing the FO term.
    budget : BudgetModel | None
        When given, the plan cost must not exceed `budget.B`.
    """
    T = spec.T
    if plan.T != T:
        raise OutOfRange(f'plan has {plan.T} steps, chain has {T}')
    if T < 3:
        raise OutOfRange(f'RLR plans need T >= 3, got T = {T}')
    ho_steps = [t for t in range(1, T + 1) if plan.mode(t) in HO_MODES]
    if 1 in ho_steps and not allow_j1:
        raise OverlapWithFO('HO block overlaps the FO step at step 1')
    if plan.mode(1) is not StepMode.PATHWISE_FO and 1 not in ho_steps:
        raise FONotAtStart(f'step 1 has mode {plan.mode(1).value}')
    if not ho_steps:
        raise NonContiguousHO('plan has no HO block')
    if ho_steps != list(range(ho_steps[0], ho_steps[-1] + 1)):
        raise NonContiguousHO(f'HO steps {ho_steps} are not contiguous')
    if plan.h < 0 or plan.j < 1 or plan.j + plan.h > T:
        raise OutOfRange(
            f'HO block [{plan.j}, {plan.j + plan.h}] does not fit in 1..{T}')
    if (ho_steps[0], len(ho_steps) - 1) != (plan.j, plan.h):
        raise StepModeMismatch(
            f'HO block at steps {ho_steps} does not match j = {plan.j}, h = {plan.h}')
    if plan.mode(plan.j) is not StepMode.HO_SCORE or\
            plan.steps(StepMode.HO_SCORE) != (plan.j,):
        raise StepModeMismatch(f'the score of the HO block must sit at step {plan.j}')

    for t in range(2, T + 1):
        if t not in ho_steps and plan.mode(t) is not StepMode.ZO:
            raise StepModeMismatch(
                f'step {t} outside the HO block has mode {plan.mode(t).value}')

    if budget is not None:
        cost = plan_cost(plan, budget)
        if cost > budget.B:
            raise BudgetExceeded(f'plan cost {cost:g} exceeds the budget {budget.B:g}')
