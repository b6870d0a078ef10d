# -*- coding: utf-8 -*-

# File: __init__.py

"""This module contains the EstimatorEnum class which maps the estimator
classes to their configuration names.
"""

from enum import Enum as _Enum
from .estimator_base import (
    EstimatorBase, GradientEstimate, estimate_samples, grad_pathwise_reference,
    reverse_sweep
)
from .plan_validation import validate_plan
from .full_bp import FullBP, grad_full_bp
from .truncated_bp import (
    RandomizedTruncatedBP, TruncatedBP, grad_truncated_bp, scalar_chain_bias,
    scalar_chain_expected_bias, truncation_bias, truncation_bias_samples
)
from .score_rl import ScoreRL, grad_score_rl
from .rlr import (
    RLR, RLRNoHO, RLRNoZO, composite_estimate, grad_fo_term, grad_ho_term,
    grad_rlr, grad_zo_term
)
from .pure_zo import PureZO, grad_pure_zo
from ..exceptions import ContractViolation

class EstimatorEnum(_Enum):
    """This enum contains implemented estimators.
    """
    full_bp = FullBP
    truncated_bp = TruncatedBP
    randomized_truncated_bp = RandomizedTruncatedBP
    score_rl = ScoreRL
    pure_zo = PureZO
    rlr = RLR
    rlr_no_zo = RLRNoZO
    rlr_no_ho = RLRNoHO

    @classmethod
    def from_kind(cls, kind: str) -> 'EstimatorEnum':
        for member in cls:
            if member.value.kind == kind:
                return member
        raise ContractViolation(f'unknown estimator kind: {kind}')

def make_estimator(
        kind: str,
        spec,
        budget=None,
        h: int = 2,
        sampler=None,
        T_prime: int = 1,
        allow_j1: bool = False,
    ) -> EstimatorBase:
    """Builds an estimator from its configuration name. Arguments that the
    estimator kind does not take are ignored. Randomized truncation reads
    `T_prime` as T_max, with 1 standing for T.
    """
    estimator_class = EstimatorEnum.from_kind(kind).value
    if issubclass(estimator_class, RLR):
        return estimator_class(spec, h, sampler, budget, allow_j1)
    if estimator_class is TruncatedBP:
        return TruncatedBP(spec, T_prime, budget)
    if estimator_class is RandomizedTruncatedBP:
        return RandomizedTruncatedBP(spec, T_prime if T_prime > 1 else None, budget)
    return estimator_class(spec, budget)
