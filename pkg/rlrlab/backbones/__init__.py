# -*- coding: utf-8 -*-

# File: __init__.py

"""This module contains the BackboneEnum class which maps the backbone classes
to their configuration names, and the functional forms of the backbone
operations.
"""

from enum import Enum as _Enum
import numpy as np
from .backbone_base import BackboneBase
from .linear_affine import LinearAffine
from .mlp_tanh import MLPTanh
from ..exceptions import ContractViolation

class BackboneEnum(_Enum):
    """This enum contains implemented backbones.
    """
    linear_affine = LinearAffine
    mlp_tanh = MLPTanh

    @classmethod
    def from_kind(cls, kind: str) -> 'BackboneEnum':
        for member in cls:
            if member.value.kind == kind:
                return member
        raise ContractViolation(f'unknown backbone kind: {kind}')

    @classmethod
    def from_code(cls, code: int) -> 'BackboneEnum':
        for member in cls:
            if member.value.kind_code == code:
                return member
        raise ContractViolation(f'unknown backbone code: {code}')

def backbone_forward(
        backbone: BackboneBase,
        params: np.ndarray,
        x: np.ndarray,
        t: int,
    ) -> np.ndarray:
    """Evaluates phi(x; theta) at step t. No noise is applied here."""
    return backbone.forward(params, x, t)

def backbone_vjp_x(backbone: BackboneBase, params, x, t, v) -> np.ndarray:
    """Returns v^T d phi / d x."""
    return backbone.vjp_x(params, x, t, v)

def backbone_vjp_theta(backbone: BackboneBase, params, x, t, v) -> np.ndarray:
    """Returns v^T d phi / d theta as a parameter-space vector."""
    return backbone.vjp_theta(params, x, t, v)
