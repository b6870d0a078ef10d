# -*- coding: utf-8 -*-

# File: mlp_tanh.py

"""This module contains the one-hidden-layer tanh MLP backbone
phi(x) = W2 tanh(W1 u + b1) + b2.
"""

from dataclasses import dataclass
from typing import ClassVar, Tuple
import numpy as np
from .backbone_base import BackboneBase, Layout
from ..exceptions import ContractViolation

@dataclass(frozen=True)
class MLPTanh(BackboneBase):
    """Smooth nonlinear backbone. The VJPs are hand-written reverse passes
    through the two layers.
    """
    kind: ClassVar[str] = 'mlp-tanh'
    kind_code: ClassVar[int] = 2

    def __post_init__(self):
        super().__post_init__()
        if self.m < 1:
            raise ContractViolation('mlp-tanh requires a positive hidden width m')

    @property
    def layout(self) -> Layout:
        return [
            ('W1', (self.m, self.input_dim)),
            ('b1', (self.m,)),
            ('W2', (self.d, self.m)),
            ('b2', (self.d,)),
        ]

    def _hidden(self, blocks, u) -> Tuple[np.ndarray, np.ndarray]:
        pre = np.einsum('...ij,...j->...i', blocks['W1'], u) + blocks['b1']
        return pre, np.tanh(pre)

    def _hidden_cotangent(self, blocks, hidden, v) -> np.ndarray:
        # d tanh(a) / da = 1 - tanh(a)^2
        dh = np.einsum('...ij,...i->...j', blocks['W2'], v)
        return dh * (1.0 - hidden**2)

    def forward(self, params, x, t):
        blocks = self.unflatten(params)
        u = self.backbone_input(self.check_latent(x), t)
        _, hidden = self._hidden(blocks, u)
        return np.einsum('...ij,...j->...i', blocks['W2'], hidden) + blocks['b2']

    def vjp_x(self, params, x, t, v):
        blocks = self.unflatten(params)
        u = self.backbone_input(self.check_latent(x), t)
        v = self.check_latent(v, 'v')
        _, hidden = self._hidden(blocks, u)
        da = self._hidden_cotangent(blocks, hidden, v)
        return np.einsum('...ij,...i->...j', blocks['W1'], da)[..., :self.d]

    def vjp_theta(self, params, x, t, v):
        params = self.check_params(params)
        blocks = self.unflatten(params)
        u = self.backbone_input(self.check_latent(x), t)
        v = self.check_latent(v, 'v')
        _, hidden = self._hidden(blocks, u)
        da = self._hidden_cotangent(blocks, hidden, v)
        grad = self.flatten({
            'W1': da[..., :, None] * u[..., None, :],
            'b1': da,
            'W2': v[..., :, None] * hidden[..., None, :],
            'b2': v,
        })
        batch = np.broadcast_shapes(grad.shape[:-1], params.shape[:-1])
        return np.broadcast_to(grad, batch + (self.n_params,)).copy()
