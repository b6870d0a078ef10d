# -*- coding: utf-8 -*-

# File: linear_affine.py

"""This module contains the linear-affine backbone phi(x) = W u + b, where u
is the latent optionally extended by the time feature.
"""

from dataclasses import dataclass
from typing import ClassVar
import numpy as np
from .backbone_base import BackboneBase, Layout

@dataclass(frozen=True)
class LinearAffine(BackboneBase):
    """Affine map with closed-form Jacobians.

    Examples
    --------
    >>> import numpy as np
    >>> from rlrlab.backbones import LinearAffine
    >>> backbone = LinearAffine(d=2)
    >>> params = backbone.identity_params()
    >>> backbone.forward(params, np.array([1.0, -2.0]), t=1)
    array([ 1., -2.])
    """
    kind: ClassVar[str] = 'linear-affine'
    kind_code: ClassVar[int] = 1

    @property
    def layout(self) -> Layout:
        return [('W', (self.d, self.input_dim)), ('b', (self.d,))]

    def identity_params(self) -> np.ndarray:
        """Parameters of the identity map: W = [I | 0], b = 0."""
        W = np.zeros((self.d, self.input_dim))
        W[:, :self.d] = np.eye(self.d)
        return self.flatten({'W': W, 'b': np.zeros(self.d)})

    def forward(self, params, x, t):
        blocks = self.unflatten(params)
        u = self.backbone_input(self.check_latent(x), t)
        return np.einsum('...ij,...j->...i', blocks['W'], u) + blocks['b']

    def vjp_x(self, params, x, t, v):
        blocks = self.unflatten(params)
        self.check_latent(x)
        v = self.check_latent(v, 'v')
        W = blocks['W'][..., :self.d]
        out = np.einsum('...ij,...i->...j', W, v)
        batch = np.broadcast_shapes(out.shape[:-1], np.shape(x)[:-1])
        return np.broadcast_to(out, batch + (self.d,)).copy()

    def vjp_theta(self, params, x, t, v):
        params = self.check_params(params)
        u = self.backbone_input(self.check_latent(x), t)
        v = self.check_latent(v, 'v')
        grad = self.flatten({
            'W': v[..., :, None] * u[..., None, :],
            'b': v,
        })
        batch = np.broadcast_shapes(grad.shape[:-1], params.shape[:-1])
        return np.broadcast_to(grad, batch + (self.n_params,)).copy()
