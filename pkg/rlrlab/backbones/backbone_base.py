# -*- coding: utf-8 -*-

# File: backbone_base.py

"""This module contains the abstract class BackboneBase which all backbones
inherit.

A backbone is the shared parametric map phi(x; theta) applied at every step
of the chain. Parameters travel as flat float64 vectors ("ParamVector") with
a fixed layout: for every layer its weight matrix row-major, then its bias.
All operations accept leading batch dimensions on latents, cotangents and
parameter vectors.
"""

import abc
from dataclasses import dataclass
from typing import ClassVar, Dict, List, Tuple
import numpy as np
from ..exceptions import ContractViolation

Layout = List[Tuple[str, Tuple[int, ...]]]

@dataclass(frozen=True)
class BackboneBase(abc.ABC):
    """All backbone classes must inherit this class, define `kind` and
    `layout` and implement `forward`, `vjp_x` and `vjp_theta`. For use from
    configuration files the class must also be added to `BackboneEnum`.

    Attributes
    ----------
    d : int
        Latent dimension.
    m : int
        Hidden width (ignored by backbones without a hidden layer).
    time_conditioning : bool
        When set, the scalar t/horizon is appended to the input.
    horizon : int
        Chain length used to scale the time input.
    """
    d: int
    m: int = 0
    time_conditioning: bool = False
    horizon: int = 1

    kind: ClassVar[str] = ''
    kind_code: ClassVar[int] = 0

    def __post_init__(self):
        if self.d < 1:
            raise ContractViolation('latent dimension d must be positive')
        if self.horizon < 1:
            raise ContractViolation('horizon must be positive')

    @property
    def input_dim(self) -> int:
        return self.d + (1 if self.time_conditioning else 0)

    @property
    @abc.abstractmethod
    def layout(self) -> Layout:
        """Names and shapes of the parameter blocks in storage order."""

    @property
    def n_params(self) -> int:
        return int(sum(np.prod(shape) for _, shape in self.layout))

    def unflatten(self, params: np.ndarray) -> Dict[str, np.ndarray]:
        """Splits a (batched) parameter vector into named blocks.

        Parameters
        ----------
        params : numpy.ndarray
            Array of shape (..., p).

        Returns
        -------
        blocks : Dict[str, numpy.ndarray]
            Views of shape (..., *block_shape) in layout order.
        """
        params = self.check_params(params)
        batch = params.shape[:-1]
        blocks = {}
        offset = 0
        for name, shape in self.layout:
            size = int(np.prod(shape))
            blocks[name] = params[..., offset:offset + size].reshape(batch + shape)
            offset += size
        return blocks

    def flatten(self, blocks: Dict[str, np.ndarray]) -> np.ndarray:
        """Inverse of `unflatten`. Blocks may carry broadcastable batch
        dimensions; the result has their common batch shape.
        """
        batch = np.broadcast_shapes(*[
            np.shape(blocks[name])[:np.ndim(blocks[name]) - len(shape)]
            for name, shape in self.layout
        ])
        parts = [
            np.broadcast_to(blocks[name], batch + shape).reshape(batch + (-1,))
            for name, shape in self.layout
        ]
        return np.concatenate(parts, axis=-1).astype(np.float64)

    def check_params(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=np.float64)
        if params.ndim == 0 or params.shape[-1] != self.n_params:
            raise ContractViolation(
                f'{self.kind}: expected {self.n_params} parameters, got '+
                f'shape {params.shape}')
        return params

    def check_latent(self, x: np.ndarray, name: str = 'x') -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 0 or x.shape[-1] != self.d:
            raise ContractViolation(
                f'{self.kind}: {name} must have last dimension {self.d}, got '+
                f'shape {x.shape}')
        return x

    def backbone_input(self, x: np.ndarray, t: int) -> np.ndarray:
        """Appends the time feature t/horizon when time conditioning is on."""
        if not self.time_conditioning:
            return x
        tau = np.full(x.shape[:-1] + (1,), t / self.horizon)
        return np.concatenate([x, tau], axis=-1)

    def init_params(self, seed: int = 0, scale: float = 0.5) -> np.ndarray:
        """Draws a parameter vector: weights from N(0, scale^2 / fan_in),
        biases from N(0, (0.1 scale)^2).
        """
        rng = np.random.default_rng(seed)
        blocks = {}
        for name, shape in self.layout:
            if len(shape) == 2:
                blocks[name] = rng.normal(0.0, scale / np.sqrt(shape[1]), shape)
            else:
                blocks[name] = rng.normal(0.0, 0.1 * scale, shape)
        return self.flatten(blocks)

    @abc.abstractmethod
    def forward(self, params: np.ndarray, x: np.ndarray, t: int) -> np.ndarray:
        raise NotImplementedError('Inherited backbone must implement this function')

    @abc.abstractmethod
    def vjp_x(
            self,
            params: np.ndarray,
            x: np.ndarray,
            t: int,
            v: np.ndarray,
        ) -> np.ndarray:
        raise NotImplementedError('Inherited backbone must implement this function')

    @abc.abstractmethod
    def vjp_theta(
            self,
            params: np.ndarray,
            x: np.ndarray,
            t: int,
            v: np.ndarray,
        ) -> np.ndarray:
        raise NotImplementedError('Inherited backbone must implement this function')
