# -*- coding: utf-8 -*-

# File: diff_utils.py

"""This module contains differentiation and parameter I/O utility functions:
the central finite-difference oracle and the parameter vector formats.
"""

import struct
from pathlib import Path
from typing import Callable, Tuple, Union
import numpy as np
from .backbones import BackboneBase, BackboneEnum
from .exceptions import ContractViolation, OracleFailure

PARAM_MAGIC = b'RLRPARAM'
# magic, kind code, d, m, flags, horizon
PARAM_HEADER = struct.Struct('<8sBHHBH')
FLAG_TIME_CONDITIONING = 0x01

def fd_gradient(
        scalar_fn: Callable[[np.ndarray], float],
        point: np.ndarray,
        step: float = 1e-5,
    ) -> np.ndarray:
    """Central finite differences of `scalar_fn` at `point`, one coordinate at
    a time: (f(x + eps e_i) - f(x - eps e_i)) / 2 eps.

    Parameters
    ----------
    scalar_fn : Callable
        Function of a real vector returning a real number.
    point : numpy.ndarray
        Point of evaluation.
    step : float
        Difference step eps, must be positive.

    Returns
    -------
    grad : numpy.ndarray
        Finite-difference gradient with the shape of `point`.
    """
    if step <= 0:
        raise ContractViolation('finite-difference step must be positive')

    point = np.asarray(point, dtype=np.float64)
    flat = point.ravel()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        shifted = flat.copy()
        shifted[i] = flat[i] + step
        f_plus = float(scalar_fn(shifted.reshape(point.shape)))
        shifted[i] = flat[i] - step
        f_minus = float(scalar_fn(shifted.reshape(point.shape)))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise OracleFailure(
                f'non-finite function value at coordinate {i}')
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad.reshape(point.shape)

def params_to_bytes(backbone: BackboneBase, params: np.ndarray) -> bytes:
    """Serializes a parameter vector as a 16-byte RLRPARAM header followed by
    little-endian float64 values.
    """
    params = backbone.check_params(params)
    if params.ndim != 1:
        raise ContractViolation('only a single parameter vector can be serialized')
    if not np.all(np.isfinite(params)):
        raise ContractViolation('parameter vector contains non-finite values')

    flags = FLAG_TIME_CONDITIONING if backbone.time_conditioning else 0
    header = PARAM_HEADER.pack(
        PARAM_MAGIC,
        backbone.kind_code,
        backbone.d,
        backbone.m,
        flags,
        backbone.horizon,
    )
    return header + params.astype('<f8').tobytes()

def params_from_bytes(data: bytes) -> Tuple[BackboneBase, np.ndarray]:
    """Inverse of `params_to_bytes`.

    Returns
    -------
    backbone : BackboneBase
        Backbone rebuilt from the header.
    params : numpy.ndarray
        The parameter vector.
    """
    if len(data) < PARAM_HEADER.size:
        raise ContractViolation('parameter blob is shorter than its header')

    magic, code, d, m, flags, horizon = PARAM_HEADER.unpack_from(data)
    if magic != PARAM_MAGIC:
        raise ContractViolation('not an RLRPARAM blob')

    backbone_class = BackboneEnum.from_code(code).value
    backbone = backbone_class(
        d=d,
        m=m,
        time_conditioning=bool(flags & FLAG_TIME_CONDITIONING),
        horizon=horizon,
    )
    params = np.frombuffer(data, dtype='<f8', offset=PARAM_HEADER.size)
    if params.size != backbone.n_params:
        raise ContractViolation(
            f'blob holds {params.size} values, backbone expects '+
            f'{backbone.n_params}')
    return backbone, params.astype(np.float64)

def params_to_text(params: np.ndarray) -> str:
    """One value per line, 17 significant digits."""
    return ''.join(f'{value:.17g}\n' for value in np.ravel(params))

def params_from_text(text: str) -> np.ndarray:
    return np.array(
        [float(line) for line in text.splitlines() if line.strip()],
        dtype=np.float64)

def save_params(
        path: Union[str, Path],
        backbone: BackboneBase,
        params: np.ndarray,
        with_text: bool = False,
    ):
    path = Path(path)
    path.write_bytes(params_to_bytes(backbone, params))
    if with_text:
        path.with_suffix('.txt').write_text(params_to_text(params))

def load_params(path: Union[str, Path]) -> Tuple[BackboneBase, np.ndarray]:
    return params_from_bytes(Path(path).read_bytes())
