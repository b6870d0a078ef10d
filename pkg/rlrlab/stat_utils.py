# -*- coding: utf-8 -*-

# File: stat_utils.py

"""This module contains statistic utility functions: streaming Monte Carlo
moments with an associative merge, the seeded Monte Carlo meter and the
helpers the acceptance checks are built from.
"""

import logging
import multiprocessing as mp
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Union
import numpy as np
import pandas as pd
import scipy.stats
from .exceptions import ContractViolation, MeterFailure

# rows per thunk call
DEFAULT_CHUNK = 4096

@dataclass
class MCStats:
    """Running mean and sum of squared deviations of vector samples.

    Attributes
    ----------
    n_samples : int
        Number of finite samples accumulated.
    mean : numpy.ndarray
        Per-coordinate sample mean.
    m2 : numpy.ndarray
        Per-coordinate sum of squared deviations from the mean.
    n_diverged : int
        Samples that were excluded because they were not finite.
    """
    n_samples: int
    mean: np.ndarray
    m2: np.ndarray
    n_diverged: int = 0

    @classmethod
    def empty(cls, dim: int) -> 'MCStats':
        return cls(0, np.zeros(dim), np.zeros(dim))

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> 'MCStats':
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        finite = np.all(np.isfinite(samples), axis=1)
        kept = samples[finite]
        n = kept.shape[0]
        if n == 0:
            stats = cls.empty(samples.shape[1])
        else:
            mean = kept.mean(axis=0)
            stats = cls(n, mean, np.sum((kept - mean)**2, axis=0))
        stats.n_diverged = int(np.sum(~finite))
        return stats

    def merge(self, other: 'MCStats') -> 'MCStats':
        """Pairwise combination of two partial results (Chan et al.)."""
        n = self.n_samples + other.n_samples
        diverged = self.n_diverged + other.n_diverged
        if other.n_samples == 0:
            return MCStats(self.n_samples, self.mean.copy(), self.m2.copy(), diverged)
        if self.n_samples == 0:
            return MCStats(other.n_samples, other.mean.copy(), other.m2.copy(), diverged)

        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n_samples / n)
        m2 = self.m2 + other.m2 +\
            delta**2 * (self.n_samples * other.n_samples / n)
        return MCStats(n, mean, m2, diverged)

    @property
    def variance(self) -> np.ndarray:
        if self.n_samples < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.n_samples - 1)

    @property
    def trace_variance(self) -> float:
        return float(np.sum(self.variance))

    @property
    def standard_errors(self) -> np.ndarray:
        if self.n_samples == 0:
            return np.full_like(self.m2, np.inf)
        return np.sqrt(self.variance / self.n_samples)

def chunk_seeds(seed: int, n_samples: int, chunk_size: int = DEFAULT_CHUNK):
    """Splits `n_samples` into chunks, each with its own derived seed."""
    chunks = []
    for index, start in enumerate(range(0, n_samples, chunk_size)):
        state = np.random.SeedSequence([int(seed) & ((1 << 64) - 1), index])
        chunk_seed = int(state.generate_state(1, dtype=np.uint64)[0])
        chunks.append((chunk_seed, min(chunk_size, n_samples - start)))
    return chunks

def mc_stats(
        estimator_thunk: Callable[[int, int], np.ndarray],
        n_samples: int,
        seed: int,
        chunk_size: int = DEFAULT_CHUNK,
        workers: int = 1,
        max_divergent_fraction: float = 0.01,
    ) -> MCStats:
    """Monte Carlo mean and variance of a seeded estimator.

    Parameters
    ----------
    estimator_thunk : Callable
        `thunk(seed, n)` returning an (n, p) array of independent evaluations.
        Non-finite rows count as divergent evaluations. Must be picklable
        when `workers > 1`.
    n_samples : int
        Total number of evaluations, at least 2.
    seed : int
        Base seed; chunk seeds are derived from it.
    chunk_size : int
        Rows per thunk call.
    workers : int
        Number of processes.
    max_divergent_fraction : float
        Above this fraction of divergent evaluations the meter fails.

    Returns
    -------
    stats : MCStats
        Moments of the finite evaluations.
    """
    if n_samples < 2:
        raise ContractViolation('mc_stats needs at least 2 samples')

    chunks = chunk_seeds(seed, n_samples, chunk_size)
    if workers > 1 and len(chunks) > 1:
        with mp.Pool(min(workers, len(chunks))) as pool:
            results = pool.starmap(estimator_thunk, chunks)
    else:
        results = [estimator_thunk(chunk_seed, size) for chunk_seed, size in chunks]

    stats = None
    for samples in results:
        partial = MCStats.from_samples(samples)
        stats = partial if stats is None else stats.merge(partial)

    if stats.n_diverged > 0:
        logging.warning(f'{stats.n_diverged} of {n_samples} evaluations diverged')
    if stats.n_diverged > max_divergent_fraction * n_samples:
        raise MeterFailure(
            f'{stats.n_diverged} of {n_samples} evaluations diverged')
    return stats

def combined_standard_errors(a: MCStats, b: MCStats) -> np.ndarray:
    return np.sqrt(a.standard_errors**2 + b.standard_errors**2)

def allowed_flags(n_coords: int, k_sigma: float, confidence: float = 0.99) -> int:
    """Number of |z| > k_sigma coordinates still consistent with equal means,
    from the binomial distribution of false flags.
    """
    p_flag = 2.0 * scipy.stats.norm.sf(k_sigma)
    return int(scipy.stats.binom.ppf(confidence, n_coords, p_flag))

def variance_decomposition(terms: Dict[str, np.ndarray]) -> Dict[str, float]:
    """Trace variances of the FO (A), HO (B) and ZO (C) components of an
    estimator, the variance of their sum and the Cauchy-Schwarz upper bound
    Var(A) + Var(B) + Var(C) + 2 (sqrt(AB) + sqrt(AC) + sqrt(BC)).

    Parameters
    ----------
    terms : Dict[str, numpy.ndarray]
        Samples of shape (n, p) under the keys 'fo', 'ho' and 'zo'.
    """
    var = {
        key: MCStats.from_samples(terms[key]).trace_variance
        for key in ('fo', 'ho', 'zo')
    }
    total = MCStats.from_samples(terms['fo'] + terms['ho'] + terms['zo'])
    a, b, c = var['fo'], var['ho'], var['zo']
    bound = a + b + c + 2.0 * (np.sqrt(a * b) + np.sqrt(a * c) + np.sqrt(b * c))
    return {
        'var_a': a,
        'var_b': b,
        'var_c': c,
        'total': total.trace_variance,
        'bound': float(bound),
    }

def uniformity_pvalue(samples: Sequence[int], support: Sequence[int]) -> float:
    """Chi-square goodness of fit of integer samples against the uniform
    distribution on `support`.
    """
    support = list(support)
    counts = pd.Series(np.asarray(samples)).value_counts().reindex(support, fill_value=0)
    if counts.sum() != len(samples):
        raise ContractViolation('samples fall outside the support')
    return float(scipy.stats.chisquare(counts.to_numpy()).pvalue)

def rolling_mean(values: Union[Sequence[float], np.ndarray], window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 entries average what is
    available.
    """
    return pd.Series(np.asarray(values, dtype=np.float64)).rolling(
        window, min_periods=1).mean().to_numpy()

def is_non_decreasing(values: Sequence[float], tolerance: float = 0.0) -> bool:
    values = np.asarray(values, dtype=np.float64)
    return bool(np.all(np.diff(values) >= -tolerance))

def medians(curves: List[np.ndarray]) -> np.ndarray:
    """Pointwise median of curves, truncated to the shortest one."""
    length = min(len(c) for c in curves)
    return np.median(np.stack([np.asarray(c[:length]) for c in curves]), axis=0)
