# -*- coding: utf-8 -*-

# File: selftest.py

"""This module contains the `selftest` experiment: the acceptance properties
of the library run at full size, one PASS/FAIL line each.

Checks on the configured (reference) chain: unbiasedness, variance ordering,
sample efficiency and the convergence bound. The rest use fixed chains
defined here.
"""

import dataclasses
import logging
from functools import partial
from pathlib import Path
from typing import Callable, List, Tuple
import numpy as np
import pandas as pd
from .config import ExperimentConfig
from .experiments import (
    VARIANCE_H, TrainingComparison, theorem2_constants, train_config, truncation_checks,
    truncation_configs, variance_monotone_in_h, variance_ordering
)
from .output import Summary, write_csv
from ..backbones import LinearAffine, MLPTanh
from ..chain import (
    BudgetModel, ChainSpec, EstimatorPlan, draw_noise, forward_chain,
    frozen_noise_objective, plan_cost, sigma_preset
)
from ..decorators import perf
from ..diff_utils import fd_gradient
from ..estimators import (
    FullBP, RLR, PureZO, estimate_samples, grad_full_bp, grad_truncated_bp,
    scalar_chain_bias, scalar_chain_expected_bias, truncation_bias_samples
)
from ..planner import JPolicy, JSampler, VarianceProfile, sample_j_many, solve_h_star
from ..rewards import NegQuadratic
from ..stat_utils import MCStats, mc_stats, uniformity_pvalue
from ..trainer import (
    convergence_report, iterations_to_threshold, train, unbiasedness_report
)

VJP_PROBES = 100
ORACLE_CONFIGS = 20
UNBIASED_SAMPLES = 200000
BIAS_SAMPLES = 20000
VARIANCE_SAMPLES = 50000
WINDOW_DRAWS = 10000
SEEDS = (0, 1, 2, 3, 4)
# sample-efficiency runs, below the step size 0.02 at which zeroth-order
# draws throw RLR runs off the reference chain
EFFICIENCY_STEP_SIZE = 0.01
EFFICIENCY_ITERATIONS = 200
EFFICIENCY_BATCH = 32

def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))

def linear_gaussian_chain() -> Tuple[ChainSpec, np.ndarray]:
    """x_{t-1} = w x_t + b + z_t with d=1, T=4, x_T=1 and -(x_0 - 0.5)^2."""
    spec = ChainSpec(4, sigma_preset('constant', 4, 0.3), 1e-2, LinearAffine(d=1),
                     NegQuadratic([0.5]), x_T=(1.0,))
    return spec, np.array([0.8, 0.1])

def long_range_chain() -> Tuple[ChainSpec, np.ndarray]:
    """Scalar time-conditioned affine chain, T=10, started at x_T=0 far from
    the target 2. Only the bias b moves x_0 toward it, and the gain of b
    comes mostly from the early steps: truncating at T'=1 keeps about a
    sixth of it.
    """
    T = 10
    backbone = LinearAffine(d=1, time_conditioning=True, horizon=T)
    spec = ChainSpec(T, sigma_preset('constant', T, 0.3), 0.1, backbone,
                     NegQuadratic([2.0]), x_T=(0.0,))
    return spec, np.array([0.9, 0.0, 0.0])

def check_vjp(config: ExperimentConfig, summary: Summary, workers: int):
    rng = np.random.default_rng(0)
    worst = {}
    for kind, make in (('linear-affine', lambda d, tc: LinearAffine(d=d, time_conditioning=tc,
                                                                    horizon=6)),
                       ('mlp-tanh', lambda d, tc: MLPTanh(d=d, m=4, time_conditioning=tc,
                                                          horizon=6))):
        errors = []
        for probe in range(VJP_PROBES):
            backbone = make(int(rng.integers(1, 4)), probe % 2 == 1)
            params = backbone.init_params(probe, 1.0)
            x = rng.standard_normal(backbone.d)
            v = rng.standard_normal(backbone.d)
            t = int(rng.integers(1, 7))
            fd_x = fd_gradient(lambda y: v @ backbone.forward(params, y, t), x)
            fd_theta = fd_gradient(lambda p: v @ backbone.forward(p, x, t), params)
            errors.append(relative_error(backbone.vjp_x(params, x, t, v), fd_x))
            errors.append(relative_error(backbone.vjp_theta(params, x, t, v), fd_theta))
        worst[kind] = max(errors)
    summary.check('vjp against finite differences', max(worst.values()) < 1e-6,
                  ', '.join(f'{k} max rel err {e:.3g}' for k, e in worst.items()))

def check_pathwise_oracle(config: ExperimentConfig, summary: Summary, workers: int):
    rng = np.random.default_rng(2)
    worst = 0.0
    for index in range(ORACLE_CONFIGS):
        T = int(rng.integers(1, 7))
        d = int(rng.integers(1, 4))
        spec = ChainSpec(T, sigma_preset('constant', T, 0.1), 1e-2, MLPTanh(d=d, m=4),
                         NegQuadratic(rng.normal(size=d)))
        params = spec.backbone.init_params(index, 0.5)
        plan = EstimatorPlan.full_bp(T)
        noise = draw_noise(spec, plan, seed=index, n_samples=4)
        grad = grad_full_bp(spec, params, noise).grad.mean(axis=0)
        fd = fd_gradient(frozen_noise_objective(spec, plan, noise), params)
        worst = max(worst, float(np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-12)))
    summary.check('full bp against finite differences', worst < 1e-5,
                  f'{ORACLE_CONFIGS} chains, max rel err {worst:.3g}')

def check_unbiasedness(config: ExperimentConfig, summary: Summary, workers: int):
    spec = config.chain.spec()
    params = config.chain.initial_params(spec)
    report = unbiasedness_report(
        RLR(spec, h=2, sampler=JSampler(JPolicy.uniform)), FullBP(spec), params,
        UNBIASED_SAMPLES, config.run.k_sigma, seed=config.run.seeds[0], workers=workers,
        n_b=UNBIASED_SAMPLES)
    summary.check('rlr(h=2) unbiased', report.passed,
                  f'{report.flags} flags at {report.k_sigma:g} sigma, allowed '+
                  f'{report.allowed}, max |z| {report.max_abs_z:.3g}')

def check_structural_bias(config: ExperimentConfig, summary: Summary, workers: int):
    spec, params = linear_gaussian_chain()
    T_prime = 2
    plan = EstimatorPlan.full_bp(spec.T)
    noise = draw_noise(spec, plan, seed=5, n_samples=64)
    full = grad_full_bp(spec, params, noise)
    truncated = grad_truncated_bp(spec, params, noise, T_prime)
    trajectory = forward_chain(spec, plan, params, noise)
    gap = float(np.max(np.abs(
        full.grad - truncated.grad - scalar_chain_bias(spec, params, trajectory, T_prime))))
    summary.check("truncation bias closed form", gap < 1e-8, f'max abs err {gap:.3g}')

    samples = truncation_bias_samples(spec, params, T_prime, seed=6, n=BIAS_SAMPLES)
    stats = MCStats.from_samples(samples)
    expected = scalar_chain_expected_bias(spec, params, T_prime)
    z = np.abs(stats.mean - expected) / stats.standard_errors
    summary.check('truncation bias monte carlo', bool(np.all(z <= 3.0)),
                  f'max |z| {np.max(z):.3g} at n={BIAS_SAMPLES}')

def check_variance_ordering(config: ExperimentConfig, summary: Summary, workers: int):
    spec = config.chain.spec()
    params = config.chain.initial_params(spec)
    estimators = [FullBP(spec), *(RLR(spec, h=h) for h in VARIANCE_H), PureZO(spec)]
    variances = {}
    for estimator in estimators:
        stats = mc_stats(partial(estimate_samples, estimator, params), VARIANCE_SAMPLES,
                         config.run.seeds[0], workers=workers)
        variances[estimator.label] = stats.trace_variance
    variance_ordering(variances, summary)
    variance_monotone_in_h(variances, summary)

def check_planner(config: ExperimentConfig, summary: Summary, workers: int):
    result = solve_h_star(BudgetModel(8.0, 0.24, 30.0), 50, VarianceProfile(0.0, 1.0))
    summary.check('planner h* at T=50', result.h == 2 and result.variance_term == 24,
                  f'h*={result.h} ({result.binding}), variance term {result.variance_term}')

def check_cost_model(config: ExperimentConfig, summary: Summary, workers: int):
    budget = BudgetModel(8.0, 0.24, 30.0)
    rlr = plan_cost(EstimatorPlan.rlr(50, 2, 2), budget)
    full = plan_cost(EstimatorPlan.full_bp(50), budget)
    summary.check('cost model at T=50',
                  abs(rlr - 27.28) < 1e-9 and rlr <= budget.B and full == 400.0 and
                  full > budget.B,
                  f'rlr(h=2) {rlr:.6g}, full bp {full:.6g}, B {budget.B:g}')

def check_truncation_collapse(config: ExperimentConfig, summary: Summary, workers: int):
    spec, params0 = long_range_chain()
    base = train_config(config, estimator='rlr', h=2, sampler=JSampler(),
                        optimizer='sgd', step_size=0.003, iterations=30, batch=64,
                        budget=None)
    comparison = TrainingComparison.run(
        spec, params0, truncation_configs(base, (1, spec.T // 2)), SEEDS, workers)
    truncation_checks(comparison, 'rlr(h=2)', "truncated-bp(T'=1)", summary)

def check_sample_efficiency(config: ExperimentConfig, summary: Summary, workers: int):
    spec = config.chain.spec()
    params0 = config.chain.initial_params(spec)
    base = train_config(config, h=2, sampler=JSampler(), optimizer='sgd',
                        step_size=EFFICIENCY_STEP_SIZE, iterations=EFFICIENCY_ITERATIONS,
                        batch=EFFICIENCY_BATCH, budget=None)
    comparison = TrainingComparison.run(spec, params0, {
        label: dataclasses.replace(base, estimator=kind)
        for label, kind in (('full-bp', 'full-bp'), ('rlr(h=2)', 'rlr'),
                            ('score-rl', 'score-rl'))
    }, SEEDS, workers)

    r0 = comparison.curves['full-bp'][0]
    threshold = r0 + 0.9 * (comparison.curves['full-bp'][-1] - r0)
    counts = {
        label: float(np.median([iterations_to_threshold(c, threshold, base.iterations)
                                for c in comparison.evaluated[label]]))
        for label in ('rlr(h=2)', 'score-rl')
    }
    summary.check('rlr(h=2) sample efficiency against score-rl',
                  counts['rlr(h=2)'] <= 0.5 * counts['score-rl'],
                  f'median iterations to {threshold:.6g}: rlr {counts["rlr(h=2)"]:g}, '+
                  f'score-rl {counts["score-rl"]:g}')

def check_convergence_bound(config: ExperimentConfig, summary: Summary, workers: int):
    spec = config.chain.spec()
    params0 = config.chain.initial_params(spec)
    base = train_config(config, estimator='rlr', h=2, sampler=JSampler(), optimizer='sgd',
                        iterations=50, batch=8, budget=None)
    seed = config.run.seeds[0]
    L, delta0, sigma2 = theorem2_constants(spec, base, params0, seed=seed, workers=workers)
    log = train(spec, dataclasses.replace(
        base, optimizer='theorem2', L=L, delta0=delta0, sigma2=sigma2), params0)
    report = convergence_report(log, L, delta0, sigma2, seed=seed)
    step_ok = all(r.step_size <= 1.0 / L for r in log.records)
    summary.check('convergence bound', report.passed and step_ok,
                  f'observed {report.observed:.6g} <= bound {report.bound:.6g}, '+
                  f'step size {log.records[0].step_size:.3g} <= 1/L {1.0 / L:.3g}')

def check_window(config: ExperimentConfig, summary: Summary, workers: int):
    sampler = JSampler(JPolicy.windowed_uniform, window=(30, 40))
    draws = sample_j_many(sampler, 2, 50, seed=config.run.seeds[0], n=WINDOW_DRAWS)
    inside = bool(np.all((draws >= 30) & (draws <= 40)))
    pvalue = uniformity_pvalue(draws, range(30, 41)) if inside else 0.0
    summary.check('windowed j sampler', inside and pvalue >= 0.01,
                  f'{WINDOW_DRAWS} draws in [30, 40]: {inside}, chi-square p {pvalue:.3g}')

CHECKS: List[Callable[[ExperimentConfig, Summary, int], None]] = [
    check_vjp,
    check_pathwise_oracle,
    check_unbiasedness,
    check_structural_bias,
    check_variance_ordering,
    check_planner,
    check_cost_model,
    check_truncation_collapse,
    check_sample_efficiency,
    check_convergence_bound,
    check_window,
]

def run_selftest(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> Summary:
    summary = Summary()
    rows = []
    for check in CHECKS:
        before = len(summary.checks)
        _, run_time = perf(check)(config, summary, workers)
        logging.info(f'{check.__name__} took {run_time:.2f} s')
        for entry in summary.checks[before:]:
            rows.append({'check': entry.name, 'passed': int(entry.passed),
                         'detail': entry.detail})
    write_csv(pd.DataFrame(rows), out_dir / 'selftest.csv')
    return summary
