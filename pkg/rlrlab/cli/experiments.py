# -*- coding: utf-8 -*-

# File: experiments.py

"""This module contains the canned experiments behind the `plan`, `bias`,
`variance`, `truncation` and `train` subcommands. Every runner takes the
validated configuration and the output directory, writes its CSV files and
returns the pass/fail `Summary`.
"""

import dataclasses
import logging
import re
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import numpy as np
import pandas as pd
from .config import ExperimentConfig
from .output import Summary, write_csv
from ..chain import BudgetModel, ChainSpec, EstimatorPlan, plan_cost
from ..decorators import perf
from ..diff_utils import save_params
from ..estimators import (
    FullBP, estimate_samples, make_estimator, validate_plan
)
from ..exceptions import SamplerConfigurationError
from ..planner import q_table, rule_of_thumb_h, solve_h_star
from ..stat_utils import (
    is_non_decreasing, mc_stats, medians, rolling_mean, variance_decomposition
)
from ..trainer import (
    TrainConfig, TrainLog, convergence_report, estimate_delta0, estimate_sigma2,
    estimate_smoothness, evaluate_rewards, train, train_seeds, unbiasedness_report
)

# reward-curve smoothing window of the training comparisons
SMOOTHING_WINDOW = 10
# slack of the non-decreasing check, relative to the smoothed curve's range
SMOOTHING_TOLERANCE = 0.05
# truncation counts as falling behind at this fraction of |R_rlr| below RLR
TRUNCATION_GAP = 0.2
VARIANCE_MARGIN = 1.05
VARIANCE_GAP = 2.0
VARIANCE_H = (3, 2, 1, 0)
# sampling slack when comparing neighbouring h
MONOTONE_TOLERANCE = 1.05

def train_config(config: ExperimentConfig, **overrides) -> TrainConfig:
    """TrainConfig of the configured estimator and optimizer."""
    est, run = config.estimator, config.run
    kwargs = dict(
        estimator=est.kind,
        h=est.h,
        sampler=est.sampler(),
        T_prime=est.T_prime,
        allow_j1=est.allow_j1,
        # theorem2 needs the estimated constants, see with_theorem2
        optimizer='sgd' if run.optimizer == 'theorem2' else run.optimizer,
        iterations=run.iterations,
        batch=run.batch,
        seed=run.seeds[0],
        budget=config.budget.model(),
        adam_beta1=run.adam_beta1,
        adam_beta2=run.adam_beta2,
        adam_eps=run.adam_eps,
    )
    if run.step_size is not None:
        kwargs['step_size'] = run.step_size
    kwargs.update(overrides)
    return TrainConfig(**kwargs)

def theorem2_constants(
        spec: ChainSpec,
        config: TrainConfig,
        params0: np.ndarray,
        n_sigma: int = 10000,
        seed: int = 0,
        workers: int = 1,
    ) -> Tuple[float, float, float]:
    """L_est, delta0_est and sigma2_est at theta_0.

    delta0 uses a full-backpropagation reference run of the same length with
    the step size 1 / L_est.
    """
    L = estimate_smoothness(spec, params0[None, :], seed=seed)
    estimator = make_estimator(
        config.estimator, spec, config.budget, config.h, config.sampler,
        config.T_prime, config.allow_j1)
    sigma2 = estimate_sigma2(estimator, params0, n_sigma, seed, workers)
    reference = train(spec, dataclasses.replace(
        config, estimator='full-bp', optimizer='sgd', step_size=1.0 / L,
        L=None, delta0=None, sigma2=None), params0)
    delta0 = estimate_delta0(spec, params0, reference.final_params, seed=seed)
    logging.info(f'L_est = {L:.6g}, delta0_est = {delta0:.6g}, sigma2_est = {sigma2:.6g}')
    return L, delta0, sigma2

def run_plan(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> Summary:
    """h* from the budget formula, plus the rule-of-thumb h when the budget
    is in its range. plan.csv holds one row per source.
    """
    summary = Summary()
    spec = config.chain.spec()
    budget = config.budget.model()
    result = solve_h_star(budget, spec.T, config.budget.profile())
    plan = EstimatorPlan.rlr(spec.T, 2, result.h)
    cost = plan_cost(plan, budget)

    summary.note(f'h*={result.h}')
    summary.note(f'binding={result.binding}')
    write_csv(q_table(budget, spec.T, config.budget.profile()), out_dir / 'plan_q.csv')

    def row(source: str, h: int, binding: str) -> Dict:
        return {
            'source': source,
            **result._replace(h=h, binding=binding)._asdict(),
            'T': spec.T,
            'cost': plan_cost(EstimatorPlan.rlr(spec.T, 2, h), budget),
            'full_bp_cost': plan_cost(EstimatorPlan.full_bp(spec.T), budget),
            'pure_zo_cost': plan_cost(EstimatorPlan.pure_zo(spec.T), budget),
        }

    rows = [row('formula', result.h, result.binding)]
    rule_h = rule_of_thumb_h(budget)
    if rule_h is not None and 2 + rule_h <= spec.T:
        summary.note(f'rule-of-thumb h={rule_h}')
        rows.append(row('rule-of-thumb', rule_h, 'rule-of-thumb'))
    write_csv(pd.DataFrame(rows), out_dir / 'plan.csv')

    validate_plan(plan, spec)
    summary.check('plan within budget', cost <= budget.B, f'cost {cost:.6g} <= B {budget.B:.6g}')
    return summary

def bias_estimators(config: ExperimentConfig, spec: ChainSpec, budget: Optional[BudgetModel]):
    """rlr, score-rl, truncated-bp for each T', pure-zo and the configured
    kind if it is none of these.
    """
    est = config.estimator
    sampler = est.sampler()
    estimators = [make_estimator('rlr', spec, budget, est.h, sampler, allow_j1=est.allow_j1),
                  make_estimator('score-rl', spec, budget)]
    for T_prime in est.T_primes or (est.T_prime,):
        estimators.append(make_estimator('truncated-bp', spec, budget, T_prime=T_prime))
    estimators.append(make_estimator('pure-zo', spec, budget))
    if est.kind not in ('rlr', 'score-rl', 'truncated-bp', 'pure-zo', 'full-bp'):
        estimators.append(make_estimator(
            est.kind, spec, budget, est.h, sampler, est.T_prime, est.allow_j1))
    return estimators

def run_bias(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> Summary:
    summary = Summary()
    spec = config.chain.spec()
    params = config.chain.initial_params(spec)
    budget = config.budget.model()
    run = config.run
    reference = FullBP(spec, budget)

    rows = []
    for estimator in bias_estimators(config, spec, budget):
        report = unbiasedness_report(
            estimator, reference, params, run.n_samples, run.k_sigma, run.seeds[0], workers)
        rows.append({
            'estimator': report.label_a,
            'reference': report.label_b,
            'expected_unbiased': int(estimator.unbiased),
            'flags': report.flags,
            'allowed': report.allowed,
            'max_abs_z': report.max_abs_z,
            'biased': int(not report.passed),
            'n_samples': report.stats_a.n_samples,
            'n_diverged': report.stats_a.n_diverged,
        })
        if estimator.unbiased:
            summary.check(f'{report.label_a} unbiased', report.passed,
                          f'{report.flags} flags, allowed {report.allowed}')
        elif estimator.kind == 'truncated-bp':
            summary.check(f'{report.label_a} bias detected', not report.passed,
                          f'{report.flags} flags, allowed {report.allowed}')
    write_csv(pd.DataFrame(rows), out_dir / 'bias.csv')
    return summary

def _variance_row(estimator, params, run, workers) -> Dict:
    thunk = partial(estimate_samples, estimator, params)
    stats, run_time = perf(mc_stats)(thunk, run.n_samples, run.seeds[0], workers=workers)
    logging.info(f'{estimator.label}: trace variance {stats.trace_variance:.6g} '+
                 f'in {run_time:.2f} s')
    return {
        'estimator': estimator.label,
        'h': getattr(estimator, 'h', None),
        'cost_units': estimator.cost_units,
        'trace_variance': stats.trace_variance,
        'n_samples': stats.n_samples,
        'n_diverged': stats.n_diverged,
    }

def variance_ordering(variances: Dict[str, float], summary: Summary):
    """full-bp <= rlr(h=2) <= rlr(h=0) <= pure-zo with the margin between
    neighbours, and a factor-of-two gap between full-bp and pure-zo.
    """
    order = ['full-bp', 'rlr(h=2)', 'rlr(h=0)', 'pure-zo']
    missing = [label for label in order if label not in variances]
    if missing:
        summary.note(f'variance ordering skipped, no rows for {", ".join(missing)}')
        return
    for low, high in zip(order, order[1:]):
        summary.check(
            f'variance {low} < {high}',
            variances[high] >= VARIANCE_MARGIN * variances[low],
            f'{variances[low]:.6g} vs {variances[high]:.6g}')
    summary.check(
        'variance gap full-bp vs pure-zo',
        variances['pure-zo'] >= VARIANCE_GAP * variances['full-bp'],
        f'ratio {variances["pure-zo"] / variances["full-bp"]:.6g}')

def variance_monotone_in_h(variances: Dict[str, float], summary: Summary):
    """RLR trace variance does not grow with the sub-chain length h: each
    rlr(h=N) row is at most MONOTONE_TOLERANCE times the row for the next
    shorter sub-chain present.
    """
    rows = sorted((int(label[len('rlr(h='):-1]), value) for label, value in variances.items()
                  if re.fullmatch(r'rlr\(h=\d+\)', label))
    if len(rows) < 2:
        summary.note('variance monotonicity in h skipped, fewer than two rlr rows')
        return
    passed = all(longer <= MONOTONE_TOLERANCE * shorter
                 for (_, shorter), (_, longer) in zip(rows, rows[1:]))
    summary.check(
        'rlr variance non-increasing in h', passed,
        ', '.join(f'h={h}: {value:.6g}' for h, value in rows))

def run_variance(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> Summary:
    summary = Summary()
    spec = config.chain.spec()
    params = config.chain.initial_params(spec)
    budget = config.budget.model()
    est, run = config.estimator, config.run
    sampler = est.sampler()

    estimators = [FullBP(spec, budget)]
    for h in VARIANCE_H:
        if 2 + h > spec.T:
            continue
        try:
            estimators.append(make_estimator(
                'rlr', spec, budget, h, sampler, allow_j1=est.allow_j1))
        except SamplerConfigurationError as e:
            summary.note(f'rlr(h={h}) skipped: {e}')
    estimators.append(make_estimator('pure-zo', spec, budget))
    estimators.append(make_estimator('score-rl', spec, budget))

    rows = [_variance_row(e, params, run, workers) for e in estimators]
    frame = pd.DataFrame(rows)
    frame['h'] = frame['h'].astype('Int64')
    write_csv(frame, out_dir / 'variance.csv')
    variances = dict(zip(frame['estimator'], frame['trace_variance']))
    variance_ordering(variances, summary)
    variance_monotone_in_h(variances, summary)

    if est.kind.startswith('rlr') and 2 + est.h <= spec.T:
        rlr = make_estimator(est.kind, spec, budget, est.h, sampler, allow_j1=est.allow_j1)
        estimate = rlr.estimate(params, run.seeds[0], n_samples=run.n_samples, strict=False)
        parts = variance_decomposition(estimate.terms)
        write_csv(pd.DataFrame([{'estimator': rlr.label, **parts}]),
                  out_dir / 'variance_decomposition.csv')
        summary.check(f'{rlr.label} variance within decomposition bound',
                      parts['total'] <= parts['bound'] * (1 + 1e-9),
                      f'{parts["total"]:.6g} <= {parts["bound"]:.6g}')
    return summary

def _pad(curve: np.ndarray, length: int) -> np.ndarray:
    # diverged runs end early and score -inf afterwards
    return np.concatenate([curve, np.full(length - len(curve), -np.inf)])

def median_curve(curves: Sequence[np.ndarray]) -> np.ndarray:
    length = max(len(c) for c in curves)
    return medians([_pad(c, length) for c in curves])

def with_theorem2(
        spec: ChainSpec,
        config: ExperimentConfig,
        base: TrainConfig,
        params0: np.ndarray,
        workers: int = 1,
    ) -> Tuple[TrainConfig, Optional[Tuple[float, float, float]]]:
    """Switches `base` to the theorem2 step size when the configuration asks
    for it, estimating L, delta0 and sigma2 first.
    """
    if config.run.optimizer != 'theorem2':
        return base, None
    constants = theorem2_constants(spec, base, params0, seed=config.run.seeds[0],
                                   workers=workers)
    L, delta0, sigma2 = constants
    return dataclasses.replace(
        base, optimizer='theorem2', L=L, delta0=delta0, sigma2=sigma2), constants

class TrainingComparison:
    """Training runs of several estimators over the same seeds, with every
    run scored by `evaluate_rewards` so the curves share one yardstick.
    """
    def __init__(self, logs: Dict[str, List[TrainLog]]):
        self.logs = logs
        self.evaluated = {
            label: [evaluate_rewards(log) for log in run_logs]
            for label, run_logs in logs.items()
        }
        self.curves = {label: median_curve(c) for label, c in self.evaluated.items()}

    @classmethod
    def run(
            cls,
            spec: ChainSpec,
            params0: np.ndarray,
            configs: Dict[str, TrainConfig],
            seeds: Sequence[int],
            workers: int = 1,
        ) -> 'TrainingComparison':
        return cls({
            label: train_seeds(spec, cfg, params0, seeds, workers)
            for label, cfg in configs.items()
        })

    def collapsed(self, label: str) -> bool:
        return any(log.collapsed for log in self.logs[label])

    def curves_frame(self) -> pd.DataFrame:
        """One training-log row per estimator, seed and iteration."""
        frames = []
        for label, run_logs in self.logs.items():
            for log in run_logs:
                frame = log.to_frame()
                frame.insert(0, 'seed', log.config.seed)
                frame.insert(0, 'estimator', label)
                frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def medians_frame(self) -> pd.DataFrame:
        length = max(len(c) for c in self.curves.values())
        frame = pd.DataFrame({'iter': np.arange(length)})
        for label, curve in self.curves.items():
            frame[label] = _pad(curve, length)
        return frame

    def finals_frame(self) -> pd.DataFrame:
        rows = [{
            'estimator': label,
            'seed': log.config.seed,
            'final_evaluated_reward': evaluated[-1],
            'collapsed': int(log.collapsed),
            'diverged_at': -1 if log.diverged_at is None else log.diverged_at,
        } for label, run_logs in self.logs.items()
          for log, evaluated in zip(run_logs, self.evaluated[label])]
        return pd.DataFrame(rows)

    def write(self, out_dir: Path, prefix: str):
        write_csv(self.curves_frame(), out_dir / f'{prefix}_curves.csv')
        write_csv(self.medians_frame(), out_dir / f'{prefix}_medians.csv')
        write_csv(self.finals_frame(), out_dir / f'{prefix}_final.csv')

def truncation_configs(base: TrainConfig, T_primes: Sequence[int]) -> Dict[str, TrainConfig]:
    configs = {f'rlr(h={base.h})': dataclasses.replace(base, estimator='rlr')}
    for T_prime in T_primes:
        configs[f"truncated-bp(T'={T_prime})"] = dataclasses.replace(
            base, estimator='truncated-bp', T_prime=T_prime)
    return configs

def truncation_checks(
        comparison: TrainingComparison,
        rlr_label: str,
        shortest_label: str,
        summary: Summary,
    ):
    """Shortest truncation falls behind RLR or collapses, and RLR's smoothed
    median curve does not decrease.
    """
    r_rlr = comparison.curves[rlr_label][-1]
    r_trunc = comparison.curves[shortest_label][-1]
    collapsed = comparison.collapsed(shortest_label)
    behind = r_trunc <= r_rlr - TRUNCATION_GAP * abs(r_rlr)
    summary.check(
        f'{shortest_label} falls behind {rlr_label}', behind or collapsed,
        f'final median {r_trunc:.6g} vs {r_rlr:.6g}, collapse flag {int(collapsed)}')

    smoothed = rolling_mean(comparison.curves[rlr_label], SMOOTHING_WINDOW)
    finite = bool(np.all(np.isfinite(smoothed)))
    tolerance = SMOOTHING_TOLERANCE * float(np.ptp(smoothed)) if finite else 0.0
    summary.check(
        f'{rlr_label} smoothed median non-decreasing',
        finite and is_non_decreasing(smoothed, tolerance),
        f'window {SMOOTHING_WINDOW}, tolerance {tolerance:.3g}')

def run_truncation(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> Summary:
    summary = Summary()
    spec = config.chain.spec()
    params0 = config.chain.initial_params(spec)
    base, _ = with_theorem2(spec, config, train_config(config, estimator='rlr'),
                            params0, workers)
    T_primes = config.estimator.T_primes or tuple(sorted({1, max(1, spec.T // 2)}))

    comparison = TrainingComparison.run(
        spec, params0, truncation_configs(base, T_primes), config.run.seeds, workers)
    comparison.write(out_dir, 'truncation')
    truncation_checks(comparison, f'rlr(h={base.h})',
                      f"truncated-bp(T'={min(T_primes)})", summary)
    return summary

def run_train(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> Summary:
    summary = Summary()
    spec = config.chain.spec()
    params0 = config.chain.initial_params(spec)
    base, constants = with_theorem2(spec, config, train_config(config), params0, workers)

    logs = train_seeds(spec, base, params0, config.run.seeds, workers)
    for log in logs:
        seed = log.config.seed
        log.to_csv(out_dir / f'train_seed{seed}.csv')
        save_params(out_dir / f'params_seed{seed}.bin', spec.backbone, log.final_params,
                    with_text=True)
        summary.check(
            f'seed {seed} completed', log.complete and log.diverged_at is None,
            f'{len(log.records)} of {base.iterations} iterations, '+
            f'collapse flag {int(log.collapsed)}')
        if constants is not None and log.complete:
            report = convergence_report(log, *constants, seed=seed)
            summary.check(f'seed {seed} convergence bound', report.passed,
                          f'observed {report.observed:.6g} <= bound {report.bound:.6g}')
    return summary

RUNNERS = {
    'plan': run_plan,
    'bias': run_bias,
    'variance': run_variance,
    'truncation': run_truncation,
    'train': run_train,
}
