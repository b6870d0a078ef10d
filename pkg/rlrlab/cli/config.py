# -*- coding: utf-8 -*-

# File: config.py

"""This module contains the parser of experiment configuration files.

The format is flat: one `section.key = value` per line, `#` starts a comment,
blank lines are ignored. Lists are comma separated. Parsing is strict and
collects every problem with its line number before raising `ConfigError`.
"""

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union
import numpy as np
from .experiment import Experiment
from ..backbones import BackboneEnum
from ..chain import BudgetModel, ChainSpec, EstimatorPlan, sigma_preset
from ..estimators import EstimatorEnum, validate_plan
from ..exceptions import (
    ConfigError, ConfigIssue, ContractViolation, PlanValidationError,
    SamplerConfigurationError
)
from ..planner import JPolicy, JSampler, VarianceProfile
from ..rewards import make_reward
from ..trainer import OPTIMIZERS

def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ('true', 'yes', '1'):
        return True
    if lowered in ('false', 'no', '0'):
        return False
    raise ValueError(f'expected true or false, got {text!r}')

def _parse_list(item: Callable[[str], Any]) -> Callable[[str], Tuple]:
    def parse(text: str) -> Tuple:
        values = tuple(item(v.strip()) for v in text.split(','))
        if not values:
            raise ValueError('empty list')
        return values
    parse.__name__ = f'list of {item.__name__}'
    return parse

def _parse_x_T(text: str) -> Optional[Tuple[float, ...]]:
    if text == 'standard-normal':
        return None
    return _parse_list(float)(text)
_parse_x_T.__name__ = "'standard-normal' or list of float"

# key -> (parser, default)
SCHEMA: Dict[str, Tuple[Callable[[str], Any], Any]] = {
    'experiment': (str, None),
    'chain.T': (int, 5),
    'chain.d': (int, 2),
    'chain.m': (int, 4),
    'chain.backbone': (str, 'mlp-tanh'),
    'chain.time_conditioning': (_parse_bool, False),
    'chain.sigma': (str, 'constant'),
    'chain.sigma_value': (float, 0.1),
    'chain.sigma_param': (float, 0.01),
    'chain.reward': (str, 'neg-quadratic'),
    'chain.target': (_parse_list(float), None),
    'chain.reward_seed': (int, 7),
    'chain.x_T': (_parse_x_T, None),
    'chain.param_seed': (int, 0),
    'chain.param_scale': (float, 0.5),
    'chain.params': (_parse_list(float), None),
    'estimator.kind': (str, 'rlr'),
    'estimator.h': (int, 2),
    'estimator.j_policy': (str, 'uniform'),
    'estimator.window_a': (int, None),
    'estimator.window_b': (int, None),
    'estimator.T_prime': (int, 1),
    'estimator.T_primes': (_parse_list(int), None),
    'estimator.temperature': (float, 1.0),
    'estimator.allow_j1': (_parse_bool, False),
    'budget.B': (float, None),
    'budget.B_h': (float, 8.0),
    'budget.B_z': (float, 0.24),
    'budget.V_h': (float, 0.0),
    'budget.V_z': (float, 1.0),
    'run.seeds': (_parse_list(int), (0, 1, 2, 3, 4)),
    'run.n_samples': (int, None),
    'run.iterations': (int, None),
    'run.batch': (int, 8),
    'run.optimizer': (str, 'sgd'),
    'run.step_size': (float, None),
    'run.adam_beta1': (float, 0.9),
    'run.adam_beta2': (float, 0.999),
    'run.adam_eps': (float, 1e-8),
    'run.k_sigma': (float, 4.0),
    'output.path': (str, None),
}

# keys without default each experiment needs
REQUIRED = {
    Experiment.plan: ('budget.B',),
    Experiment.bias: ('run.n_samples',),
    Experiment.variance: ('run.n_samples',),
    Experiment.truncation: ('run.iterations',),
    Experiment.train: ('run.iterations',),
    Experiment.selftest: (),
}

@dataclass(frozen=True)
class ChainSection:
    T: int
    d: int
    m: int
    backbone: str
    time_conditioning: bool
    sigma: str
    sigma_value: float
    sigma_param: float
    reward: str
    target: Optional[Tuple[float, ...]]
    reward_seed: int
    x_T: Optional[Tuple[float, ...]]
    param_seed: int
    param_scale: float
    params: Optional[Tuple[float, ...]]

    def spec(self) -> ChainSpec:
        backbone = BackboneEnum.from_kind(self.backbone).value(
            d=self.d, m=self.m, time_conditioning=self.time_conditioning,
            horizon=self.T if self.time_conditioning else 1)
        target = self.target
        if target is None and self.d == 2:
            target = (0.5, -0.5)
        return ChainSpec(
            self.T, sigma_preset(self.sigma, self.T, self.sigma_value), self.sigma_param,
            backbone, make_reward(self.reward, self.d, target, self.reward_seed), self.x_T)

    def initial_params(self, spec: ChainSpec) -> np.ndarray:
        """Explicit `chain.params` or a seeded draw."""
        if self.params is not None:
            return spec.backbone.check_params(np.array(self.params))
        return spec.backbone.init_params(self.param_seed, self.param_scale)

@dataclass(frozen=True)
class EstimatorSection:
    kind: str
    h: int
    j_policy: str
    window_a: Optional[int]
    window_b: Optional[int]
    T_prime: int
    T_primes: Optional[Tuple[int, ...]]
    temperature: float
    allow_j1: bool

    def sampler(self) -> JSampler:
        policy = JPolicy.from_name(self.j_policy)
        window = None
        if self.window_a is not None or self.window_b is not None:
            if self.window_a is None or self.window_b is None:
                raise SamplerConfigurationError('a window needs both window_a and window_b')
            window = (self.window_a, self.window_b)
        return JSampler(policy, temperature=self.temperature, window=window)

@dataclass(frozen=True)
class BudgetSection:
    B: Optional[float]
    B_h: float
    B_z: float
    V_h: float
    V_z: float

    def model(self) -> Optional[BudgetModel]:
        if self.B is None:
            return None
        return BudgetModel(self.B_h, self.B_z, self.B)

    def profile(self) -> VarianceProfile:
        return VarianceProfile(self.V_h, self.V_z)

@dataclass(frozen=True)
class RunSection:
    seeds: Tuple[int, ...]
    n_samples: Optional[int]
    iterations: Optional[int]
    batch: int
    optimizer: str
    step_size: Optional[float]
    adam_beta1: float
    adam_beta2: float
    adam_eps: float
    k_sigma: float

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    chain: ChainSection
    estimator: EstimatorSection
    budget: BudgetSection
    run: RunSection
    output_path: Optional[str] = None

    def with_overrides(
            self,
            output_path: Optional[str] = None,
            seed_offset: int = 0,
        ) -> 'ExperimentConfig':
        """Applies the command line overrides."""
        run = dataclasses.replace(
            self.run, seeds=tuple(s + seed_offset for s in self.run.seeds))
        return dataclasses.replace(
            self, run=run, output_path=output_path or self.output_path)

def _section_values(values: Dict[str, Any], section: str) -> Dict[str, Any]:
    prefix = section + '.'
    return {
        key[len(prefix):]: value for key, value in values.items()
        if key.startswith(prefix)
    }

def _read_lines(text: str) -> Tuple[Dict[str, Tuple[int, str]], List[ConfigIssue]]:
    entries: Dict[str, Tuple[int, str]] = {}
    issues = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            issues.append(ConfigIssue(number, f'expected "key = value", got {line!r}'))
            continue
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in SCHEMA:
            issues.append(ConfigIssue(number, f'unknown key {key!r}'))
            continue
        if key in entries:
            issues.append(ConfigIssue(
                number, f'duplicate key {key!r} (lines {entries[key][0]} and {number})'))
            continue
        if not value:
            issues.append(ConfigIssue(number, f'{key} has no value'))
            continue
        entries[key] = (number, value)
    return entries, issues

def _check_invariants(
        config: ExperimentConfig,
        line_of: Callable[[str], int],
    ) -> List[ConfigIssue]:
    issues = []
    spec = None
    try:
        spec = config.chain.spec()
        config.chain.initial_params(spec)
    except ContractViolation as e:
        issues.append(ConfigIssue(line_of('chain.T'), f'chain: {e}'))

    estimator = config.estimator
    try:
        EstimatorEnum.from_kind(estimator.kind)
    except ContractViolation as e:
        issues.append(ConfigIssue(line_of('estimator.kind'), str(e)))
    try:
        sampler = estimator.sampler()
        if spec is not None and estimator.kind.startswith('rlr'):
            sampler.check(spec.T, estimator.h)
    except SamplerConfigurationError as e:
        issues.append(ConfigIssue(line_of('estimator.j_policy'), str(e)))
    if spec is not None and estimator.kind in ('rlr', 'rlr-no-zo'):
        try:
            validate_plan(EstimatorPlan.rlr(spec.T, 2, estimator.h), spec,
                          estimator.allow_j1)
        except PlanValidationError as e:
            issues.append(ConfigIssue(line_of('estimator.h'), f'estimator: {e}'))
    if spec is not None:
        for T_prime in (estimator.T_prime,) + (estimator.T_primes or ()):
            if not 1 <= T_prime <= spec.T:
                issues.append(ConfigIssue(
                    line_of('estimator.T_prime'), f"T' = {T_prime} outside [1, {spec.T}]"))

    try:
        config.budget.model()
        config.budget.profile()
    except ContractViolation as e:
        issues.append(ConfigIssue(line_of('budget.B'), f'budget: {e}'))

    run = config.run
    if run.optimizer not in OPTIMIZERS:
        issues.append(ConfigIssue(
            line_of('run.optimizer'), f'unknown optimizer {run.optimizer!r}'))
    for key, value, low in (('run.n_samples', run.n_samples, 2),
                            ('run.iterations', run.iterations, 1),
                            ('run.batch', run.batch, 1)):
        if value is not None and value < low:
            issues.append(ConfigIssue(line_of(key), f'{key} must be at least {low}'))
    if run.step_size is not None and not run.step_size > 0:
        issues.append(ConfigIssue(line_of('run.step_size'), 'run.step_size must be positive'))
    if config.experiment in (Experiment.train, Experiment.truncation) and\
            run.optimizer != 'theorem2' and run.step_size is None:
        issues.append(ConfigIssue(0, f'missing key run.step_size for optimizer {run.optimizer}'))
    if not run.k_sigma > 0:
        issues.append(ConfigIssue(line_of('run.k_sigma'), 'run.k_sigma must be positive'))
    return issues

def parse_config(text: str) -> ExperimentConfig:
    """Parses and validates an experiment configuration.

    Parameters
    ----------
    text : str
        Contents of the configuration file.

    Returns
    -------
    config : ExperimentConfig
        Fully validated configuration.

    Raises
    ------
    ConfigError
        With every problem found: unknown or duplicate keys, values of the
        wrong type, missing sections and keys, violated invariants.

    Examples
    --------
    >>> config = parse_config('experiment = plan\\nbudget.B = 30\\nchain.T = 50')
    >>> config.experiment.value, config.chain.T, config.budget.B
    ('plan', 50, 30.0)
    """
    entries, issues = _read_lines(text)

    values: Dict[str, Any] = {}
    for key, (number, raw) in entries.items():
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(raw)
        except ValueError:
            issues.append(ConfigIssue(
                number, f'{key}: expected {parser.__name__}, got {raw!r}'))

    if 'experiment' not in entries:
        issues.append(ConfigIssue(0, 'experiment missing'))
        raise ConfigError(issues)
    try:
        experiment = Experiment(values['experiment'])
    except (KeyError, ValueError):
        issues.append(ConfigIssue(
            entries['experiment'][0], f'unknown experiment {entries["experiment"][1]!r}'))
        raise ConfigError(issues)

    present = {key.split('.', 1)[0] for key in entries}
    for key in REQUIRED[experiment]:
        if key in entries:
            continue
        section = key.split('.', 1)[0]
        if section not in present:
            issues.append(ConfigIssue(0, f'missing section {section} ({key})'))
        else:
            issues.append(ConfigIssue(0, f'missing key {key}'))
    if issues:
        raise ConfigError(issues)

    merged = {key: default for key, (_, default) in SCHEMA.items()}
    merged.update(values)
    config = ExperimentConfig(
        experiment=experiment,
        chain=ChainSection(**_section_values(merged, 'chain')),
        estimator=EstimatorSection(**_section_values(merged, 'estimator')),
        budget=BudgetSection(**_section_values(merged, 'budget')),
        run=RunSection(**_section_values(merged, 'run')),
        output_path=merged['output.path'],
    )

    def line_of(key: str) -> int:
        return entries.get(key, entries['experiment'])[0]

    issues = _check_invariants(config, line_of)
    if issues:
        raise ConfigError(issues)
    return config

def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Reads and parses a configuration file. OSError (FileNotFoundError
    included) propagates; bytes that are not UTF-8 raise `ConfigError` at
    their line.
    """
    data = Path(path).read_bytes()
    try:
        text = data.decode('utf-8')
    except UnicodeDecodeError as e:
        line = data[:e.start].count(b'\n') + 1
        raise ConfigError([ConfigIssue(line, f'invalid UTF-8 byte 0x{data[e.start]:02x}')])
    return parse_config(text)
