# -*- coding: utf-8 -*-

# File: __init__.py

"""This module contains the main() function, parses arguments, loads the
experiment configuration and runs the experiment.
"""

from .argument_parsing import parse_args
from .config import ExperimentConfig, load_config
from .experiment import Experiment
from .experiments import RUNNERS
from .output import Summary, is_nonempty_dir
from .selftest import run_selftest
from ..exceptions import (
    ConfigError, ContractViolation, DivergenceError, MeterFailure,
    PlanValidationError, SamplerConfigurationError
)
from .cli_utils import error_exit
from .exit_codes import ExitCode
from pathlib import Path
from typing import List, Optional
import logging
import os
import sys

WORKERS_ENV = 'RLRLAB_WORKERS'

def resolve_workers(workers: Optional[int]) -> int:
    """--workers, then RLRLAB_WORKERS, then 1."""
    if workers is None:
        value = os.environ.get(WORKERS_ENV, '1')
        try:
            workers = int(value)
        except ValueError:
            error_exit(f'{WORKERS_ENV} must be an integer, got {value!r}', ExitCode.ConfigError)
    if workers < 1:
        error_exit('the number of workers must be at least 1', ExitCode.ConfigError)
    return workers

def output_dir(config: ExperimentConfig, out: Optional[str]) -> Path:
    """--out, then output.path, then rlrlab-<experiment> in the current
    directory.
    """
    return Path(out or config.output_path or f'rlrlab-{config.experiment.value}')

def run_experiment(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> Summary:
    """Runs the experiment, writes its CSV files and `summary.txt` into
    `out_dir` and returns the summary.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.experiment is Experiment.selftest:
        summary = run_selftest(config, out_dir, workers)
    else:
        summary = RUNNERS[config.experiment.value](config, out_dir, workers)
    summary.write(out_dir)
    return summary

def main(argv: Optional[List[str]] = None):
    """The main function of the program.

    The function parses user arguments, loads and validates the
    configuration and runs the experiment. Known exceptions are caught and
    presented as errors with a machine-readable error record, and the
    program exits with an appropriate exit code.

    The summary ledger is printed to STDOUT; the exit code is 0 only if every
    check of the experiment passed.
    """
    args, parser = parse_args(argv)
    if args.experiment is None:
        parser.print_help(sys.stderr)
        sys.exit(ExitCode.Ok.value)

    logging.basicConfig(level=logging.INFO)
    if not args.log:
        logging.disable(logging.INFO)

    try:
        experiment = Experiment(args.experiment)
    except ValueError:
        error_exit('invalid experiment specified', ExitCode.InvalidExperiment)

    try:
        config = load_config(args.config)
    except FileNotFoundError:
        error_exit(f'configuration file not found: {args.config}', ExitCode.FileNotFound)
    except OSError as e:
        error_exit(f'cannot read configuration file {args.config}: {e.strerror}',
                   ExitCode.ConfigError, type(e).__name__)
    except ConfigError as e:
        error_exit('; '.join(str(issue) for issue in e.issues), ExitCode.ConfigError)

    if config.experiment is not experiment:
        error_exit(
            f'configuration is for experiment {config.experiment.value}, not '+
            f'{experiment.value}', ExitCode.InvalidExperiment)

    config = config.with_overrides(args.out, args.seed_offset)
    workers = resolve_workers(args.workers)
    out_dir = output_dir(config, args.out)
    if is_nonempty_dir(out_dir) and not args.overwrite:
        error_exit(f'output directory {out_dir} is not empty', ExitCode.OutputExists)
    if out_dir.exists() and not out_dir.is_dir():
        error_exit(f'output path {out_dir} is not a directory', ExitCode.OutputExists)

    try:
        summary = run_experiment(config, out_dir, workers)
    except (PlanValidationError, SamplerConfigurationError) as e:
        error_exit(str(e), ExitCode.PlanInvalid, type(e).__name__)
    except DivergenceError as e:
        error_exit(str(e), ExitCode.Divergence)
    except MeterFailure as e:
        error_exit(str(e), ExitCode.MeterFailure)
    except ContractViolation as e:
        error_exit(str(e), ExitCode.ConfigError, type(e).__name__)

    print('\n'.join(summary.lines()))
    if not summary.passed:
        sys.exit(ExitCode.CheckFailed.value)
