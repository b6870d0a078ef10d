# -*- coding: utf-8 -*-

# File: argument_parsing.py

"""This module contains the parse_args function.
"""

from .experiment import Experiment
import argparse
from typing import Any, List, Optional, Tuple

EXPERIMENT_HELP = {
    Experiment.plan: 'solve for the HO block length h* under the memory budget',
    Experiment.bias: 'compare estimator Monte Carlo means against full backpropagation',
    Experiment.variance: 'trace variances across estimators and HO block lengths',
    Experiment.truncation: "training curves of truncated backpropagation vs RLR",
    Experiment.train: 'train with the configured estimator',
    Experiment.selftest: 'run the acceptance checks',
}

def parse_args(argv: Optional[List[str]] = None) -> Tuple[Any, argparse.ArgumentParser]:
    """This function parses the arguments when ran from the command line.

    Every experiment is a subcommand sharing the options of one parent
    parser.

    Returns
    -------
    args : Namespace
        Parsed arguments object.
    parser : argparse.ArgumentParser
        The argument parser object.
    """

    # Add common args
    parent_parser = argparse.ArgumentParser(add_help=False)

    parent_parser.add_argument(
        '-c',
        '--config',
        metavar='PATH',
        action='store',
        help='experiment configuration file',
        required=True)

    parent_parser.add_argument(
        '-o',
        '--out',
        metavar='OUTPUT_DIR',
        action='store',
        help='output directory, overrides output.path of the configuration; '+
            'default is rlrlab-<experiment> in the current directory',
        default=None)

    parent_parser.add_argument(
        '--seed-offset',
        metavar='N',
        type=int,
        action='store',
        help='added to every seed of run.seeds',
        default=0)

    parent_parser.add_argument(
        '--workers',
        metavar='N',
        type=int,
        action='store',
        help='worker processes for Monte Carlo chunks and seed-parallel '+
            'training; falls back to RLRLAB_WORKERS, then 1',
        default=None)

    parent_parser.add_argument(
        '-l',
        '--log',
        action='store_true',
        help='log progress to STDERR',
        default=False)

    parent_parser.add_argument(
        '-y',
        '--overwrite',
        action='store_true',
        help='write into a non-empty OUTPUT_DIR',
        default=False)

    # Add experiments
    parser = argparse.ArgumentParser(
        prog='rlrlab',
        description='Experiments with the Recursive Likelihood Ratio (RLR) gradient '+
            'estimator of sampling chains.')
    subparsers = parser.add_subparsers(dest='experiment')

    for e in Experiment:
        subparsers.add_parser(
            e.value,
            parents=[parent_parser],
            help=EXPERIMENT_HELP[e])

    # Parse all args
    args = parser.parse_args(argv)
    return args, parser
