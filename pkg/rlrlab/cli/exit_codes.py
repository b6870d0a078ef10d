# -*- coding: utf-8 -*-

# File: exit_codes.py

"""This module contains all program's exit codes.
"""

from enum import Enum

class ExitCode(Enum):
    Ok = 0
    CheckFailed = 1
    InvalidExperiment = 2
    ConfigError = 3
    FileNotFound = 4
    PlanInvalid = 5
    Divergence = 6
    MeterFailure = 7
    OutputExists = 8
