# -*- coding: utf-8 -*-

# File: experiment.py

"""This module contains Experiment enum.
"""

from enum import Enum

class Experiment(Enum):
    plan = 'plan'
    bias = 'bias'
    variance = 'variance'
    truncation = 'truncation'
    train = 'train'
    selftest = 'selftest'
