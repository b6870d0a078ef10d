# -*- coding: utf-8 -*-

# File: decorators.py

"""This module contains decorators shared by the library and the CLI.
"""

import time
import logging
import functools
import numpy as np
from .exceptions import ContractViolation

def perf(func):
    """Wraps `func` so that it returns a `(value, run_time)` tuple."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        value = func(*args, **kwargs)
        run_time = time.perf_counter() - start_time
        logging.debug(f'{func.__qualname__} took: {run_time}')
        return value, run_time
    return wrapper

def finite_output(func):
    """Raises `ContractViolation` when the wrapped function returns an array
    with non-finite entries.
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        value = func(*args, **kwargs)
        if not np.all(np.isfinite(value)):
            raise ContractViolation(
                f'{func.__qualname__} produced non-finite values')
        return value
    return wrapper
