# -*- coding: utf-8 -*-

# File: exceptions.py

"""This module contains all custom exceptions.
"""

from typing import List, NamedTuple, Optional
import numpy as np

class ContractViolation(ValueError):
    pass
class OracleFailure(ArithmeticError):
    pass

class DivergenceError(ArithmeticError):
    """Raised when a latent becomes non-finite or its norm exceeds the
    divergence threshold. `step` is the chain step whose output diverged and
    `rows` marks the affected replications of a batched simulation.
    """
    def __init__(self, step: int, rows: Optional[np.ndarray] = None):
        self.step = step
        self.rows = rows
        count = '' if rows is None else f' ({int(np.sum(rows))} rows)'
        super().__init__(f'chain diverged at step {step}{count}')

class PlanValidationError(ValueError):
    pass
class NonContiguousHO(PlanValidationError):
    pass
class FONotAtStart(PlanValidationError):
    pass
class OverlapWithFO(PlanValidationError):
    pass
class OutOfRange(PlanValidationError):
    pass
class StepModeMismatch(PlanValidationError):
    pass
class BudgetExceeded(PlanValidationError):
    pass

class SamplerConfigurationError(ValueError):
    pass
class MeterFailure(RuntimeError):
    pass

class ConfigIssue(NamedTuple):
    line: int
    message: str

    def __str__(self) -> str:
        if self.line > 0:
            return f'line {self.line}: {self.message}'
        return self.message

class ConfigError(ValueError):
    """Carries every problem found in a configuration file, not just the
    first one.
    """
    def __init__(self, issues: List[ConfigIssue]):
        self.issues = list(issues)
        super().__init__('; '.join(str(i) for i in self.issues))
