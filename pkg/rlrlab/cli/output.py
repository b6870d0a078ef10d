# -*- coding: utf-8 -*-

# File: output.py

"""This module contains the writers of experiment artifacts: CSV tables and
the pass/fail ledger `summary.txt`.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Union
import logging
import pandas as pd

FLOAT_FORMAT = '%.17g'
SUMMARY_FILE = 'summary.txt'

def is_nonempty_dir(path: Union[str, Path]) -> bool:
    path = Path(path)
    return path.is_dir() and any(path.iterdir())

def write_csv(frame: pd.DataFrame, path: Union[str, Path]):
    """Header row always, full round-trip precision for floats."""
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logging.info(f'wrote {path} ({len(frame)} rows)')

class Check:
    def __init__(self, name: str, passed: bool, detail: str = ''):
        self.name = name
        self.passed = bool(passed)
        self.detail = detail

    def __str__(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        return f'{status} {self.name}: {self.detail}' if self.detail else\
            f'{status} {self.name}'

@dataclass
class Summary:
    """Pass/fail ledger of one experiment run."""
    checks: List[Check] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def check(self, name: str, passed: bool, detail: str = '') -> bool:
        entry = Check(name, passed, detail)
        self.checks.append(entry)
        logging.info(str(entry))
        return entry.passed

    def note(self, line: str):
        self.notes.append(line)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> List[str]:
        return self.notes + [str(c) for c in self.checks] +\
            [f'overall: {"PASS" if self.passed else "FAIL"}']

    def write(self, out_dir: Union[str, Path]):
        path = Path(out_dir) / SUMMARY_FILE
        path.write_text('\n'.join(self.lines()) + '\n', encoding='utf-8')
