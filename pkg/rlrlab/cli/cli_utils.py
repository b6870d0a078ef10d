# -*- coding: utf-8 -*-

# File: cli_utils.py

"""This module contains various utility functions.
"""

from .exit_codes import ExitCode
import json
import sys
from typing import Optional

def error_record(message: str, exit_code: ExitCode, kind: Optional[str] = None) -> str:
    """One-line JSON record of an error, for machine consumption."""
    return json.dumps({
        'error': message,
        'kind': kind or exit_code.name,
        'exit_code': exit_code.value,
    })

def error_exit(message: str, exit_code: ExitCode, kind: Optional[str] = None):
    """Exits the program with the supplied error message and exit code.

    The message goes to STDERR in the `prog: error: message` form followed by
    its JSON error record.

    Parameters
    ----------
    message : str
        Message to print.
    exit_code : ExitCode
        Exit code to use.
    kind : str | None
        Name of the error, the exit code name by default.
    """
    print(f'{sys.argv[0]}: error: {message}', file=sys.stderr)
    print(error_record(message, exit_code, kind), file=sys.stderr)
    sys.exit(exit_code.value)
