"""Exception hierarchy for treealign.

Precondition failures are ``InputError`` (also a ``ValueError`` so callers
that only know the builtin still catch them). The CLI maps ``InputError`` to
exit code 2 and everything else to exit code 1.
"""

from pathlib import Path
from typing import Optional, Union


class TreeAlignError(Exception):
    """Base class for all errors raised by treealign."""

    pass


class InputError(TreeAlignError, ValueError):
    """An argument violates a documented precondition."""

    pass


class DegenerateMeasureError(InputError):
    """A quantity is undefined for the given measure (e.g. zero subtree mass)."""

    pass


class DatasetLoadError(InputError):
    """A dataset manifest or point file could not be read.

    The offending file and, when known, the 1-based line number are kept on
    the exception so the CLI can report them.
    """

    def __init__(
        self,
        message: str,
        path: Union[str, Path],
        line: Optional[int] = None,
    ) -> None:
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


class ConvergenceError(TreeAlignError):
    """An iterative procedure was driven out of order or failed to produce a result."""

    pass
