"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input-class problems (bad data,
shapes, domains, parse failures) exit 3, numeric failures exit 4.
Usage errors are argparse's native exit 2.
"""


class CdcitError(Exception):
    """Base class for all errors raised by this package."""


class InputError(CdcitError):
    """User-supplied data is unusable: empty or undersized sets, bad files."""


class ShapeError(InputError):
    """Array dimensions inconsistent with the declared contract."""


class DomainError(InputError):
    """Parameter outside its mathematical domain (negative time, |rho| >= 1)."""


class ParseError(InputError):
    """Malformed input file; message carries file name and line number."""


class NumericError(CdcitError):
    """Non-finite value appeared where a finite one is required."""
