"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it:

    2  DomainError / ConfigError (bad argument, unparseable spec)
    3  UnsupportedConfiguration (no prediction or estimator for the combination)
    4  SamplerRunaway (first-passage guard tripped)

Exit code 1 is reserved for a verification suite that ran and failed; the CLI
reports any other exception with exit code 70.
"""

from __future__ import annotations


class SubheatError(Exception):
    """Base class for all subheat errors."""

    exit_code = 2


class DomainError(SubheatError, ValueError):
    """Raised when an argument lies outside an operation's domain."""


class ConfigError(SubheatError, ValueError):
    """Raised when an exponent/domain spec, ladder or suite name cannot be parsed."""


class HypothesisViolation(DomainError):
    """Raised when a diagnostic test function violates its integrability hypothesis."""


class LadderError(DomainError):
    """Raised when a time ladder is too short, unordered, or too deep to estimate."""


class UnsupportedConfiguration(SubheatError):
    """Raised when no prediction or estimator exists for a regime/domain combination."""

    exit_code = 3


class SamplerRunaway(SubheatError, RuntimeError):
    """Raised when inverse first-passage sampling exceeds its step guard."""

    exit_code = 4
