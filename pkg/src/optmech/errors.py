"""Semantic exceptions shared across the package.

The CLI maps these onto its exit-code contract: `InputError` -> 1,
`PreconditionError` -> 2, `VerificationError` -> 3.
"""


class OptmechError(Exception):
    """Base class for all errors raised by this package."""


class InputError(OptmechError, ValueError):
    """Malformed external input: bad JSON document, bad rational string,
    out-of-range index, unknown field."""


class PreconditionError(OptmechError, ValueError):
    """A documented precondition of an operation does not hold
    (infeasible parameters, enumeration guard exceeded, zero low value
    on the structured pipeline, ...)."""


class VerificationError(OptmechError, RuntimeError):
    """An exact cross-check failed: oracle disagreement or an internal
    invariant that should be impossible to violate."""
