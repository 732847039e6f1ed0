"""Typed error taxonomy shared across the package.

Every failure mode that callers are expected to handle gets its own class so
the CLI can map errors onto stable exit codes without string matching.
"""


class EiformerError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EiformerError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(EiformerError):
    """A NaN/Inf or other non-finite value reached a numeric boundary."""


class ContractError(EiformerError):
    """An API precondition was violated by the caller."""


class ConfigError(EiformerError):
    """A configuration value is out of range or inconsistent; names the field."""


class OracleError(EiformerError):
    """The gradient-check oracle cannot trust its inputs (e.g. non-deterministic f)."""


class InductivenessError(EiformerError):
    """A position-bound model was given an entity count it was not built for."""


class IngestionError(EiformerError):
    """CSV input violates the expected layout (duplicates, non-monotone timestamps)."""


class CorruptionError(EiformerError):
    """Stored dataset bytes do not match their metadata."""


class SplitError(EiformerError):
    """A chronological segment is too short to be usable."""


class CheckpointError(EiformerError):
    """A checkpoint file is truncated, malformed, or has an unknown version."""


class DegenerateInputError(EiformerError):
    """Similarity analysis received constant/degenerate representations."""
