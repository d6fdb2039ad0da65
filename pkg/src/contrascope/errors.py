"""Exception types shared across the contrascope modules."""

from __future__ import annotations


class ContrascopeError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(ContrascopeError):
    """Two vectors or spaces that must share a dimension do not."""


class ZeroVector(ContrascopeError):
    """A vector with L2 norm below 1e-12 where a direction is required."""


class FormatError(ContrascopeError):
    """A file failed magic/version/structure validation."""


class AlignmentError(ContrascopeError):
    """Row counts disagree between embedding spaces and the id list."""


class DuplicateId(ContrascopeError):
    """The same document id appears more than once."""


class MissingSpace(ContrascopeError):
    """A required embedding space is absent from the corpus."""


class SpaceExists(ContrascopeError):
    """Refusing to overwrite an existing embedding space."""


class ConfigError(ContrascopeError):
    """Invalid configuration value or malformed config document."""


class DegeneratePair(ContrascopeError):
    """A zero-difference pair was evaluated where a defined score is required."""


class InvalidTemperature(ContrascopeError):
    """Softmax temperature must be positive."""


class EmptyValidationSet(ContrascopeError):
    """Alpha tuning needs at least one validation query."""


class UnknownQuery(ContrascopeError):
    """A query id is missing from the judgment set."""


class IoError(ContrascopeError):
    """Reading or writing an artifact file failed."""
