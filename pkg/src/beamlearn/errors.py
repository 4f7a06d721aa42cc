"""Exception hierarchy shared by every beamlearn module."""


class BeamLearnError(Exception):
    """Base class for all errors raised by beamlearn."""


class StructuralError(BeamLearnError):
    """A search space or beam violates a structural invariant."""


class PreconditionError(BeamLearnError, ValueError):
    """An operation was called with arguments outside its domain."""


class ConfigurationError(BeamLearnError, ValueError):
    """A configuration value, catalog name, or feature index is invalid."""
