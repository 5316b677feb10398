"""Exception types raised across the pipeline."""


class CVQBoostError(Exception):
    """Base class for all package errors."""


class DataError(CVQBoostError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(CVQBoostError, ValueError):
    """Invalid configuration value."""


class SchemaError(CVQBoostError, ValueError):
    """A serialized file does not match its expected schema."""


class VersionError(SchemaError):
    """A serialized file carries an unsupported format version."""


class SolverError(CVQBoostError, RuntimeError):
    """The solver hit a non-finite energy or could not proceed."""
