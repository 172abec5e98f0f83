"""Exception taxonomy shared across the pipeline."""


class PanriskError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(PanriskError):
    """Malformed external file: NIfTI header, CSV schema, model JSON."""


class ValidationError(PanriskError):
    """Violated value contract: geometry mismatch, empty mask, bad probability vector."""


class ConfigError(PanriskError):
    """Invalid or incomplete pipeline configuration."""


class LeakageError(PanriskError):
    """A fitted artifact was trained on blind-test cases."""
