"""Exception hierarchy shared across the package."""


class RockmapError(Exception):
    """Base class for all rockmap errors."""


class ArgumentError(RockmapError, ValueError):
    """A parameter is outside its documented validity range."""


class DataError(RockmapError, ValueError):
    """Input data violates an invariant (non-finite coordinate, bad channel length...)."""


class ParseError(RockmapError, ValueError):
    """A file could not be parsed. Carries the offending location when known."""

    def __init__(self, message, *, line=None, offset=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"byte {offset}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class DegenerateClusterError(RockmapError, ValueError):
    """A cluster is too incoherent for the requested fit."""


class StageError(RockmapError, RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
