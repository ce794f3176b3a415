"""Exception types shared across the package."""


class ShiftNasError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(ShiftNasError, ValueError):
    """Tensor dimensions do not match what an operation requires."""


class SpaceError(ShiftNasError, ValueError):
    """Invalid search-space descriptor or genome."""


class CheckpointError(ShiftNasError):
    """Checkpoint file is unreadable, corrupt, or incompatible."""


class DatasetError(ShiftNasError, ValueError):
    """Dataset file or descriptor is malformed."""


class ConfigError(ShiftNasError, ValueError):
    """Run configuration violates the documented schema."""


class SearchError(ShiftNasError, RuntimeError):
    """Evolutionary search cannot proceed (e.g. no feasible genome)."""


class DegenerateRankingError(ShiftNasError, ValueError):
    """A rank statistic is undefined on the given input (e.g. all tied)."""
