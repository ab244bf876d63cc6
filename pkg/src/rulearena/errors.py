"""Exception hierarchy shared by every module."""


class ArenaError(Exception):
    """Base class for all errors raised by rulearena."""


class SpecValidationError(ArenaError, ValueError):
    """An EnvironmentSpec (or other declarative config) violates an invariant."""


class InvalidActionError(ArenaError, ValueError):
    """The environment rejected an action (unknown kind, bad coordinates)."""


class ProtocolError(ArenaError, RuntimeError):
    """The episode protocol was violated, e.g. stepping a finished episode."""


class ContradictionError(ArenaError, ValueError):
    """An observation is inconsistent with every hypothesis in the support."""


class UndefinedMetricError(ArenaError, ValueError):
    """A metric was requested on inputs for which it has no meaning."""
