"""Exception hierarchy shared across the platform.

Every error carries a machine-readable ``code`` so the HTTP layer and the
CLI can map failures without string matching.
"""


class StreamCIError(Exception):
    """Base class for all streamci errors."""

    code = "error"


class ArgumentError(StreamCIError):
    """A caller-supplied argument violates an operation's precondition."""

    code = "argument"


class ValidationError(StreamCIError):
    """A domain object or manifest fails its invariants."""

    code = "validation"


class CanonicalizationError(ValidationError):
    """Records cannot be canonicalized (duplicate ids)."""

    code = "validation"


class DAGError(ValidationError):
    """A pipeline manifest's edge graph contains a cycle."""

    code = "dag_cycle"


class NotFoundError(StreamCIError):
    """A referenced object, version, or route does not exist."""

    code = "not_found"


class StateError(StreamCIError):
    """The operation conflicts with current state (e.g. double close)."""

    code = "state"


class OrderError(StateError):
    """Windows must close strictly in order."""

    code = "order"


class ComparabilityError(StreamCIError):
    """Two runs cannot be compared (different eval datasets)."""

    code = "comparability"


class StoreError(StreamCIError):
    """The object store failed to persist or read payload bytes."""

    code = "store"


class CorruptionError(StoreError):
    """Stored bytes no longer match their content hash."""

    code = "corruption"
