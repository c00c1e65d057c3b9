"""Exception hierarchy shared across the package."""


class ProvFlowError(Exception):
    """Base class for all provflow errors."""


class UnknownKindError(ProvFlowError):
    """A node kind path is not registered."""


class InvalidValueError(ProvFlowError):
    """A value falls outside the allowed attribute/extras closure."""


class NodeNotFoundError(ProvFlowError):
    """Referenced node does not exist in the graph."""

    def __init__(self, ref: str):
        self.ref = ref
        super().__init__(f"node not found: {ref}")


class AlreadyStoredError(ProvFlowError):
    """Attempt to store a node twice."""


class ImmutableError(ProvFlowError):
    """Mutation of content that is frozen once the node is stored."""


class LinkViolationError(ProvFlowError):
    """A candidate link breaks a structural rule of the graph.

    ``rule`` names the broken rule: one of ``endpoint-kinds``,
    ``creator-cardinality``, ``caller-cardinality``, ``label-uniqueness``,
    ``acyclicity``, ``label-syntax``, ``duplicate-link``.
    """

    def __init__(self, rule: str, message: str):
        self.rule = rule
        super().__init__(f"{rule}: {message}")


class SpecValidationError(ProvFlowError):
    """Inputs (or outputs) do not satisfy a process specification."""


class QueryError(ProvFlowError):
    """Malformed query plan or filter."""


class ArchiveError(ProvFlowError):
    """Archive file cannot be read or does not match the manifest schema."""


class CheckpointNotFoundError(ProvFlowError):
    """No checkpoint exists for the given process."""


class CheckpointError(ProvFlowError):
    """Checkpoint payload cannot be encoded or decoded."""


class StoreError(ProvFlowError):
    """Low-level persistence failure."""


class TransientError(ProvFlowError):
    """Recoverable fault (connection dropped, scheduler briefly offline).

    Operations failing with this class are retried with exponential backoff.
    """


class PermanentError(ProvFlowError):
    """Non-recoverable fault; bypasses retry and excepts the process."""


class MaxRetriesExceeded(ProvFlowError):
    """Too many consecutive transient failures; the process must pause."""

    def __init__(self, attempts: int, last: Exception):
        self.attempts = attempts
        self.last = last
        super().__init__(f"gave up after {attempts} consecutive failures: {last}")


class OwnershipLostError(ProvFlowError):
    """The task was handed to another worker; abandon it untouched."""


class RpcRejected(ProvFlowError):
    """A live-process action was refused (for example on a terminal process)."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class RpcUnreachable(ProvFlowError):
    """No worker answered the remote call within the timeout."""


class DaemonNotRunning(ProvFlowError):
    """The daemon control socket is not answering."""


class BenchError(ProvFlowError):
    """A benchmark precondition failed or its result check did not hold."""
