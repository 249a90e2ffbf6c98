"""Exception hierarchy shared across the package."""


class SgxChainError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SgxChainError):
    """An execution plan violates a structural invariant.

    ``subject`` names the offending node id or edge.
    """

    def __init__(self, message: str, subject=None):
        super().__init__(message)
        self.subject = subject


class EmptyPlan(ValidationError):
    pass


class DuplicateNodeId(ValidationError):
    pass


class CyclicPlan(ValidationError):
    pass


class MultipleSinks(ValidationError):
    pass


class DisconnectedPlan(ValidationError):
    pass


class DuplicateTag(ValidationError):
    pass


class DanglingEdge(ValidationError):
    pass


class MalformedEdge(ValidationError):
    """Self-loop or duplicate edge."""


class UnknownEdge(SgxChainError):
    pass


class MutationInvalid(SgxChainError):
    pass


class MissingContribution(SgxChainError):
    def __init__(self, edge):
        super().__init__(f"no value delivered on edge {edge[0]}->{edge[1]}")
        self.edge = edge


class FunctionFailure(SgxChainError):
    def __init__(self, node_id, cause=None):
        super().__init__(f"business function of node {node_id!r} failed: {cause!r}")
        self.node_id = node_id
        self.cause = cause


class BoundaryViolation(SgxChainError):
    """Enclave-private state was requested from outside its enclave."""


class DuplicateName(SgxChainError):
    pass


class UnknownFunction(SgxChainError):
    pass


class UnknownRequest(SgxChainError):
    pass


class AttestationFailed(SgxChainError):
    pass


class DecryptFailure(SgxChainError):
    pass


class AttackError(SgxChainError):
    pass


class NotCrossEnclave(AttackError):
    pass


class NoSuchMessage(AttackError):
    pass


class BaselineFailed(SgxChainError):
    pass


class WorkloadTooSmall(SgxChainError):
    pass


class ScenarioParseError(SgxChainError):
    """Scenario file could not be parsed; ``location`` is a line number or field path."""

    def __init__(self, message: str, location=None):
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)
        self.location = location
