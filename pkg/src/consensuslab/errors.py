"""Exception types shared across the package."""


class ConsensusLabError(Exception):
    """Base class for every error raised by consensuslab."""


class InvalidSnapshotError(ConsensusLabError):
    """Weight matrix is not exactly symmetric with a zero diagonal."""


class SignedGraphError(ConsensusLabError):
    """An operation defined for nonnegative weights received a negative edge."""


class NegativeLinkError(ConsensusLabError):
    """A Laplacian violates the positive-semidefiniteness requirement.

    Carries the offending eigenvalue (and segment index, when known).
    """

    def __init__(self, message, eigenvalue=None, segment=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.segment = segment


class HorizonError(ConsensusLabError):
    """Requested time window leaves the horizon of a non-periodic schedule."""


class ConfigurationError(ConsensusLabError):
    """Inconsistent inputs: grids, edge orders, noise windows, file fields."""


class UnobservableWindowError(ConsensusLabError):
    """Observability Gramian is numerically singular on the window."""

    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


class ScenarioError(ConsensusLabError):
    """Scenario file failed schema validation (CLI exit code 2)."""
