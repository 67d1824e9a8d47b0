"""Exception types shared across the package."""


class InvalidGraph(ValueError):
    """Adjacency matrix is not a valid directed communication graph."""


class NotARoot(ValueError):
    """Requested root agent cannot reach every other agent."""


class NotHurwitz(ValueError):
    """Matrix has an eigenvalue with nonpositive real part."""


class InvalidSpectralGap(ValueError):
    """Threshold decay rate is not strictly below the certified envelope rate."""


class DegenerateBound(ValueError):
    """Closed-form bound evaluates to a nonpositive or undefined value."""


class AssumptionViolated(ValueError):
    """Scenario breaks a structural hypothesis (connectivity, spectral gap, mode)."""


class ProtocolViolation(RuntimeError):
    """Agent state machine received a message it must never accept."""


class ClockViolation(RuntimeError):
    """Channel was polled with a time earlier than a previous poll."""


class ScenarioError(ValueError):
    """Scenario file is malformed or fails schema validation."""
