"""Exception types shared across the toolkit."""


class SceneFormatError(ValueError):
    """A scene or mask file could not be parsed."""


class GenerationFailed(RuntimeError):
    """Random arena generation could not place all obstacles."""


class PlanFailed(RuntimeError):
    """A planner could not produce a collision-free path.

    `diagnostics` carries whatever partial state the planner had (node list,
    per-slice failures, ...) for debugging; it is never a usable path.
    """

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics


class EndpointInZone(ValueError):
    """Start, end, or via point lies inside an (inflated) safety zone."""


class TangentInfeasible(ValueError):
    """Tangent construction requested from a point inside or on the circle."""


class InvalidCommand(ValueError):
    """A simulation or service command violates its preconditions."""


class ModelFormatError(ValueError):
    """A serialized Q-network file is malformed, truncated, or mismatched."""
