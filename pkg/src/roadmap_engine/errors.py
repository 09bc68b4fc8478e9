"""Exception hierarchy.

Every error carries the Roadmap step it arose in so the command line can
report it (``[Step 3] ...``).
"""


class RoadmapError(Exception):
    step = "?"

    def __init__(self, message, *, step=None):
        super().__init__(message)
        self.message = message
        if step is not None:
            self.step = step

    def __str__(self):
        return f"[Step {self.step}] {self.message}"


class GraphError(RoadmapError):
    step = "1b"


class GraphSyntaxError(GraphError):
    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("graph has a cycle: " + " -> ".join(self.cycle))


class UnknownNodeError(GraphError, KeyError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"unknown node {node!r}")

    __str__ = RoadmapError.__str__


class IdentificationError(RoadmapError):
    step = "3"


class NotIdentifiedError(IdentificationError):
    """Raised when a statistical estimand is requested without a valid adjustment set."""

    def __init__(self, message, witnesses=()):
        super().__init__(message)
        self.witnesses = tuple(witnesses)


class EstimandError(RoadmapError):
    step = "1a"


class DataError(RoadmapError):
    step = "2"


class EstimationError(RoadmapError):
    step = "5"


class SensitivityError(RoadmapError):
    step = "6"


class DGPError(RoadmapError):
    step = "5"


class DGPSyntaxError(DGPError):
    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SimulationError(RoadmapError):
    step = "7"


class WorkflowError(RoadmapError):
    """An artifact from an earlier Roadmap step is missing or stale."""
