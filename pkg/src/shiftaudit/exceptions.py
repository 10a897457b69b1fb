"""Exception hierarchy shared by every module."""


class ShiftAuditError(Exception):
    """Base class for all errors raised by shiftaudit."""


# graph construction / queries
class GraphError(ShiftAuditError):
    pass


class CycleDetected(GraphError):
    pass


class DuplicateNode(GraphError):
    pass


class UnknownEndpoint(GraphError):
    pass


class MissingEnvironmentNode(GraphError):
    pass


class MultipleOutcomeNodes(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class OverlappingArguments(GraphError):
    pass


class NodeIsEnvironment(GraphError):
    pass


class NoValidBlockingSet(GraphError):
    pass


class GraphSpecParseError(GraphError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# weighting / testing
class DegenerateInput(ShiftAuditError, ValueError):
    pass


class EncodingMismatch(ShiftAuditError, ValueError):
    pass


class InsufficientEffectiveSamples(ShiftAuditError, ValueError):
    pass


class EmptyInput(ShiftAuditError, ValueError):
    pass


class SingleClassOutcome(ShiftAuditError, ValueError):
    pass


class MissingColumns(ShiftAuditError, KeyError):
    def __init__(self, columns, where=""):
        self.columns = list(columns)
        msg = "missing column(s): " + ", ".join(self.columns)
        if where:
            msg += f" ({where})"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class IncompleteResults(ShiftAuditError, ValueError):
    pass


# fairness / mitigation
class SingleGroup(ShiftAuditError, ValueError):
    pass


class MissingClassInGroup(ShiftAuditError, ValueError):
    pass


class InvalidK(ShiftAuditError, ValueError):
    pass


class IncompatiblePredictionSets(ShiftAuditError, ValueError):
    pass


class UnknownGroupLevel(ShiftAuditError, KeyError):
    def __str__(self):
        return self.args[0] if self.args else ""


class InvalidSpec(ShiftAuditError, ValueError):
    pass


class IdMismatch(ShiftAuditError, ValueError):
    pass


class UnblockedPathWarning(UserWarning):
    """A blocking set leaves indirect paths open through unobserved nodes."""
