"""Exception hierarchy. Each class carries a ``category`` used for CLI exit codes."""


class TilenetError(Exception):
    category = "error"
    exit_code = 1


class MalformedPolygon(TilenetError):
    category = "malformed-polygon"
    exit_code = 10


class DegeneratePolygon(MalformedPolygon):
    category = "degenerate-polygon"


class ChildOutsideParent(TilenetError):
    category = "child-outside-parent"
    exit_code = 11


class CapacityExceeded(TilenetError):
    category = "capacity-exceeded"
    exit_code = 12


class NotPrimitive(TilenetError):
    category = "not-primitive"
    exit_code = 20


class PowerIterationStalled(TilenetError):
    category = "power-iteration-stalled"
    exit_code = 21


class ZeroVector(TilenetError):
    category = "zero-vector"
    exit_code = 22


class EmptyPatch(TilenetError):
    category = "empty-patch"
    exit_code = 30


class TooFewPoints(TilenetError):
    category = "too-few-points"
    exit_code = 31


class EmptySquare(TilenetError):
    category = "empty-square"
    exit_code = 40


class OutsideSafeRegion(TilenetError):
    category = "outside-safe-region"
    exit_code = 41


class WindowTooSmall(TilenetError):
    category = "window-too-small"
    exit_code = 42


class NoPerfectMatchingUnderCap(TilenetError):
    category = "no-matching-under-cap"
    exit_code = 50


class RuleSyntaxError(TilenetError):
    category = "syntax-error"
    exit_code = 60

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class SemanticError(RuleSyntaxError):
    category = "semantic-error"
    exit_code = 61


class ValidationError(TilenetError):
    category = "validation-error"
    exit_code = 62
