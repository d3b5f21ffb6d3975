"""Exception hierarchy shared by all ppdb modules."""

from __future__ import annotations


class PpdbError(Exception):
    """Base class for every error raised by ppdb."""

    code = "PpdbError"


class SchemaError(PpdbError):
    """A schema violates one or more of its invariants.

    ``violations`` holds every problem found, not just the first.
    """

    code = "SchemaError"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class UnknownRelation(PpdbError):
    code = "UnknownRelation"


class SchemaMismatch(PpdbError):
    code = "SchemaMismatch"


class BadAttributePosition(PpdbError):
    code = "BadAttributePosition"


class DomainMismatch(PpdbError):
    code = "DomainMismatch"


class BadRange(PpdbError):
    code = "BadRange"


class TypeMismatch(PpdbError):
    code = "TypeMismatch"


class MultiplicityOverflow(PpdbError):
    code = "MultiplicityOverflow"


class EmptyBagUndefined(PpdbError):
    code = "EmptyBagUndefined"


class UnsafeRule(PpdbError):
    code = "UnsafeRule"


class ZeroProbabilityCondition(PpdbError):
    code = "ZeroProbabilityCondition"


class PartitionOverlap(PpdbError):
    code = "PartitionOverlap"


class InvalidModel(PpdbError):
    """A PDB description (finite or point process) is malformed."""

    code = "InvalidModel"


class ParseError(PpdbError):
    """Syntax error in query, predicate or datalog text.

    Carries 1-based ``line``/``column`` so the CLI can print a caret diagnostic.
    """

    code = "ParseError"

    def __init__(self, message: str, text: str = "", line: int = 1, column: int = 1):
        self.message = message
        self.text = text
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")

    def render(self) -> str:
        lines = self.text.splitlines() or [""]
        src = lines[self.line - 1] if 0 < self.line <= len(lines) else ""
        return f"error at line {self.line}, column {self.column}: {self.message}\n  {src}\n  {' ' * (self.column - 1)}^"
