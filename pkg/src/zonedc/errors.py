"""Exception types shared across the compiler."""


class ZonedcError(Exception):
    """Base class for all compiler errors."""


class SchemaError(ZonedcError):
    """An architecture spec document violates the schema or its invariants."""


class ParseError(ZonedcError):
    """A circuit file is syntactically or semantically invalid."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}" + (f", column {column})" if column is not None else ")") if line else ""
        super().__init__(message + where)


class CapacityError(ZonedcError):
    """A layer needs more entanglement pairs than the architecture allows."""


class BudgetError(ZonedcError):
    """A search exhausted its node budget or node-storage cap without a goal."""


class EmitError(ZonedcError):
    """Internal inconsistency between placement, routing, and code generation."""


class MalformedSequenceError(ZonedcError):
    """An instruction sequence cannot be simulated (bad references or order)."""
