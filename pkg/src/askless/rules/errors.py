"""Errors raised by the rule language front end and evaluator."""

from __future__ import annotations


class RuleError(Exception):
    """Base class for all rule-language errors."""


class RuleSyntaxError(RuleError):
    """Source text does not conform to the grammar."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.bare_message = message
        self.line = line
        self.column = column


class ForbiddenConstruct(RuleSyntaxError):
    """A construct the language deliberately rejects: boolean connectives,
    exception handling, or default-value lookups."""


class MissingReturn(RuleError):
    """Some execution path through the program has no return statement."""


class TypeFault(RuleError):
    """A stored value is incompatible with an operation (arithmetic on a
    choice value, division by zero, non-boolean return). Indicates a bug in
    the checker or its schema, never a user error."""

    def __init__(self, message: str, node_id: int | None = None):
        super().__init__(message)
        self.node_id = node_id
