"""Evaluator for rule programs over a feature store.

Evaluation is pure (no store writes) and demand-driven: features are read
only when control flow reaches them, left to right, and the first absent
feature aborts the run with a Missing outcome naming the feature and the
statement that needed it. Type errors (arithmetic on non-numbers, ordering
on non-numbers, cross-type equality, division by zero, non-boolean
condition or return value) raise TypeFault.
"""

from __future__ import annotations

from typing import Protocol

from .ast import (
    MISS,
    BinOp,
    Decision,
    Expr,
    KeyPath,
    Lit,
    Lookup,
    Missing,
    Neg,
    NodeKind,
    RuleProgram,
    Scope,
    Trace,
    Var,
    household_key,
    member_key,
)
from .errors import TypeFault

EvalOutcome = Decision | Missing

SIZE_KEY = "size"


class FeatureSource(Protocol):
    """Read side of a feature store: value for a key path, or MISS."""

    def get(self, key: KeyPath) -> object: ...


class TraceRecorder:
    """Collects executed statement ids plus branch/loop outcome events.

    Two runs of the same program are trace-identical exactly when they
    produce the same event signature: one ("cond", id, outcome) entry per
    distinct conditional outcome and one ("loop", id) entry per loop that
    ran at least one iteration.
    """

    def __init__(self) -> None:
        self.executed: set[int] = set()
        self.events: set[tuple[object, ...]] = set()

    def mark(self, node_id: int) -> None:
        self.executed.add(node_id)

    def cond(self, node_id: int, outcome: bool) -> None:
        self.events.add(("cond", node_id, outcome))

    def loop(self, node_id: int) -> None:
        self.events.add(("loop", node_id))

    def trace(self) -> Trace:
        return Trace(frozenset(self.executed))

    def signature(self) -> frozenset[tuple[object, ...]]:
        return frozenset(self.events)


class _MissSignal(Exception):
    def __init__(self, key: KeyPath, node_id: int) -> None:
        super().__init__(str(key))
        self.key = key
        self.node_id = node_id


class _ReturnSignal(Exception):
    def __init__(self, value: object) -> None:
        super().__init__()
        self.value = value


def _is_number(value: object) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _type_name(value: object) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "text"
    return type(value).__name__


class _Run:
    def __init__(self, program: RuleProgram, store: FeatureSource, recorder: TraceRecorder):
        self.program = program
        self.store = store
        self.recorder = recorder
        self.env: dict[str, object] = {}
        self.member_index: int | None = None

    def fault(self, node_id: int, message: str) -> TypeFault:
        return TypeFault(f"{message} (statement {node_id})", node_id=node_id)

    def run(self) -> EvalOutcome:
        try:
            self.exec_block(self.program.top_level)
        except _ReturnSignal as ret:
            return Decision(eligible=bool(ret.value), trace=self.recorder.trace())
        except _MissSignal as miss:
            return Missing(key=miss.key, node=miss.node_id)
        raise AssertionError("program finished without returning")  # pragma: no cover

    def exec_block(self, ids: tuple[int, ...]) -> None:
        for node_id in ids:
            self.exec_stmt(node_id)

    def exec_stmt(self, node_id: int) -> None:
        node = self.program.node(node_id)
        self.recorder.mark(node_id)
        if node.kind is NodeKind.RETURN:
            value = self.eval_expr(node.value, node_id)
            if not isinstance(value, bool):
                raise self.fault(node_id, f"return value must be a boolean, got {_type_name(value)}")
            raise _ReturnSignal(value)
        if node.kind is NodeKind.ASSIGNMENT:
            self.env[node.name] = self.eval_expr(node.value, node_id)
            return
        if node.kind is NodeKind.CONDITIONAL:
            test = self.eval_expr(node.cond, node_id)
            if not isinstance(test, bool):
                raise self.fault(node_id, f"condition must be a boolean, got {_type_name(test)}")
            self.recorder.cond(node_id, test)
            self.exec_block(node.then_ids if test else node.else_ids)
            return
        if node.kind is NodeKind.MEMBER_LOOP:
            size = self.store.get(household_key(SIZE_KEY))
            if size is MISS:
                raise _MissSignal(household_key(SIZE_KEY), node_id)
            if not isinstance(size, int) or isinstance(size, bool):
                raise self.fault(node_id, f"household size must be an integer, got {_type_name(size)}")
            if size < 0:
                raise self.fault(node_id, "household size must be >= 0")
            if size >= 1:
                self.recorder.loop(node_id)
            outer = self.member_index
            try:
                for index in range(size):
                    self.member_index = index
                    self.exec_block(node.body_ids)
            finally:
                self.member_index = outer
            return
        raise AssertionError(f"unexpected node kind {node.kind}")  # pragma: no cover

    def eval_expr(self, expr: Expr, node_id: int) -> object:
        if isinstance(expr, Lit):
            return expr.value
        if isinstance(expr, Var):
            return self.env[expr.name]
        if isinstance(expr, Lookup):
            return self.eval_lookup(expr, node_id)
        if isinstance(expr, Neg):
            operand = self.eval_expr(expr.operand, node_id)
            if not _is_number(operand):
                raise self.fault(node_id, f"cannot negate {_type_name(operand)}")
            return -operand
        if isinstance(expr, BinOp):
            return self.eval_binop(expr, node_id)
        raise AssertionError(f"unexpected expression {expr!r}")  # pragma: no cover

    def eval_lookup(self, expr: Lookup, node_id: int) -> object:
        if expr.scope is Scope.HOUSEHOLD:
            key = household_key(expr.key)
        elif expr.loop_bound:
            key = member_key(expr.key, self.member_index)
        else:
            key = member_key(expr.key, expr.index)
        value = self.store.get(key)
        if value is MISS:
            raise _MissSignal(key, node_id)
        return value

    def eval_binop(self, expr: BinOp, node_id: int) -> object:
        left = self.eval_expr(expr.left, node_id)
        right = self.eval_expr(expr.right, node_id)
        op = expr.op
        if op in ("+", "-", "*", "/"):
            if not _is_number(left) or not _is_number(right):
                raise self.fault(
                    node_id,
                    f"arithmetic needs numbers, got {_type_name(left)} {op} {_type_name(right)}",
                )
            if op == "+":
                return left + right
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            if right == 0:
                raise self.fault(node_id, "division by zero")
            return left / right
        if op in ("<", "<=", ">=", ">"):
            if not _is_number(left) or not _is_number(right):
                raise self.fault(
                    node_id,
                    f"ordering needs numbers, got {_type_name(left)} {op} {_type_name(right)}",
                )
            if op == "<":
                return left < right
            if op == "<=":
                return left <= right
            if op == ">=":
                return left >= right
            return left > right
        # == and != require operands of the same kind; mixed int/float is fine
        if not self._comparable(left, right):
            raise self.fault(
                node_id, f"cannot compare {_type_name(left)} with {_type_name(right)}"
            )
        return (left == right) if op == "==" else (left != right)

    @staticmethod
    def _comparable(left: object, right: object) -> bool:
        if isinstance(left, bool) or isinstance(right, bool):
            return isinstance(left, bool) and isinstance(right, bool)
        if _is_number(left) or _is_number(right):
            return _is_number(left) and _is_number(right)
        return isinstance(left, str) and isinstance(right, str)


def evaluate(
    program: RuleProgram, store: FeatureSource, recorder: TraceRecorder | None = None
) -> EvalOutcome:
    """Run a program against a store; never mutates the store.

    Returns Decision(eligible, trace) when a return is reached, or
    Missing(key, node) at the first absent feature.
    """
    return _Run(program, store, recorder if recorder is not None else TraceRecorder()).run()


def evaluate_traced(
    program: RuleProgram, store: FeatureSource
) -> tuple[EvalOutcome, Trace, frozenset[tuple[object, ...]]]:
    """evaluate() plus the executed-statement trace and branch signature."""
    recorder = TraceRecorder()
    outcome = _Run(program, store, recorder).run()
    return outcome, recorder.trace(), recorder.signature()
