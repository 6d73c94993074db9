"""Canonical formatting for rule programs.

pretty_print emits a normal form (4-space indent, double-quoted strings,
minimal parentheses) whose re-parse is structurally identical to the
original program: same node kinds, ids, and operand trees.
"""

from __future__ import annotations

from .ast import BinOp, Expr, Lit, Lookup, Neg, NodeKind, RuleProgram, Scope, Var

_INDENT = "    "

# precedence levels for parenthesization: comparison < additive < multiplicative < unary
_PRECEDENCE = {"<": 1, "<=": 1, "==": 1, "!=": 1, ">=": 1, ">": 1, "+": 2, "-": 2, "*": 3, "/": 3}


def format_literal(value: bool | int | float | str) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return repr(value)


def format_expr(expr: Expr) -> str:
    return _format(expr, 0)


def _format(expr: Expr, parent_prec: int) -> str:
    if isinstance(expr, Lit):
        return format_literal(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Lookup):
        if expr.scope is Scope.HOUSEHOLD:
            return f'household[{format_literal(expr.key)}]'
        if expr.loop_bound:
            return f'member[{format_literal(expr.key)}]'
        return f'members[{expr.index}][{format_literal(expr.key)}]'
    if isinstance(expr, Neg):
        return f"-{_format(expr.operand, 4)}"
    if isinstance(expr, BinOp):
        prec = _PRECEDENCE[expr.op]
        if prec == 1:
            # comparisons are non-associative: a nested comparison operand
            # must keep its parentheses or the re-parse sees a chain
            left = _format(expr.left, 2)
            right = _format(expr.right, 2)
        else:
            left = _format(expr.left, prec)
            # right operand of - and / must keep its own grouping
            right = _format(expr.right, prec + 1 if expr.op in ("-", "/") else prec)
        text = f"{left} {expr.op} {right}"
        if prec < parent_prec:
            return f"({text})"
        return text
    raise TypeError(f"not an expression: {expr!r}")


def _format_block(program: RuleProgram, ids: tuple[int, ...], depth: int, out: list[str]) -> None:
    pad = _INDENT * depth
    for node_id in ids:
        node = program.node(node_id)
        if node.kind is NodeKind.RETURN:
            out.append(f"{pad}return {format_expr(node.value)}")
        elif node.kind is NodeKind.ASSIGNMENT:
            out.append(f"{pad}let {node.name} = {format_expr(node.value)}")
        elif node.kind is NodeKind.CONDITIONAL:
            out.append(f"{pad}if {format_expr(node.cond)} {{")
            _format_block(program, node.then_ids, depth + 1, out)
            if node.else_ids:
                out.append(f"{pad}}} else {{")
                _format_block(program, node.else_ids, depth + 1, out)
            out.append(f"{pad}}}")
        elif node.kind is NodeKind.MEMBER_LOOP:
            out.append(f"{pad}for member in household {{")
            _format_block(program, node.body_ids, depth + 1, out)
            out.append(f"{pad}}}")
        else:  # pragma: no cover - parser never emits bare expression nodes
            out.append(f"{pad}{format_expr(node.value)}")


def pretty_print(program: RuleProgram) -> str:
    lines: list[str] = []
    _format_block(program, program.top_level, 0, lines)
    return "\n".join(lines)


def describe_node(program: RuleProgram, node_id: int) -> str:
    """One-line summary of a single statement, for rationales and logs."""
    node = program.node(node_id)
    if node.kind is NodeKind.RETURN:
        return f"return {format_expr(node.value)}"
    if node.kind is NodeKind.ASSIGNMENT:
        return f"let {node.name} = {format_expr(node.value)}"
    if node.kind is NodeKind.CONDITIONAL:
        return f"if {format_expr(node.cond)}"
    if node.kind is NodeKind.MEMBER_LOOP:
        return "for member in household"
    return format_expr(node.value)  # pragma: no cover
