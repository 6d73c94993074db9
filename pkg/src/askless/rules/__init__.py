"""Restricted rule language: AST, parser, printer, evaluator, corpus I/O."""

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
    RuleNode,
    RuleProgram,
    Scope,
    Trace,
    Value,
    Var,
    household_key,
    member_key,
    walk_expr,
)
from .corpus import (
    CHECKER_SUFFIX,
    HEADER_PREFIX,
    load_checker,
    load_corpus,
    parse_checker_text,
    render_checker_text,
    save_checker,
)
from .errors import ForbiddenConstruct, MissingReturn, RuleError, RuleSyntaxError, TypeFault
from .evaluator import EvalOutcome, FeatureSource, TraceRecorder, evaluate, evaluate_traced
from .parser import parse_program
from .printer import describe_node, format_expr, format_literal, pretty_print

__all__ = [
    "MISS",
    "BinOp",
    "CHECKER_SUFFIX",
    "Decision",
    "EvalOutcome",
    "Expr",
    "FeatureSource",
    "ForbiddenConstruct",
    "HEADER_PREFIX",
    "KeyPath",
    "Lit",
    "Lookup",
    "Missing",
    "MissingReturn",
    "Neg",
    "NodeKind",
    "RuleError",
    "RuleNode",
    "RuleProgram",
    "RuleSyntaxError",
    "Scope",
    "Trace",
    "TraceRecorder",
    "TypeFault",
    "Value",
    "Var",
    "describe_node",
    "evaluate",
    "evaluate_traced",
    "format_expr",
    "format_literal",
    "household_key",
    "load_checker",
    "load_corpus",
    "member_key",
    "parse_checker_text",
    "parse_program",
    "pretty_print",
    "render_checker_text",
    "save_checker",
    "walk_expr",
]
