"""Recursive-descent parser for the rule language.

Grammar (statements end at newline or naturally; comments run # to EOL):

    program   := stmt+
    stmt      := "if" expr block ("else" block)?
               | "return" expr
               | "let" NAME "=" expr
               | "for" "member" "in" ("household" | "hh") block
    block     := "{" stmt* "}"
    expr      := addsub (RELOP addsub)?          RELOP: < <= == != >= >
    addsub    := muldiv (("+" | "-") muldiv)*
    muldiv    := unary (("*" | "/") unary)*
    unary     := "-" unary | primary
    primary   := NUMBER | STRING | BOOL | lookup | NAME | "(" expr ")"
    lookup    := ("household" | "hh") "[" STRING "]"
               | ("members" | "hh") "[" INT "]" "[" STRING "]"
               | "member" "[" STRING "]"

Boolean connectives (and/or/not), try/except and default-value lookups are
rejected with ForbiddenConstruct; conjunction is written as nested
conditionals and negation as an ``== false`` comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    BinOp,
    Expr,
    Lit,
    Lookup,
    Neg,
    NodeKind,
    RuleNode,
    RuleProgram,
    Scope,
    Var,
    walk_expr,
)
from .errors import ForbiddenConstruct, MissingReturn, RuleSyntaxError

_KEYWORDS = {"if", "else", "return", "let", "for", "in"}
_FORBIDDEN = {"and", "or", "not", "try", "except"}
_BOOL_WORDS = {"true": True, "false": False, "True": True, "False": False}
_RESERVED = (
    _KEYWORDS | _FORBIDDEN | set(_BOOL_WORDS) | {"household", "hh", "member", "members"}
)

_PUNCT = ("<=", ">=", "==", "!=", "<", ">", "{", "}", "[", "]", "(", ")", "=", "+", "-", "*", "/")


@dataclass(frozen=True)
class _Token:
    kind: str  # name | int | float | string | punct | eof
    text: str
    value: object
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i = 1, 1, 0
    n = len(source)

    def err(msg: str) -> RuleSyntaxError:
        return RuleSyntaxError(msg, line, col)

    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            tokens.append(_Token("name", word, word, start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            is_float = False
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            if is_float:
                tokens.append(_Token("float", text, float(text), start_line, start_col))
            else:
                tokens.append(_Token("int", text, int(text), start_line, start_col))
            col += j - i
            i = j
            continue
        if c in "\"'":
            quote = c
            j = i + 1
            buf: list[str] = []
            while j < n and source[j] != quote:
                if source[j] == "\n":
                    raise err("unterminated string literal")
                if source[j] == "\\" and j + 1 < n and source[j + 1] in "\"'\\":
                    buf.append(source[j + 1])
                    j += 2
                    continue
                buf.append(source[j])
                j += 1
            if j >= n:
                raise err("unterminated string literal")
            tokens.append(_Token("string", source[i : j + 1], "".join(buf), start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c == ".":
            # only legal inside numeric literals; `.get(` is the banned
            # default-value lookup, anything else is plain bad syntax
            if source[i + 1 : i + 4] == "get":
                raise ForbiddenConstruct("default-value lookup (.get) is not allowed", line, col)
            raise err("unexpected '.'")
        for p in _PUNCT:
            if source.startswith(p, i):
                tokens.append(_Token("punct", p, p, start_line, start_col))
                i += len(p)
                col += len(p)
                break
        else:
            raise err(f"unexpected character {c!r}")
    tokens.append(_Token("eof", "", None, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0
        self._nodes: dict[int, RuleNode] = {}
        self._positions: dict[int, tuple[int, int]] = {}
        self._next_id = 0
        self._loop_depth = 0

    # --- token plumbing ---

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _advance(self) -> _Token:
        tok = self._tokens[self._pos]
        self._pos += 1
        return tok

    def _error(self, msg: str, tok: _Token | None = None) -> RuleSyntaxError:
        tok = tok or self._peek()
        return RuleSyntaxError(msg, tok.line, tok.column)

    def _expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self._peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise self._error(f"expected {want!r}, found {tok.text or tok.kind!r}")
        return self._advance()

    def _check_forbidden(self, tok: _Token) -> None:
        if tok.kind == "name" and tok.text in _FORBIDDEN:
            raise ForbiddenConstruct(
                f"{tok.text!r} is not allowed in the rule language", tok.line, tok.column
            )

    # --- statements ---

    def parse(self) -> tuple[dict[int, RuleNode], dict[int, tuple[int, int]], tuple[int, ...]]:
        top = self._stmt_list(until_eof=True)
        if not top:
            tok = self._peek()
            raise RuleSyntaxError("empty program", tok.line, tok.column)
        return self._nodes, self._positions, top

    def _stmt_list(self, until_eof: bool = False) -> tuple[int, ...]:
        ids: list[int] = []
        while True:
            tok = self._peek()
            if until_eof and tok.kind == "eof":
                break
            if not until_eof and tok.kind == "punct" and tok.text == "}":
                break
            if tok.kind == "eof":
                raise self._error("expected '}' before end of input")
            ids.append(self._stmt())
        return tuple(ids)

    def _stmt(self) -> int:
        tok = self._peek()
        self._check_forbidden(tok)
        if tok.kind != "name":
            raise self._error(f"expected a statement, found {tok.text!r}")
        if tok.text == "if":
            return self._if_stmt()
        if tok.text == "return":
            return self._return_stmt()
        if tok.text == "let":
            return self._let_stmt()
        if tok.text == "for":
            return self._for_stmt()
        raise self._error(f"expected a statement, found {tok.text!r}")

    def _reserve(self, tok: _Token) -> int:
        node_id = self._next_id
        self._next_id += 1
        self._positions[node_id] = (tok.line, tok.column)
        return node_id

    def _if_stmt(self) -> int:
        tok = self._expect("name", "if")
        node_id = self._reserve(tok)
        cond = self._expr()
        open_brace = self._peek()
        then_ids = self._block()
        if not then_ids:
            raise self._error("conditional body must contain at least one statement", open_brace)
        else_ids: tuple[int, ...] = ()
        if self._peek().kind == "name" and self._peek().text == "else":
            self._advance()
            else_ids = self._block()
        self._nodes[node_id] = RuleNode(
            id=node_id, kind=NodeKind.CONDITIONAL, cond=cond, then_ids=then_ids, else_ids=else_ids
        )
        return node_id

    def _return_stmt(self) -> int:
        tok = self._expect("name", "return")
        node_id = self._reserve(tok)
        value = self._expr()
        self._nodes[node_id] = RuleNode(id=node_id, kind=NodeKind.RETURN, value=value)
        return node_id

    def _let_stmt(self) -> int:
        tok = self._expect("name", "let")
        node_id = self._reserve(tok)
        name_tok = self._expect("name")
        self._check_forbidden(name_tok)
        if name_tok.text in _RESERVED:
            raise self._error(f"{name_tok.text!r} is reserved", name_tok)
        self._expect("punct", "=")
        value = self._expr()
        self._nodes[node_id] = RuleNode(
            id=node_id, kind=NodeKind.ASSIGNMENT, name=name_tok.text, value=value
        )
        return node_id

    def _for_stmt(self) -> int:
        tok = self._expect("name", "for")
        if self._loop_depth:
            raise self._error("member loops cannot be nested", tok)
        node_id = self._reserve(tok)
        self._expect("name", "member")
        self._expect("name", "in")
        subject = self._expect("name")
        if subject.text not in ("household", "hh"):
            raise self._error("member loops iterate over 'household'", subject)
        open_brace = self._peek()
        self._loop_depth += 1
        try:
            body_ids = self._block()
        finally:
            self._loop_depth -= 1
        if not body_ids:
            raise self._error("loop body must contain at least one statement", open_brace)
        self._nodes[node_id] = RuleNode(id=node_id, kind=NodeKind.MEMBER_LOOP, body_ids=body_ids)
        return node_id

    def _block(self) -> tuple[int, ...]:
        self._expect("punct", "{")
        ids = self._stmt_list()
        self._expect("punct", "}")
        return ids

    # --- expressions ---

    def _expr(self) -> Expr:
        left = self._addsub()
        tok = self._peek()
        if tok.kind == "punct" and tok.text in ("<", "<=", "==", "!=", ">=", ">"):
            op = self._advance().text
            right = self._addsub()
            nxt = self._peek()
            if nxt.kind == "punct" and nxt.text in ("<", "<=", "==", "!=", ">=", ">"):
                raise self._error("comparisons cannot be chained", nxt)
            return BinOp(op, left, right)
        return left

    def _addsub(self) -> Expr:
        left = self._muldiv()
        while self._peek().kind == "punct" and self._peek().text in ("+", "-"):
            op = self._advance().text
            left = BinOp(op, left, self._muldiv())
        return left

    def _muldiv(self) -> Expr:
        left = self._unary()
        while self._peek().kind == "punct" and self._peek().text in ("*", "/"):
            op = self._advance().text
            left = BinOp(op, left, self._unary())
        return left

    def _unary(self) -> Expr:
        tok = self._peek()
        if tok.kind == "punct" and tok.text == "-":
            self._advance()
            inner = self._unary()
            if (
                isinstance(inner, Lit)
                and isinstance(inner.value, (int, float))
                and not isinstance(inner.value, bool)
            ):
                return Lit(-inner.value)
            return Neg(inner)
        return self._primary()

    def _primary(self) -> Expr:
        tok = self._peek()
        self._check_forbidden(tok)
        if tok.kind in ("int", "float"):
            self._advance()
            return Lit(tok.value)  # type: ignore[arg-type]
        if tok.kind == "string":
            self._advance()
            return Lit(str(tok.value))
        if tok.kind == "punct" and tok.text == "(":
            self._advance()
            inner = self._expr()
            self._expect("punct", ")")
            return inner
        if tok.kind == "name":
            if tok.text in _BOOL_WORDS:
                self._advance()
                return Lit(_BOOL_WORDS[tok.text])
            if tok.text in ("household", "hh", "member", "members"):
                return self._lookup()
            if tok.text in _KEYWORDS:
                raise self._error(f"unexpected keyword {tok.text!r}")
            self._advance()
            return Var(tok.text)
        raise self._error(f"expected an expression, found {tok.text or tok.kind!r}")

    def _lookup(self) -> Expr:
        subject = self._advance()
        self._expect("punct", "[")
        first = self._peek()
        if subject.text == "member":
            if not self._loop_depth:
                raise self._error("'member' lookups are only valid inside a member loop", subject)
            key = self._expect("string")
            self._expect("punct", "]")
            return Lookup(Scope.MEMBER, str(key.value), index=None, loop_bound=True)
        if subject.text == "members" and first.kind != "int":
            raise self._error("'members' requires an integer index", first)
        if subject.text == "members" or (subject.text == "hh" and first.kind == "int"):
            index_tok = self._expect("int")
            index = int(index_tok.value)  # type: ignore[arg-type]
            self._expect("punct", "]")
            self._expect("punct", "[")
            key = self._expect("string")
            self._expect("punct", "]")
            return Lookup(Scope.MEMBER, str(key.value), index=index)
        key = self._expect("string")
        self._expect("punct", "]")
        return Lookup(Scope.HOUSEHOLD, str(key.value))


def _guarantees_return(nodes: dict[int, RuleNode], node_id: int) -> bool:
    node = nodes[node_id]
    if node.kind is NodeKind.RETURN:
        return True
    if node.kind is NodeKind.CONDITIONAL:
        if not node.else_ids:
            return False
        return _block_returns(nodes, node.then_ids) and _block_returns(nodes, node.else_ids)
    return False


def _block_returns(nodes: dict[int, RuleNode], ids: tuple[int, ...]) -> bool:
    return any(_guarantees_return(nodes, i) for i in ids)


def _check_variables(
    nodes: dict[int, RuleNode],
    positions: dict[int, tuple[int, int]],
    ids: tuple[int, ...],
    defined: frozenset[str],
) -> frozenset[str]:
    """Reject reads of variables not let-bound earlier in scope. A name
    bound inside a branch or loop body is not visible after it, which makes
    runtime name errors impossible."""

    def check_expr(expr: Expr, names: frozenset[str], node_id: int) -> None:
        for e in walk_expr(expr):
            if isinstance(e, Var) and e.name not in names:
                line, col = positions[node_id]
                raise RuleSyntaxError(f"undefined variable {e.name!r}", line, col)

    for node_id in ids:
        node = nodes[node_id]
        if node.kind is NodeKind.RETURN:
            check_expr(node.value, defined, node_id)
        elif node.kind is NodeKind.ASSIGNMENT:
            check_expr(node.value, defined, node_id)
            defined = defined | {node.name}
        elif node.kind is NodeKind.CONDITIONAL:
            check_expr(node.cond, defined, node_id)
            _check_variables(nodes, positions, node.then_ids, defined)
            _check_variables(nodes, positions, node.else_ids, defined)
        elif node.kind is NodeKind.MEMBER_LOOP:
            _check_variables(nodes, positions, node.body_ids, defined)
    return defined


def _check_reachability(
    nodes: dict[int, RuleNode],
    positions: dict[int, tuple[int, int]],
    ids: tuple[int, ...],
) -> None:
    for offset, node_id in enumerate(ids):
        node = nodes[node_id]
        if node.kind is NodeKind.CONDITIONAL:
            _check_reachability(nodes, positions, node.then_ids)
            _check_reachability(nodes, positions, node.else_ids)
        elif node.kind is NodeKind.MEMBER_LOOP:
            _check_reachability(nodes, positions, node.body_ids)
        if _guarantees_return(nodes, node_id) and offset + 1 < len(ids):
            line, col = positions[ids[offset + 1]]
            raise RuleSyntaxError("unreachable statement after return", line, col)


def parse_program(source: str, opportunity_id: str) -> RuleProgram:
    """Parse rule-language source into a RuleProgram.

    Node ids are dense 0..N-1 in source order, so re-parsing identical
    source yields identical ids. Raises RuleSyntaxError, ForbiddenConstruct,
    or MissingReturn.
    """
    parser = _Parser(_tokenize(source))
    nodes, positions, top = parser.parse()
    _check_variables(nodes, positions, top, frozenset())
    _check_reachability(nodes, positions, top)
    if not _block_returns(nodes, top):
        raise MissingReturn(f"checker {opportunity_id!r} has a path with no return")
    ordered = tuple(nodes[i] for i in sorted(nodes))
    return RuleProgram(
        opportunity_id=opportunity_id, nodes=ordered, top_level=top, source_text=source
    )
