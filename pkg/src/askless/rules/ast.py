"""AST for the restricted rule language.

Statements are the traced unit: every statement is a ``RuleNode`` with a
dense id assigned in source order, and a ``Trace`` is the set of statement
ids executed during one evaluation. Expressions are operand trees stored
inside their statement node; because boolean connectives are forbidden,
every conditional carries exactly one atomic condition.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Union


class Scope(str, enum.Enum):
    HOUSEHOLD = "household"
    MEMBER = "member"


@dataclass(frozen=True, order=True)
class KeyPath:
    """A feature address: a household key, or a member-indexed key.

    ``member_index`` is None for the schema-side "any member" pattern and a
    concrete index >= 0 for store lookups.
    """

    scope: Scope
    key: str
    member_index: int | None = None

    def __post_init__(self) -> None:
        if self.scope is Scope.HOUSEHOLD and self.member_index is not None:
            raise ValueError("household keys carry no member index")
        if self.member_index is not None and self.member_index < 0:
            raise ValueError("member index must be >= 0")

    @property
    def pattern(self) -> "KeyPath":
        """The schema pattern this path falls under (member index erased)."""
        if self.scope is Scope.MEMBER and self.member_index is not None:
            return KeyPath(Scope.MEMBER, self.key)
        return self

    def __str__(self) -> str:
        if self.scope is Scope.HOUSEHOLD:
            return f"household.{self.key}"
        if self.member_index is None:
            return f"member.{self.key}"
        return f"member[{self.member_index}].{self.key}"


def household_key(key: str) -> KeyPath:
    return KeyPath(Scope.HOUSEHOLD, key)


def member_key(key: str, index: int | None = None) -> KeyPath:
    return KeyPath(Scope.MEMBER, key, index)


class _MissType:
    """Sentinel for 'this feature has never been stored'."""

    _instance: "_MissType | None" = None

    def __new__(cls) -> "_MissType":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISS"

    def __bool__(self) -> bool:
        return False


MISS = _MissType()

Value = Union[bool, int, float, str]


# --- expressions (operand trees inside statement nodes) ---

@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lookup:
    """A feature read. ``index`` is an int for ``members[i]["k"]``, None for
    ``household["k"]`` and for ``member["k"]`` (loop-bound)."""

    scope: Scope
    key: str
    index: int | None = None
    loop_bound: bool = False


@dataclass(frozen=True)
class BinOp:
    op: str  # one of < <= == != >= > + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[Lit, Var, Lookup, BinOp, Neg]

COMPARISON_OPS = ("<", "<=", "==", "!=", ">=", ">")
ARITHMETIC_OPS = ("+", "-", "*", "/")


def walk_expr(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, BinOp):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, Neg):
        yield from walk_expr(expr.operand)


# --- statement nodes ---

class NodeKind(str, enum.Enum):
    CONDITIONAL = "conditional"
    RETURN = "return"
    MEMBER_LOOP = "member-loop"
    ASSIGNMENT = "assignment"
    EXPRESSION = "expression"


@dataclass(frozen=True)
class RuleNode:
    id: int
    kind: NodeKind
    # conditional
    cond: Expr | None = None
    then_ids: tuple[int, ...] = ()
    else_ids: tuple[int, ...] = ()
    # return / assignment value
    value: Expr | None = None
    # assignment target
    name: str | None = None
    # member-loop body
    body_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class Trace:
    """Set of statement ids executed during one complete evaluation."""

    executed: frozenset[int]

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.executed


@dataclass(frozen=True)
class Decision:
    eligible: bool
    trace: Trace


@dataclass(frozen=True)
class Missing:
    """First absent feature hit on the execution path, and the statement
    where the read happened."""

    key: KeyPath
    node: int


EvalOutcome = Union[Decision, Missing]


@dataclass(frozen=True)
class RuleProgram:
    opportunity_id: str
    nodes: tuple[RuleNode, ...]
    top_level: tuple[int, ...]
    source_text: str = field(compare=False, default="")

    @property
    def entry(self) -> int:
        return self.top_level[0]

    def node(self, node_id: int) -> RuleNode:
        return self.nodes[node_id]

    def expressions(self) -> Iterator[tuple[int, Expr]]:
        """All expression trees paired with their statement's node id."""
        for n in self.nodes:
            for root in (n.cond, n.value):
                if root is not None:
                    for e in walk_expr(root):
                        yield n.id, e

    def lookups(self) -> list[tuple[int, Lookup]]:
        """Feature reads in source order, paired with statement node id."""
        return [(nid, e) for nid, e in self.expressions() if isinstance(e, Lookup)]

    def keys_read(self) -> list[KeyPath]:
        """Distinct schema-pattern key paths the program may read, in source
        order of first occurrence. Includes household.size when the program
        contains a member loop."""
        seen: dict[KeyPath, None] = {}
        if any(n.kind is NodeKind.MEMBER_LOOP for n in self.nodes):
            seen[household_key("size")] = None
        for _, lk in self.lookups():
            path = KeyPath(lk.scope, lk.key)
            seen.setdefault(path, None)
        return list(seen)

    def first_read_node(self, pattern: KeyPath) -> int:
        """Statement id of the first read of a key pattern (for prompting)."""
        if pattern == household_key("size"):
            for n in self.nodes:
                if n.kind is NodeKind.MEMBER_LOOP:
                    return n.id
        for nid, lk in self.lookups():
            if KeyPath(lk.scope, lk.key) == pattern:
                return nid
        raise KeyError(str(pattern))

    def compared_literals(self, pattern: KeyPath) -> list[str]:
        """String literals equality-compared against reads of a key, in
        source order. Used for choice-closure validation."""
        found: dict[str, None] = {}
        for n in self.nodes:
            for root in (n.cond, n.value):
                if root is None:
                    continue
                for e in walk_expr(root):
                    if not (isinstance(e, BinOp) and e.op in ("==", "!=")):
                        continue
                    sides = ((e.left, e.right), (e.right, e.left))
                    for lookup_side, lit_side in sides:
                        if (
                            isinstance(lookup_side, Lookup)
                            and KeyPath(lookup_side.scope, lookup_side.key) == pattern
                            and isinstance(lit_side, Lit)
                            and isinstance(lit_side.value, str)
                        ):
                            found.setdefault(lit_side.value, None)
        return list(found)
