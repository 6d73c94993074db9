"""Parser behavior: grammar acceptance, node numbering, rejection rules."""

from __future__ import annotations

import pytest

from askless.rules import (
    BinOp,
    ForbiddenConstruct,
    Lit,
    Lookup,
    MissingReturn,
    NodeKind,
    RuleSyntaxError,
    Scope,
    parse_program,
)


def test_smallest_program_is_one_return_node():
    program = parse_program("return false", "x")
    assert len(program.nodes) == 1
    node = program.node(0)
    assert node.kind is NodeKind.RETURN
    assert node.value == Lit(False)
    assert program.top_level == (0,)


def test_node_ids_are_dense_and_source_ordered():
    source = """
    if household["income"] < 1000 {
        let threshold = 65
        if members[0]["age"] >= threshold {
            return true
        }
        return false
    } else {
        return false
    }
    """
    program = parse_program(source, "x")
    assert [n.id for n in program.nodes] == list(range(6))
    kinds = [n.kind for n in program.nodes]
    assert kinds == [
        NodeKind.CONDITIONAL,   # 0: outer if
        NodeKind.ASSIGNMENT,    # 1: let threshold
        NodeKind.CONDITIONAL,   # 2: inner if
        NodeKind.RETURN,        # 3: return true
        NodeKind.RETURN,        # 4: return false (fallthrough)
        NodeKind.RETURN,        # 5: return false (else)
    ]
    assert program.node(0).then_ids == (1, 2, 4)
    assert program.node(0).else_ids == (5,)
    assert program.node(2).then_ids == (3,)


def test_reparse_assigns_identical_ids():
    source = 'if household["a"] == 1 { return true } else { return false }'
    assert parse_program(source, "x") == parse_program(source, "x")


@pytest.mark.parametrize(
    "source",
    [
        'return household["a"] == 1 and household["b"] == 2',
        'return household["a"] == 1 or household["b"] == 2',
        'if not household["flag"] { return true } else { return false }',
        'return household.get("a")',
        'try { return true } except { return false }',
    ],
)
def test_forbidden_constructs_rejected(source):
    with pytest.raises(ForbiddenConstruct):
        parse_program(source, "x")


def test_forbidden_error_carries_position():
    with pytest.raises(ForbiddenConstruct) as excinfo:
        parse_program('return true or false', "x")
    assert excinfo.value.line == 1
    assert excinfo.value.column == 13


@pytest.mark.parametrize(
    "source",
    [
        'if household["a"] == 1 { return true }',
        'for member in household { let x = 1 }',
        'let x = 1',
    ],
)
def test_path_without_return_rejected(source):
    with pytest.raises(MissingReturn):
        parse_program(source, "x")


@pytest.mark.parametrize(
    "source,fragment",
    [
        ("", "empty program"),
        ("return true\nreturn false", "unreachable"),
        ('if household["a"] == 1 { } else { return true }', "at least one statement"),
        ('for member in household { } return true', "at least one statement"),
        (
            'for member in household { for member in household { let x = 1 } } return true',
            "nested",
        ),
        ('return member["age"] > 5', "inside a member loop"),
        ('return 1 < household["a"] < 3', "chained"),
        ("return y", "undefined variable"),
        ('if household["a"] == 1 { let y = 2 } else { let z = 3 }\nreturn y', "undefined variable"),
        ("let if = 1 return true", "reserved"),
        ("let household = 1 return true", "reserved"),
        ('return household["a', "unterminated"),
        ("return 5 +", "expression"),
        ('return members["age"]', "integer index"),
    ],
)
def test_syntax_errors(source, fragment):
    with pytest.raises(RuleSyntaxError) as excinfo:
        parse_program(source, "x")
    assert fragment in str(excinfo.value)


def test_python_style_aliases_accepted():
    aliased = parse_program(
        'if hh["size"] > 1 { return hh[0]["age"] >= 18 } else { return True }', "x"
    )
    canonical = parse_program(
        'if household["size"] > 1 { return members[0]["age"] >= 18 } else { return true }', "x"
    )
    assert aliased == canonical


def test_member_lookup_inside_loop_is_loop_bound():
    program = parse_program(
        'for member in household { if member["age"] >= 18 { return true } else { let z = 0 } }\n'
        "return false",
        "x",
    )
    cond = program.node(1).cond
    assert isinstance(cond, BinOp)
    assert cond.left == Lookup(Scope.MEMBER, "age", index=None, loop_bound=True)


def test_unary_minus_folds_into_numeric_literal():
    program = parse_program("return household[\"balance\"] > -5", "x")
    cond = program.node(0).value
    assert cond.right == Lit(-5)


def test_comments_are_ignored():
    source = "#opportunity: x\n# a note\nreturn true  # trailing\n"
    program = parse_program(source, "x")
    assert len(program.nodes) == 1


def test_keys_read_orders_first_occurrence_and_includes_size_for_loops():
    source = """
    if household["income"] < 1000 {
        for member in household {
            if member["age"] >= 60 { return true } else { let z = 0 }
        }
        return household["flag"] == true
    } else {
        return false
    }
    """
    program = parse_program(source, "x")
    assert [str(k) for k in program.keys_read()] == [
        "household.size",
        "household.income",
        "member.age",
        "household.flag",
    ]


def test_compared_literals_collects_string_equality_operands():
    source = (
        'if household["housing"] == "rent" { return true }\n'
        'if "own" != household["housing"] { return false }\n'
        "return false"
    )
    program = parse_program(source, "x")
    from askless.rules import household_key

    assert program.compared_literals(household_key("housing")) == ["rent", "own"]
