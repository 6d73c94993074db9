"""Checker synthesis against scripted code-model transcripts."""

from __future__ import annotations

import pytest

from askless.gateway import Gateway, MockProvider, strip_code_fence
from askless.rules import (
    Decision,
    evaluate,
    household_key,
    load_checker,
    parse_program,
)
from askless.store import ConstraintKind, FeatureStore, load_schema
from askless.synthesis import (
    ChoicesIncomplete,
    RequirementDoc,
    SynthesisExhausted,
    enumerate_choices,
    generate_checker,
    infer_constraint,
    load_requirements,
    synthesize_corpus,
)

DOC = RequirementDoc(
    opportunity_id="ShelterAid",
    title="Shelter Aid",
    body="Households with income under $20,000 qualify if anyone is homeless or a runaway.",
)

VALID_CODE = """\
if hh["annual_income"] < 20000 {
    if hh["homeless_or_runaway"] == "yes" { return true }
    return false
} else {
    return false
}"""


def scripted_gateway(extra=(), include_income=True):
    rules = [("Attempt 1", VALID_CODE)]
    if include_income:
        rules.append(("Target key:\nannual_income", "float"))
    rules.extend(
        [
            ("Target key:\nhomeless_or_runaway", "choice"),
            ("possible values of homeless_or_runaway", '["yes", "no"]'),
        ]
    )
    rules.extend(extra)
    return Gateway(MockProvider(rules))


def test_valid_emission_on_first_attempt():
    result = generate_checker(scripted_gateway(), DOC)
    assert result.attempts == 1
    assert len(result.program.nodes) == 5
    assert result.program.opportunity_id == "ShelterAid"
    assert result.schema.constraint_for(household_key("annual_income")).kind is ConstraintKind.REAL
    homeless = result.schema.constraint_for(household_key("homeless_or_runaway"))
    assert homeless.choices == ("yes", "no")


def test_parse_failure_reprompts_with_error_and_attempt_number():
    provider = MockProvider(
        [
            ("Attempt 1", 'return hh["a"] == "x" or hh["b"] == "y"'),
            ("Attempt 2", VALID_CODE),
            ("Target key:\nannual_income", "float"),
            ("Target key:\nhomeless_or_runaway", "choice"),
            ("possible values", '["yes", "no"]'),
        ]
    )
    result = generate_checker(Gateway(provider), DOC)
    assert result.attempts == 2
    assert len(result.raw_generations) == 2
    retry_text = provider.calls[1].text()
    assert "Attempt 2" in retry_text
    assert "failed to parse" in retry_text
    assert "'or' is not allowed" in retry_text


def test_exhaustion_collects_every_attempt_error():
    provider = MockProvider(
        [("Attempt 1", "def f:"), ("Attempt 2", "garbage («"), ("Attempt 3", "still bad !")]
    )
    with pytest.raises(SynthesisExhausted) as excinfo:
        generate_checker(Gateway(provider), DOC, max_attempts=3)
    assert len(excinfo.value.errors) == 3
    assert len(provider.calls) == 3


def test_preexisting_keys_are_reused_not_redefined():
    gateway = scripted_gateway(include_income=False)
    result = generate_checker(
        gateway, DOC, preexisting_keys=[household_key("annual_income")]
    )
    assert len(result.schema) == 1
    assert household_key("homeless_or_runaway") in result.schema
    first_prompt = gateway.provider.calls[0].text()
    assert "household.annual_income" in first_prompt
    assert "take care not to duplicate" in first_prompt


def test_generation_prompt_carries_requirements_and_grammar():
    gateway = scripted_gateway()
    generate_checker(gateway, DOC)
    prompt = gateway.provider.calls[0].text()
    assert DOC.body in prompt
    assert "check_eligibility" in prompt
    assert "DO NOT use dict.get()" in prompt
    assert "for member in household" in prompt  # grammar addendum


def test_fenced_emissions_are_accepted():
    fenced = f"```python\n{VALID_CODE}\n```"
    gateway = Gateway(
        MockProvider(
            [
                ("Attempt 1", fenced),
                ("Target key:\nannual_income", "float"),
                ("Target key:\nhomeless_or_runaway", "choice"),
                ("possible values", '["yes", "no"]'),
            ]
        )
    )
    result = generate_checker(gateway, DOC)
    assert result.attempts == 1


def test_infer_constraint_maps_types_to_slots():
    program = parse_program(
        'if members[0]["age"] >= 18 { return hh["annual_income"] < 1000 } return false', "x"
    )
    gateway = Gateway(
        MockProvider([("Target key:\nage", "int"), ("Target key:\nannual_income", "float")])
    )
    from askless.rules import member_key

    age = infer_constraint(gateway, member_key("age"), program, DOC)
    assert age.kind is ConstraintKind.INTEGER
    income = infer_constraint(gateway, household_key("annual_income"), program, DOC)
    assert income.kind is ConstraintKind.REAL


def test_enumerate_choices_dedups_preserving_order():
    program = parse_program('return hh["kind"] == "a"', "x")
    gateway = Gateway(MockProvider([("possible values", '["a", "b", "a"]')]))
    assert enumerate_choices(gateway, household_key("kind"), program, DOC) == ["a", "b"]


def test_enumerate_choices_retries_until_compared_literals_covered():
    program = parse_program('return hh["kind"] == "yes"', "x")
    provider = MockProvider(
        [("possible values", '["no"]'), ("possible values", '["yes", "no"]')]
    )
    values = enumerate_choices(Gateway(provider), household_key("kind"), program, DOC)
    assert values == ["yes", "no"]
    assert len(provider.calls) == 2


def test_enumerate_choices_gives_up_with_the_missing_literals():
    program = parse_program('return hh["kind"] == "yes"', "x")
    provider = MockProvider([("possible values", '["no"]')] * 3)
    with pytest.raises(ChoicesIncomplete) as excinfo:
        enumerate_choices(Gateway(provider), household_key("kind"), program, DOC)
    assert excinfo.value.missing == ["yes"]


def test_replaying_the_raw_generation_reparses_identically():
    result = generate_checker(scripted_gateway(), DOC)
    replayed = parse_program(strip_code_fence(result.raw_generations[-1]), "ShelterAid")
    assert replayed == result.program


def test_synthesized_program_never_hits_undefined_slots():
    result = generate_checker(scripted_gateway(), DOC)
    store = FeatureStore(result.schema)
    store.put(household_key("annual_income"), "15000")
    store.put(household_key("homeless_or_runaway"), "yes")
    outcome = evaluate(result.program, store)
    assert outcome == Decision(eligible=True, trace=outcome.trace)


def test_load_requirements_reads_id_title_and_body(tmp_path):
    (tmp_path / "B.txt").write_text("Beta Aid\nEveryone with income under 10k.", encoding="utf-8")
    (tmp_path / "A.txt").write_text("Alpha Aid\nSeniors only.", encoding="utf-8")
    docs = load_requirements(tmp_path)
    assert [d.opportunity_id for d in docs] == ["A", "B"]
    assert docs[0].title == "Alpha Aid"
    assert "Seniors" in docs[0].body


def test_synthesize_corpus_writes_self_contained_artifacts(tmp_path):
    requirements = tmp_path / "requirements"
    requirements.mkdir()
    (requirements / "AAid.txt").write_text(
        "A Aid\nIncome under 20000 and homeless.", encoding="utf-8"
    )
    (requirements / "BAid.txt").write_text("B Aid\nIncome under 5000.", encoding="utf-8")
    second_code = 'return hh["annual_income"] < 5000'
    provider = MockProvider(
        [
            ("A Aid", VALID_CODE),
            ("Target key:\nannual_income", "float"),
            ("Target key:\nhomeless_or_runaway", "choice"),
            ("possible values", '["yes", "no"]'),
            ("B Aid", second_code),
        ]
    )
    out = tmp_path / "rules"
    results = synthesize_corpus(Gateway(provider), requirements, out)
    assert list(results) == ["AAid", "BAid"]
    # the second prompt lists the first checker's keys as preexisting
    second_prompt = provider.calls[-1].text()
    assert "household.annual_income" in second_prompt
    # no type query was made for the reused key, yet its schema file has it
    b_schema = load_schema(out / "BAid.schema.json")
    assert household_key("annual_income") in b_schema
    assert len(b_schema) == 1
    assert load_checker(out / "AAid.rule").opportunity_id == "AAid"
    a_schema = load_schema(out / "AAid.schema.json")
    assert len(a_schema) == 2


def test_requirement_docs_must_have_content():
    with pytest.raises(ValueError):
        RequirementDoc(opportunity_id="x", title="t", body="   ")
