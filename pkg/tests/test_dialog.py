"""Interview engine: question selection, ingestion, budgets, fallback,
persistence, and the ask-only-what-the-code-needs property."""

import json

import pytest

from askless.dialog import (
    Ask,
    Conclude,
    DialogEngine,
    LlmFormulator,
    SessionStateError,
    TemplateFormulator,
    Turn,
    append_records,
    base_question_of,
    budget_for,
    decisions_record,
    open_session,
    read_records,
    replay_session,
    run_session,
    turn_record,
)
from askless.gateway import Gateway, MockProvider, TransportError
from askless.rules import Decision, evaluate, parse_checker_text
from askless.rules.ast import household_key, member_key
from askless.simuser import OracleUser, sample_diverse
from askless.store import (
    MISS,
    FeatureSchema,
    SchemaConflict,
    choice_slot,
    integer_slot,
    real_slot,
)
from askless.synthesis import RequirementDoc

# --- fixtures: a small corpus of checkers with overlapping features ---

INCOME_CHECKER = """\
#opportunity: aid-income
if hh["annual_income"] < 30000 {
  return true
} else {
  return false
}
"""

FOSTER_CHECKER = """\
#opportunity: aid-foster
if hh["size"] < 1 {
  return false
} else {
  if hh[0]["in_foster_care"] == "yes" {
    return true
  } else {
    if hh[0]["age"] < 25 {
      if hh["annual_income"] < 20000 {
        return true
      } else {
        return false
      }
    } else {
      return false
    }
  }
}
"""

LOOP_CHECKER = """\
#opportunity: aid-minor
let minors = 0
for member in household {
  if member["age"] < 18 {
    let minors = minors + 1
  } else {
    let minors = minors
  }
}
return minors >= 1
"""


def income_schema() -> FeatureSchema:
    return FeatureSchema({household_key("annual_income"): real_slot(low=0)})


def foster_schema() -> FeatureSchema:
    return FeatureSchema(
        {
            household_key("size"): integer_slot(low=1, high=6),
            household_key("annual_income"): real_slot(low=0),
            member_key("in_foster_care"): choice_slot("yes", "no"),
            member_key("age"): integer_slot(low=0, high=130),
        }
    )


def loop_schema() -> FeatureSchema:
    return FeatureSchema(
        {
            household_key("size"): integer_slot(low=1, high=6),
            member_key("age"): integer_slot(low=0, high=130),
        }
    )


def make_session(*pairs, session_id="s-test"):
    programs = [parse_checker_text(text) for text, _ in pairs]
    schemas = {
        program.opportunity_id: schema
        for program, (_, schema) in zip(programs, pairs)
    }
    return open_session(programs, schemas, session_id=session_id)


class ScriptedResponder:
    """Answers by key order; complains if asked more than scripted."""

    def __init__(self, answers):
        self.answers = list(answers)
        self.taken = []

    def answer(self, question: str) -> str:
        assert self.answers, f"unexpected question: {question!r}"
        self.taken.append(question)
        return self.answers.pop(0)


# --- budgets and session setup ---


def test_budget_scales_with_opportunities_and_caps():
    assert budget_for(1).max_turns == 20
    assert budget_for(3).max_turns == 60
    assert budget_for(10).max_turns == 100
    assert budget_for(50).max_turns == 100


def test_open_session_orders_checkers_lexicographically():
    session = make_session(
        (INCOME_CHECKER, income_schema()), (FOSTER_CHECKER, foster_schema())
    )
    ids = [program.opportunity_id for program, _ in session.checkers]
    assert ids == ["aid-foster", "aid-income"]
    assert session.budget.max_turns == 40


def test_open_session_rejects_empty_and_duplicates():
    with pytest.raises(ValueError):
        open_session([], {})
    program = parse_checker_text(INCOME_CHECKER)
    with pytest.raises(ValueError):
        open_session([program, program], {"aid-income": income_schema()})
    with pytest.raises(ValueError):
        open_session([program], {})


def test_open_session_surfaces_schema_conflicts():
    clashing = FeatureSchema({household_key("annual_income"): integer_slot()})
    program_a = parse_checker_text(INCOME_CHECKER)
    program_b = parse_checker_text(FOSTER_CHECKER)
    with pytest.raises(SchemaConflict):
        open_session(
            [program_a, program_b],
            {"aid-income": clashing, "aid-foster": foster_schema()},
        )


# --- step: question selection ---


def test_step_asks_first_missing_feature_of_first_undecided_checker():
    session = make_session(
        (INCOME_CHECKER, income_schema()), (FOSTER_CHECKER, foster_schema())
    )
    engine = DialogEngine()
    action = engine.step(session)
    assert isinstance(action, Ask)
    # aid-foster sorts first and reads household size first.
    assert action.question == "How many members are in the household? (an integer between 1 and 6)"
    assert session.pending.key == household_key("size")
    assert session.pending.source_program == "aid-foster"


def test_step_with_pending_question_is_an_error():
    session = make_session((INCOME_CHECKER, income_schema()))
    engine = DialogEngine()
    engine.step(session)
    with pytest.raises(SessionStateError):
        engine.step(session)


def test_member_questions_use_person_numbering_not_raw_keys():
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine()
    engine.step(session)
    engine.ingest_answer(session, "2")
    action = engine.step(session)
    assert action.question == "What is the in foster care of person 0? (one of: yes, no)"
    assert "in_foster_care" not in action.question
    assert session.pending.key == member_key("in_foster_care", 0)


def test_conclude_once_every_checker_decides():
    session = make_session((INCOME_CHECKER, income_schema()))
    engine = DialogEngine()
    engine.step(session)
    engine.ingest_answer(session, "45000")
    action = engine.step(session)
    assert action == Conclude({"aid-income": False})
    # Concluding is idempotent.
    assert engine.step(session) == Conclude({"aid-income": False})


# --- ingest: direct parse, clarification loop, abandonment ---


def test_direct_parse_stores_and_spends_one_turn():
    session = make_session((INCOME_CHECKER, income_schema()))
    engine = DialogEngine()
    engine.step(session)
    turn = engine.ingest_answer(session, " 25000 ")
    assert turn.outcome == "stored"
    assert turn.extracted == 25000.0
    assert session.store.get(household_key("annual_income")) == 25000.0
    assert session.budget.used == 1
    assert session.pending is None


def test_unparseable_answer_triggers_clarification():
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine()
    original = engine.step(session).question
    turn = engine.ingest_answer(session, "onee")
    assert turn.outcome == "clarified"
    assert session.pending.clarity_attempts_used == 1
    assert session.budget.used == 1
    assert session.pending.question.startswith("Sorry, I couldn't use that answer.")
    assert original in session.pending.question
    # The retry accepts a clean answer and the interview moves on.
    follow = engine.ingest_answer(session, "1")
    assert follow.outcome == "stored"
    assert session.budget.used == 2


def test_clarifications_do_not_nest():
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine()
    original = engine.step(session).question
    engine.ingest_answer(session, "garbage")
    first = session.pending.question
    engine.ingest_answer(session, "more garbage")
    second = session.pending.question
    assert first == second
    assert second.count("Sorry") == 1
    assert base_question_of(second) == original


def test_three_failed_clarifications_abandon_the_key():
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine()
    engine.step(session)
    outcomes = [engine.ingest_answer(session, "nope").outcome for _ in range(4)]
    assert outcomes == ["clarified", "clarified", "clarified", "abandoned"]
    assert session.pending is None
    assert household_key("size") in session.unanswerable
    assert session.budget.used == 4
    # With its only path blocked, the session concludes via fallback.
    action = engine.step(session)
    assert action == Conclude({"aid-foster": False})
    assert session.fallback_warning


def test_ingest_without_pending_is_an_error():
    session = make_session((INCOME_CHECKER, income_schema()))
    with pytest.raises(SessionStateError):
        DialogEngine().ingest_answer(session, "4")


# --- extraction through the gateway ---


def extraction_gateway(*responses):
    provider = MockProvider(
        [("What should we set as the value of", text) for text in responses]
    )
    return Gateway(provider=provider, sleep=lambda _: None), provider


def test_freeform_answer_extracted_via_constrained_completion():
    gateway, provider = extraction_gateway("1")
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine(gateway=gateway)
    engine.step(session)
    turn = engine.ingest_answer(session, "I don't live with anyone else")
    assert turn.outcome == "stored"
    assert turn.extracted == 1
    assert session.store.get(household_key("size")) == 1
    request = provider.calls[0]
    assert request.temperature == 0.0
    prompt = request.text()
    assert "I don't live with anyone else" in prompt
    assert "size" in prompt


def test_yes_no_extraction_from_a_narrative_answer():
    gateway, _ = extraction_gateway("yes")
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine(gateway=gateway)
    engine.step(session)
    engine.ingest_answer(session, "2")
    engine.step(session)
    turn = engine.ingest_answer(session, "I am a homeless youth in foster care")
    assert turn.outcome == "stored"
    assert turn.extracted == "yes"
    assert session.store.get(member_key("in_foster_care", 0)) == "yes"


def test_extraction_outside_slot_bounds_clarifies():
    gateway, _ = extraction_gateway("700")
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine(gateway=gateway)
    engine.step(session)
    turn = engine.ingest_answer(session, "several hundred of us")
    assert turn.outcome == "clarified"
    assert session.store.get(household_key("size")) is MISS


def test_extraction_prompt_names_the_member_key_and_blocking_line():
    gateway, provider = extraction_gateway("20")
    session = make_session((FOSTER_CHECKER, foster_schema()))
    docs = {
        "aid-foster": RequirementDoc(
            "aid-foster", "Foster aid", "Foster aid\nSupport for former foster youth."
        )
    }
    engine = DialogEngine(gateway=gateway, docs=docs)
    engine.step(session)
    engine.ingest_answer(session, "1")
    engine.step(session)
    engine.ingest_answer(session, "no")
    engine.step(session)
    engine.ingest_answer(session, "twenty years old")
    prompt = provider.calls[-1].text()
    assert "age_0" in prompt
    assert 'members[0]["age"] < 25' in prompt
    assert "former foster youth" in prompt


# --- shared features and the skip property ---


def test_shared_feature_asked_once_across_checkers():
    session = make_session(
        (INCOME_CHECKER, income_schema()), (FOSTER_CHECKER, foster_schema())
    )
    engine = DialogEngine()
    responder = ScriptedResponder(["1", "no", "24", "25000"])
    decisions = run_session(engine, session, responder)
    assert decisions == {"aid-income": True, "aid-foster": False}
    keys = [turn.key for turn in session.transcript]
    assert keys.count(household_key("annual_income")) == 1
    assert session.budget.used == 4


def test_code_path_that_returns_early_skips_later_questions():
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine()
    responder = ScriptedResponder(["1", "yes"])
    decisions = run_session(engine, session, responder)
    assert decisions == {"aid-foster": True}
    keys = {turn.key for turn in session.transcript}
    assert member_key("age", 0) not in keys
    assert household_key("annual_income") not in keys
    assert session.budget.used == 2


def test_loop_checker_asks_size_then_each_member():
    session = make_session((LOOP_CHECKER, loop_schema()))
    engine = DialogEngine()
    responder = ScriptedResponder(["3", "40", "38", "12"])
    decisions = run_session(engine, session, responder)
    assert decisions == {"aid-minor": True}
    keys = [turn.key for turn in session.transcript]
    assert keys == [
        household_key("size"),
        member_key("age", 0),
        member_key("age", 1),
        member_key("age", 2),
    ]


# --- interview matches direct evaluation on fully-known households ---


def oracle_for(profile):
    return OracleUser(profile)


@pytest.mark.parametrize("seed", range(5))
def test_interview_decisions_match_full_information_evaluation(seed):
    programs = [parse_checker_text(text) for text in (FOSTER_CHECKER, LOOP_CHECKER)]
    schemas = {"aid-foster": foster_schema(), "aid-minor": loop_schema()}
    union_schema = make_session(
        (FOSTER_CHECKER, foster_schema()), (LOOP_CHECKER, loop_schema())
    ).store.schema
    profiles = sample_diverse(union_schema, seed=seed, n=10)
    for profile in profiles:
        session = open_session(programs, schemas, session_id=f"prop-{seed}")
        decisions = run_session(DialogEngine(), session, oracle_for(profile))
        gold_store = profile.to_store(union_schema)
        for program in programs:
            outcome = evaluate(program, gold_store)
            assert isinstance(outcome, Decision)
            assert decisions[program.opportunity_id] == outcome.eligible
        assert not session.fallback_warning
        # Convergence: never more questions than distinct reachable features.
        assert session.budget.used <= len(session.store.known_keys())
        # Necessity: each stored feature was asked at most once.
        stored = [t.key for t in session.transcript if t.outcome == "stored"]
        assert len(stored) == len(set(stored))


def test_identical_sessions_produce_identical_transcripts():
    schema = foster_schema()
    profile = sample_diverse(schema, seed=7, n=1)[0]
    transcripts = []
    for _ in range(2):
        session = make_session((FOSTER_CHECKER, foster_schema()), session_id="twin")
        run_session(DialogEngine(), session, OracleUser(profile))
        transcripts.append(json.dumps([t.to_json() for t in session.transcript]))
    assert transcripts[0] == transcripts[1]


# --- fallback conclusions ---


def test_budget_exhaustion_concludes_with_fallback():
    session = make_session((FOSTER_CHECKER, foster_schema()))
    session.budget.max_turns = 2
    engine = DialogEngine()
    responder = ScriptedResponder(["1", "maybe", "maybe"])
    decisions = run_session(engine, session, responder)
    assert decisions == {"aid-foster": False}
    assert session.fallback_warning
    assert session.budget.used <= session.budget.max_turns


def test_fallback_preserves_decided_checkers():
    session = make_session(
        (INCOME_CHECKER, income_schema()), (FOSTER_CHECKER, foster_schema())
    )
    engine = DialogEngine()
    # Decide aid-foster and aid-income's shared prefix, then abandon age.
    responder = ScriptedResponder(
        ["1", "no", "??", "??", "??", "??", "12000"]
    )
    decisions = run_session(engine, session, responder)
    assert decisions["aid-income"] is True  # decided by code, kept
    assert decisions["aid-foster"] is False  # fallback default
    assert session.fallback_warning


def test_fallback_predicts_undecided_via_bool_array():
    class Scripted:
        name = "scripted"

        def __init__(self):
            self.calls = []

        def complete(self, request):
            self.calls.append(request)
            if "Predict the programs" in request.text():
                return "[true]"
            return "no idea"  # extraction never lands

    provider = Scripted()
    gateway = Gateway(provider=provider, sleep=lambda _: None)
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine(gateway=gateway)
    engine.step(session)
    for _ in range(4):
        engine.ingest_answer(session, "not telling")
    action = engine.step(session)
    assert action == Conclude({"aid-foster": True})
    assert not session.fallback_warning
    prompt = provider.calls[-1].text()
    assert "boolean array of length 1" in prompt
    assert "[true]" in prompt  # example array sized to the undecided set
    assert "not telling" in prompt  # transcript rides along


def test_fallback_gateway_failure_defaults_to_false_with_warning():
    class Down:
        name = "down"

        def complete(self, request):
            raise TransportError("off")

    gateway = Gateway(provider=Down(), max_retries=0, sleep=lambda _: None)
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine(gateway=gateway)
    engine.step(session)
    for _ in range(4):
        engine.ingest_answer(session, "not telling")
    assert engine.step(session) == Conclude({"aid-foster": False})
    assert session.fallback_warning


def test_conclude_fallback_is_callable_directly():
    session = make_session((INCOME_CHECKER, income_schema()))
    engine = DialogEngine()
    decisions = engine.conclude_fallback(session)
    assert decisions == {"aid-income": False}
    assert session.fallback_warning
    assert engine.step(session) == Conclude({"aid-income": False})


# --- model-phrased questions ---


def test_llm_formulator_wraps_model_question_with_constraint_hint():
    provider = MockProvider(
        [("Ask a question to the user", "How many people share your home?")]
    )
    gateway = Gateway(provider=provider, sleep=lambda _: None)
    session = make_session((FOSTER_CHECKER, foster_schema()))
    docs = {"aid-foster": RequirementDoc("aid-foster", "t", "Support for youth.")}
    engine = DialogEngine(formulator=LlmFormulator(gateway), docs=docs)
    action = engine.step(session)
    assert action.question == (
        "How many people share your home? (an integer between 1 and 6)"
    )
    request = provider.calls[-1]
    assert request.temperature is None  # provider-default sampling
    assert "Support for youth." in request.text()
    assert "size" in request.text()


# --- persistence and replay ---


def test_session_log_replays_to_the_same_state(tmp_path):
    path = tmp_path / "sessions.jsonl"
    programs = [parse_checker_text(FOSTER_CHECKER)]
    schemas = {"aid-foster": foster_schema()}
    session = open_session(programs, schemas, session_id="log-1")
    engine = DialogEngine()
    responder = ScriptedResponder(["2", "bogus", "no", "20", "80000"])
    while True:
        action = engine.step(session)
        if isinstance(action, Conclude):
            append_records(path, [decisions_record(session)])
            break
        while session.pending is not None:
            turn = engine.ingest_answer(session, responder.answer(session.pending.question))
            append_records(path, [turn_record(session, turn)])

    records = read_records(path)
    assert [r["type"] for r in records] == ["turn"] * 5 + ["decisions"]
    clone = replay_session("log-1", records, programs, schemas)
    assert clone.decisions == session.decisions == {"aid-foster": False}
    assert clone.budget.used == session.budget.used == 5
    assert clone.store.to_json() == session.store.to_json()
    assert [t.to_json() for t in clone.transcript] == [
        t.to_json() for t in session.transcript
    ]


def test_replay_restores_pending_clarification_mid_flight(tmp_path):
    path = tmp_path / "sessions.jsonl"
    programs = [parse_checker_text(FOSTER_CHECKER)]
    schemas = {"aid-foster": foster_schema()}
    session = open_session(programs, schemas, session_id="log-2")
    engine = DialogEngine()
    engine.step(session)
    turn = engine.ingest_answer(session, "one point five")
    append_records(path, [turn_record(session, turn)])

    clone = replay_session("log-2", read_records(path), programs, schemas)
    assert clone.pending is not None
    assert clone.pending.key == household_key("size")
    assert clone.pending.clarity_attempts_used == 1
    assert clone.pending.question == session.pending.question
    # The revived session keeps interviewing normally.
    follow = engine.ingest_answer(clone, "2")
    assert follow.outcome == "stored"


def test_turn_accounting_matches_questions_asked():
    session = make_session((FOSTER_CHECKER, foster_schema()))
    engine = DialogEngine()
    asked = 0
    answers = iter(["??", "1", "yes"])
    while True:
        action = engine.step(session)
        if isinstance(action, Conclude):
            break
        asked += 1
        engine.ingest_answer(session, next(answers))
        while session.pending is not None:
            asked += 1
            engine.ingest_answer(session, next(answers))
    assert session.budget.used == asked == len(session.transcript) == 3
