"""Adaptive eligibility interview engine.

The engine runs checker programs against a shared feature store and turns
the first blocking ``Missing`` feature into a question.  Answers are parsed
directly when they already fit the slot, extracted via a constrained model
call otherwise, and stored; checkers that stop missing features settle into
decisions.  A session concludes when every checker decided, or falls back to
predicting the stragglers when the turn budget runs out or an answer never
materializes.

The dance is deliberately frugal: features shared between checkers are asked
once, and branches that code around a feature never trigger a question for
it.  With deterministic question templates and a rule-driven responder the
whole loop runs without a single model call.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .gateway import (
    CompletionRequest,
    ConstraintExhausted,
    Gateway,
    Message,
    OutputConstraint,
    ProviderRefusal,
    TransportError,
    assistant,
    bool_array_output,
    choice_set,
    integer_output,
    real_output,
    user,
)
from .prompts import EXTRACT_VALUE_PROMPT, KEY_ERROR_PROMPT, PREDICT_PROMPT, render_example_array
from .rules import (
    Decision,
    KeyPath,
    Missing,
    RuleProgram,
    Scope,
    describe_node,
    evaluate,
    household_key,
    member_key,
    pretty_print,
)
from .rules.evaluator import SIZE_KEY
from .store import (
    ConstraintKind,
    FeatureSchema,
    FeatureStore,
    SlotConstraint,
    ValidationError,
    union_schemas,
)
from .synthesis import RequirementDoc

MAX_CLARITY_ATTEMPTS = 3
TURNS_PER_OPPORTUNITY = 20
TURN_CAP = 100

_REPEAT_MARKER = "To repeat: "


class DialogError(Exception):
    pass


class SessionStateError(DialogError):
    """An operation was called in the wrong phase of the interview."""


# --- data model ---


@dataclass
class TurnBudget:
    max_turns: int
    used: int = 0

    @property
    def exhausted(self) -> bool:
        return self.used >= self.max_turns

    def to_json(self) -> dict:
        return {"max_turns": self.max_turns, "used": self.used}


def budget_for(num_opportunities: int) -> TurnBudget:
    return TurnBudget(min(TURNS_PER_OPPORTUNITY * num_opportunities, TURN_CAP))


@dataclass
class PendingQuestion:
    key: KeyPath
    question: str
    clarity_attempts_used: int
    source_node: int
    source_program: str


@dataclass(frozen=True)
class Turn:
    question: str
    answer: str
    key: KeyPath
    extracted: object  # canonical stored value, None unless outcome "stored"
    outcome: str  # "stored" | "clarified" | "abandoned"

    def to_json(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "key": _key_to_json(self.key),
            "extracted": self.extracted,
            "outcome": self.outcome,
        }


@dataclass(frozen=True)
class Ask:
    question: str


@dataclass(frozen=True)
class Conclude:
    decisions: dict[str, bool]


@dataclass
class Session:
    session_id: str
    checkers: tuple[tuple[RuleProgram, FeatureSchema], ...]
    store: FeatureStore
    transcript: list[Turn] = field(default_factory=list)
    pending: PendingQuestion | None = None
    budget: TurnBudget = field(default_factory=lambda: TurnBudget(TURN_CAP))
    decisions: dict[str, bool] | None = None
    fallback_warning: bool = False

    @property
    def unanswerable(self) -> frozenset[KeyPath]:
        return frozenset(t.key for t in self.transcript if t.outcome == "abandoned")

    def history(self) -> tuple[tuple[str, str], ...]:
        return tuple((t.question, t.answer) for t in self.transcript)

    def program(self, opportunity_id: str) -> RuleProgram:
        for program, _ in self.checkers:
            if program.opportunity_id == opportunity_id:
                return program
        raise KeyError(opportunity_id)


def open_session(
    checkers: Iterable[RuleProgram],
    schemas: Mapping[str, FeatureSchema],
    session_id: str | None = None,
) -> Session:
    """Start an interview over one or more checkers.

    Checkers run in lexicographic opportunity order; their schemas must
    merge cleanly (``SchemaConflict`` otherwise).  The turn budget scales
    with the number of opportunities, capped at 100.
    """
    ordered = sorted(checkers, key=lambda p: p.opportunity_id)
    if not ordered:
        raise ValueError("a session needs at least one checker")
    ids = [p.opportunity_id for p in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate opportunity ids")
    for oid in ids:
        if oid not in schemas:
            raise ValueError(f"no schema for opportunity {oid!r}")
    union = union_schemas(*(schemas[oid] for oid in ids))
    return Session(
        session_id=session_id or uuid.uuid4().hex,
        checkers=tuple((p, schemas[p.opportunity_id]) for p in ordered),
        store=FeatureStore(union),
        budget=budget_for(len(ordered)),
    )


# --- question formulation ---


class QuestionFormulator(Protocol):
    def formulate(
        self,
        key: KeyPath,
        slot: SlotConstraint,
        line: str,
        doc: RequirementDoc | None,
        history: Sequence[tuple[str, str]],
    ) -> str: ...

    def clarify(self, key: KeyPath, slot: SlotConstraint, base_question: str) -> str: ...


def humanize_key(key: KeyPath) -> str:
    return key.key.replace("_", " ")


def prompt_key(key: KeyPath) -> str:
    """Key rendering for model prompts, matching the hh[i]["k"] convention."""
    if key.scope is Scope.MEMBER and key.member_index is not None:
        return f"{key.key}_{key.member_index}"
    return key.key


def clarification_for(slot: SlotConstraint, base_question: str) -> str:
    return (
        "Sorry, I couldn't use that answer. "
        f"Please answer with {slot.describe()}. {_REPEAT_MARKER}{base_question}"
    )


def base_question_of(question: str) -> str:
    """Original question underneath any clarification wrapper."""
    index = question.rfind(_REPEAT_MARKER)
    return question[index + len(_REPEAT_MARKER):] if index >= 0 else question


class TemplateFormulator:
    """Deterministic question templates, tuned to what a rule-driven
    responder can parse back; no model in the loop."""

    def formulate(
        self,
        key: KeyPath,
        slot: SlotConstraint,
        line: str,
        doc: RequirementDoc | None,
        history: Sequence[tuple[str, str]],
    ) -> str:
        if key.scope is Scope.HOUSEHOLD:
            if key.key == SIZE_KEY:
                body = "How many members are in the household?"
            else:
                body = f"What is the household's {humanize_key(key)}?"
        else:
            body = f"What is the {humanize_key(key)} of person {key.member_index}?"
        return f"{body} ({slot.describe()})"

    def clarify(self, key: KeyPath, slot: SlotConstraint, base_question: str) -> str:
        return clarification_for(slot, base_question)


class LlmFormulator:
    """Questions phrased by the model from the blocking line of code."""

    def __init__(self, gateway: Gateway, model: str = "default"):
        self.gateway = gateway
        self.model = model

    def formulate(
        self,
        key: KeyPath,
        slot: SlotConstraint,
        line: str,
        doc: RequirementDoc | None,
        history: Sequence[tuple[str, str]],
    ) -> str:
        context = doc.body if doc is not None else "(not available)"
        prompt = KEY_ERROR_PROMPT.format(
            eligibility_requirements=context, line=line, key=prompt_key(key)
        )
        messages: list[Message] = []
        for question, answer in history:
            messages.append(assistant(question))
            messages.append(user(answer))
        messages.append(user(prompt))
        request = CompletionRequest(tuple(messages), max_tokens=256, model=self.model)
        text = self.gateway.complete(request).strip()
        return f"{text} ({slot.describe()})"

    def clarify(self, key: KeyPath, slot: SlotConstraint, base_question: str) -> str:
        return clarification_for(slot, base_question)


# --- the engine ---


def slot_output_constraint(slot: SlotConstraint) -> OutputConstraint:
    if slot.kind is ConstraintKind.INTEGER:
        return integer_output()
    if slot.kind is ConstraintKind.REAL:
        return real_output()
    return choice_set(*slot.choices)


class DialogEngine:
    """Drives one interview: pick the blocking feature, ask, ingest, settle.

    With no gateway the engine is fully deterministic: answers must parse
    directly against the slot, and budget-exhausted conclusions default any
    undecided opportunity to False (with ``fallback_warning`` set).
    """

    def __init__(
        self,
        formulator: QuestionFormulator | None = None,
        gateway: Gateway | None = None,
        docs: Mapping[str, RequirementDoc] | None = None,
        model: str = "default",
    ):
        self.formulator = formulator if formulator is not None else TemplateFormulator()
        self.gateway = gateway
        self.docs = dict(docs) if docs else {}
        self.model = model

    # - step -

    def step(self, session: Session) -> Ask | Conclude:
        """Advance the interview: next question, or the final decisions."""
        if session.pending is not None:
            raise SessionStateError("a question is already awaiting an answer")
        if session.decisions is not None:
            return Conclude(dict(session.decisions))
        decided, misses = self._evaluate_all(session)
        if not misses:
            session.decisions = decided
            return Conclude(dict(decided))
        askable = next(
            (pair for pair in misses if pair[1].key not in session.unanswerable), None
        )
        if askable is None or session.budget.exhausted:
            session.decisions = self._predict_undecided(
                session, decided, [program for program, _ in misses]
            )
            return Conclude(dict(session.decisions))
        program, miss = askable
        slot = session.store.schema.constraint_for(miss.key)
        line = describe_node(program, miss.node)
        doc = self.docs.get(program.opportunity_id)
        question = self.formulator.formulate(miss.key, slot, line, doc, session.history())
        session.pending = PendingQuestion(
            key=miss.key,
            question=question,
            clarity_attempts_used=0,
            source_node=miss.node,
            source_program=program.opportunity_id,
        )
        return Ask(question)

    def _evaluate_all(
        self, session: Session
    ) -> tuple[dict[str, bool], list[tuple[RuleProgram, Missing]]]:
        decided: dict[str, bool] = {}
        misses: list[tuple[RuleProgram, Missing]] = []
        for program, _ in session.checkers:
            outcome = evaluate(program, session.store)
            if isinstance(outcome, Decision):
                decided[program.opportunity_id] = outcome.eligible
            else:
                misses.append((program, outcome))
        return decided, misses

    # - ingest -

    def ingest_answer(self, session: Session, answer: str) -> Turn:
        """Consume the answer to the pending question; one turn of budget."""
        pending = session.pending
        if pending is None:
            raise SessionStateError("no question is awaiting an answer")
        session.budget.used += 1
        slot = session.store.schema.constraint_for(pending.key)
        stored, value = self._try_store(session, pending, slot, answer)
        if stored:
            turn = Turn(pending.question, answer, pending.key, value, "stored")
            session.pending = None
        elif (
            pending.clarity_attempts_used < MAX_CLARITY_ATTEMPTS
            and not session.budget.exhausted
        ):
            turn = Turn(pending.question, answer, pending.key, None, "clarified")
            pending.clarity_attempts_used += 1
            pending.question = self.formulator.clarify(
                pending.key, slot, base_question_of(pending.question)
            )
        else:
            turn = Turn(pending.question, answer, pending.key, None, "abandoned")
            session.pending = None
        session.transcript.append(turn)
        return turn

    def _try_store(
        self,
        session: Session,
        pending: PendingQuestion,
        slot: SlotConstraint,
        answer: str,
    ) -> tuple[bool, object]:
        try:
            session.store.put(pending.key, answer.strip())
            return True, session.store.get(pending.key)
        except ValidationError:
            pass
        if self.gateway is None:
            return False, None
        extracted = self._extract(session, pending, slot, answer)
        if extracted is None:
            return False, None
        try:
            session.store.put(pending.key, extracted)
            return True, session.store.get(pending.key)
        except ValidationError:
            return False, None

    def _extract(
        self,
        session: Session,
        pending: PendingQuestion,
        slot: SlotConstraint,
        answer: str,
    ) -> str | None:
        """Constrained extraction of the slot value from a free-form answer."""
        program = session.program(pending.source_program)
        doc = self.docs.get(pending.source_program)
        prompt = EXTRACT_VALUE_PROMPT.format(
            eligibility_requirements=doc.body if doc is not None else "(not available)",
            line=describe_node(program, pending.source_node),
            key=prompt_key(pending.key),
            cq=pending.question,
            answer=answer,
        )
        request = CompletionRequest((user(prompt),), max_tokens=64, model=self.model)
        try:
            value = self.gateway.complete_constrained(request, slot_output_constraint(slot))
        except (ConstraintExhausted, TransportError, ProviderRefusal):
            return None
        return str(value)

    # - conclude -

    def conclude_fallback(self, session: Session) -> dict[str, bool]:
        """Decide now: computed verdicts stay, the rest get predicted."""
        decided, misses = self._evaluate_all(session)
        session.decisions = self._predict_undecided(
            session, decided, [program for program, _ in misses]
        )
        return dict(session.decisions)

    def _predict_undecided(
        self,
        session: Session,
        decided: dict[str, bool],
        undecided: list[RuleProgram],
    ) -> dict[str, bool]:
        if not undecided:
            return decided
        predictions = self._predict_from_transcript(session, undecided)
        if predictions is None:
            session.fallback_warning = True
            predictions = [False] * len(undecided)
        return decided | {
            program.opportunity_id: verdict
            for program, verdict in zip(undecided, predictions)
        }

    def _predict_from_transcript(
        self, session: Session, undecided: list[RuleProgram]
    ) -> list[bool] | None:
        if self.gateway is None:
            return None
        requirements = "\n\n".join(self._requirement_text(p) for p in undecided)
        prompt = PREDICT_PROMPT.format(
            eligibility_requirements=requirements,
            num_programs=len(undecided),
            example_array=render_example_array(len(undecided)),
        )
        messages: list[Message] = []
        for question, answer in session.history():
            messages.append(assistant(question))
            messages.append(user(answer))
        messages.append(user(prompt))
        request = CompletionRequest(tuple(messages), max_tokens=128, model=self.model)
        try:
            values = self.gateway.complete_constrained(
                request, bool_array_output(len(undecided))
            )
        except (ConstraintExhausted, TransportError, ProviderRefusal):
            return None
        return list(values)

    def _requirement_text(self, program: RuleProgram) -> str:
        doc = self.docs.get(program.opportunity_id)
        return doc.body if doc is not None else pretty_print(program)


class Responder(Protocol):
    def answer(self, question: str) -> str: ...


def run_session(engine: DialogEngine, session: Session, responder: Responder) -> dict[str, bool]:
    """Interview loop: ask until every checker settles or the budget ends."""
    while True:
        action = engine.step(session)
        if isinstance(action, Conclude):
            return action.decisions
        while session.pending is not None:
            engine.ingest_answer(session, responder.answer(session.pending.question))


# --- persistence: one JSONL record per turn, then a decisions record ---


def _key_to_json(key: KeyPath) -> dict:
    record = {"scope": key.scope.value, "key": key.key}
    if key.member_index is not None:
        record["member_index"] = key.member_index
    return record


def _key_from_json(record: Mapping) -> KeyPath:
    if record["scope"] == Scope.HOUSEHOLD.value:
        return household_key(record["key"])
    return member_key(record["key"], record.get("member_index"))


def turn_record(session: Session, turn: Turn) -> dict:
    record = {"type": "turn", "session_id": session.session_id, **turn.to_json()}
    if turn.outcome == "clarified" and session.pending is not None:
        record["followup"] = session.pending.question
        record["source_node"] = session.pending.source_node
        record["source_program"] = session.pending.source_program
    return record


def decisions_record(session: Session) -> dict:
    if session.decisions is None:
        raise SessionStateError("session has not concluded")
    return {
        "type": "decisions",
        "session_id": session.session_id,
        "decisions": dict(session.decisions),
        "turns_used": session.budget.used,
        "fallback_warning": session.fallback_warning,
    }


def append_records(path: Path, records: Iterable[Mapping]) -> None:
    with path.open("a", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def read_records(path: Path) -> list[dict]:
    with path.open(encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def replay_session(
    session_id: str,
    records: Sequence[Mapping],
    checkers: Iterable[RuleProgram],
    schemas: Mapping[str, FeatureSchema],
) -> Session:
    """Rebuild a session from its log; the result can keep interviewing."""
    session = open_session(checkers, schemas, session_id=session_id)
    for record in records:
        if record.get("session_id") != session_id:
            continue
        if record["type"] == "turn":
            key = _key_from_json(record["key"])
            turn = Turn(
                question=record["question"],
                answer=record["answer"],
                key=key,
                extracted=record["extracted"],
                outcome=record["outcome"],
            )
            session.transcript.append(turn)
            session.budget.used += 1
            if turn.outcome == "stored":
                session.store.put(key, _raw_text(turn.extracted))
                session.pending = None
            elif turn.outcome == "clarified":
                attempts = (
                    session.pending.clarity_attempts_used + 1
                    if session.pending is not None and session.pending.key == key
                    else 1
                )
                session.pending = PendingQuestion(
                    key=key,
                    question=record["followup"],
                    clarity_attempts_used=attempts,
                    source_node=record["source_node"],
                    source_program=record["source_program"],
                )
            else:
                session.pending = None
        elif record["type"] == "decisions":
            session.decisions = dict(record["decisions"])
            session.fallback_warning = bool(record.get("fallback_warning", False))
    return session


def _raw_text(value: object) -> str:
    return str(value)
