"""Checker synthesis: natural-language requirements to rule programs.

A code model is prompted with the requirement text plus the restricted
grammar; emissions that fail to parse are re-prompted with the parse error
appended and the attempt number substituted into the template's attempt
slot. Each key the program reads then gets a slot constraint: a type query
(int / float / choice), and for choices an enumeration query whose result
must cover every string literal the program compares against that key —
otherwise the enumeration is retried.
"""

from __future__ import annotations

import ast as python_ast
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .gateway import (
    CompletionRequest,
    Gateway,
    choice_set,
    strip_code_fence,
    user,
)
from .rules import KeyPath, RuleError, RuleProgram, parse_program, pretty_print, save_checker
from .store import (
    FeatureSchema,
    SlotConstraint,
    choice_slot,
    integer_slot,
    real_slot,
    save_schema,
)


class SynthesisError(Exception):
    """Base class for synthesis failures."""


class SynthesisExhausted(SynthesisError):
    """No parseable checker within the attempt budget."""

    def __init__(self, opportunity_id: str, errors: list[str]):
        detail = "; ".join(f"attempt {i + 1}: {e}" for i, e in enumerate(errors))
        super().__init__(f"could not synthesize {opportunity_id!r}: {detail}")
        self.errors = errors


class ChoicesIncomplete(SynthesisError):
    """The enumerated choice list never covered the literals the program
    compares against the key."""

    def __init__(self, key: KeyPath, missing: list[str]):
        super().__init__(f"choices for {key} never included {missing!r}")
        self.key = key
        self.missing = missing


@dataclass(frozen=True)
class RequirementDoc:
    opportunity_id: str
    title: str
    body: str

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise ValueError("requirement body must be non-empty")


@dataclass
class SynthesisResult:
    program: RuleProgram
    schema: FeatureSchema
    attempts: int
    raw_generations: list[str] = field(default_factory=list)


DEFAULT_MAX_ATTEMPTS = 3
_CODE_MAX_TOKENS = 1024


def load_requirements(directory: str | Path) -> list[RequirementDoc]:
    """Read every <opportunity_id>.txt in a directory, sorted by id. The
    first non-blank line doubles as the title."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"requirements directory not found: {directory}")
    docs = []
    for path in sorted(directory.glob("*.txt")):
        body = path.read_text(encoding="utf-8")
        title = next((line.strip() for line in body.splitlines() if line.strip()), path.stem)
        docs.append(RequirementDoc(opportunity_id=path.stem, title=title, body=body))
    return docs


def _render_preexisting(keys: list[KeyPath]) -> str:
    if not keys:
        return "(none)"
    return "\n".join(f"- {key}" for key in keys)


def _checker_prompt(doc: RequirementDoc, preexisting: list[KeyPath], attempt: int) -> str:
    base = prompts.GENERATE_CHECKER_PROMPT.format(
        attempt_no=f"Attempt {attempt}",
        eligibility_requirement=doc.body,
        preexisting_keys=_render_preexisting(preexisting),
    )
    return f"{base}\n\n{prompts.CHECKER_GRAMMAR_NOTE}"


def generate_checker(
    gateway: Gateway,
    doc: RequirementDoc,
    preexisting_keys: list[KeyPath] | None = None,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> SynthesisResult:
    """Synthesize one opportunity's checker program plus the constraints
    for the new keys it reads (preexisting keys are reused, not redefined)."""
    preexisting = list(preexisting_keys or [])
    raw_generations: list[str] = []
    errors: list[str] = []
    program: RuleProgram | None = None
    attempts = 0
    for attempt in range(1, max_attempts + 1):
        attempts = attempt
        prompt = _checker_prompt(doc, preexisting, attempt)
        if errors:
            prompt += f"\n\nYour previous code failed to parse: {errors[-1]}"
        raw = gateway.complete(
            CompletionRequest((user(prompt),), temperature=0.0, max_tokens=_CODE_MAX_TOKENS)
        )
        raw_generations.append(raw)
        try:
            program = parse_program(strip_code_fence(raw), doc.opportunity_id)
            break
        except RuleError as exc:
            errors.append(str(exc))
    if program is None:
        raise SynthesisExhausted(doc.opportunity_id, errors)

    preexisting_names = {key.key for key in preexisting}
    schema = FeatureSchema()
    for pattern in program.keys_read():
        if pattern.key in preexisting_names:
            continue
        schema = schema.define(pattern, infer_constraint(gateway, pattern, program, doc))
    return SynthesisResult(
        program=program, schema=schema, attempts=attempts, raw_generations=raw_generations
    )


def infer_constraint(
    gateway: Gateway,
    key: KeyPath,
    program: RuleProgram,
    doc: RequirementDoc,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> SlotConstraint:
    prompt = prompts.GET_TYPE_PROMPT.format(
        eligibility_requirements=doc.body, code=pretty_print(program), key=key.key
    )
    kind = gateway.complete_constrained(
        CompletionRequest((user(prompt),), temperature=0.0),
        choice_set("int", "float", "choice"),
        max_attempts=max_attempts,
    )
    if kind == "int":
        return integer_slot()
    if kind == "float":
        return real_slot()
    return choice_slot(*enumerate_choices(gateway, key, program, doc, max_attempts))


def _parse_string_list(raw: str) -> list[str]:
    text = strip_code_fence(raw)
    for parser in (json.loads, python_ast.literal_eval):
        try:
            parsed = parser(text)
        except (ValueError, SyntaxError):
            continue
        if isinstance(parsed, list) and all(isinstance(v, str) for v in parsed):
            return parsed
        break
    raise ValueError(f"not a list of strings: {raw!r}")


def enumerate_choices(
    gateway: Gateway,
    key: KeyPath,
    program: RuleProgram,
    doc: RequirementDoc,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> list[str]:
    """Possible values for a choice key. Retries until the list covers every
    literal the program compares against the key; order-preserving dedup."""
    required = program.compared_literals(key.pattern)
    prompt = prompts.GET_VALUES_PROMPT.format(
        eligibility_requirements=doc.body, code=pretty_print(program), key=key.key
    )
    missing: list[str] = []
    for _ in range(max_attempts):
        raw = gateway.complete(CompletionRequest((user(prompt),), temperature=0.0))
        try:
            values = _parse_string_list(raw)
        except ValueError:
            missing = required or missing
            continue
        deduped = list(dict.fromkeys(values))
        missing = [lit for lit in required if lit not in deduped]
        if not missing:
            return deduped
    raise ChoicesIncomplete(key, missing)


def synthesize_corpus(
    gateway: Gateway,
    requirements_dir: str | Path,
    out_dir: str | Path,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> dict[str, SynthesisResult]:
    """Synthesize every requirement doc into <out_dir>/<id>.rule plus
    <id>.schema.json. Keys are shared across opportunities: once defined,
    later checkers reuse a key rather than redefining it, and each schema
    file is self-contained (it lists every key its program reads)."""
    out_dir = Path(out_dir)
    accumulated: dict[str, tuple[KeyPath, SlotConstraint]] = {}
    results: dict[str, SynthesisResult] = {}
    for doc in load_requirements(requirements_dir):
        result = generate_checker(
            gateway,
            doc,
            preexisting_keys=[pattern for pattern, _ in accumulated.values()],
            max_attempts=max_attempts,
        )
        for pattern in result.schema:
            accumulated[pattern.key] = (pattern, result.schema.constraint_for(pattern))
        full = FeatureSchema(
            {
                accumulated[pattern.key][0]: accumulated[pattern.key][1]
                for pattern in result.program.keys_read()
            }
        )
        result.schema = full
        save_checker(out_dir, result.program)
        save_schema(out_dir, doc.opportunity_id, full)
        results[doc.opportunity_id] = result
    return results
