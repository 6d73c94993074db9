"""Simulated households and the users who answer for them.

Two samplers produce HouseholdProfiles: a diverse sampler (uniform draws,
nudged toward checker comparison thresholds so both branch outcomes show
up) and a representative sampler driven by per-feature distribution
descriptors. Both reject profiles that violate the declarative consistency
rules. Profiles render to deterministic natural-language text, and two
responders answer questions about them: a deterministic oracle over the
structured profile, and an LLM responder given only the rendered text.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .gateway import CompletionRequest, Gateway, system, user
from .rules import (
    BinOp,
    KeyPath,
    Lit,
    Lookup,
    RuleProgram,
    Scope,
    Value,
    household_key,
    member_key,
)
from .store import ConstraintKind, FeatureSchema, FeatureStore, SlotConstraint

MAX_MEMBERS = 6
SIZE_KEY = "size"
CANNOT_ANSWER = "I cannot answer that"


class SimUserError(Exception):
    pass


class ConstraintUnsatisfiable(SimUserError):
    """Rejection sampling could not satisfy the consistency rules."""


class MissingDistribution(SimUserError):
    def __init__(self, feature: str):
        super().__init__(f"no distribution configured for feature {feature!r}")
        self.feature = feature


@dataclass
class HouseholdProfile:
    household_features: dict[str, Value]
    members: list[dict[str, Value]]
    gold: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 1 <= len(self.members) <= MAX_MEMBERS:
            raise ValueError(f"households have 1..{MAX_MEMBERS} members")

    def to_json(self) -> dict:
        payload: dict = {
            "household": dict(self.household_features),
            "members": [dict(m) for m in self.members],
        }
        if self.gold:
            payload["gold"] = dict(self.gold)
        return payload

    @classmethod
    def from_json(cls, payload: Mapping) -> "HouseholdProfile":
        return cls(
            household_features=dict(payload["household"]),
            members=[dict(m) for m in payload["members"]],
            gold=dict(payload.get("gold", {})),
        )

    def to_store(self, schema: FeatureSchema) -> FeatureStore:
        """A fully-populated store for gold labeling and oracle evaluation."""
        return FeatureStore.from_json(
            schema, {"household": self.household_features, "members": self.members}
        )


@dataclass(frozen=True)
class ConsistencyRule:
    name: str
    message: str
    check: Callable[[HouseholdProfile], bool]  # True = consistent


def _members_with(profile: HouseholdProfile, feature: str) -> Iterable[tuple[int, Value]]:
    for index, record in enumerate(profile.members):
        if feature in record:
            yield index, record[feature]


CONSISTENCY_RULES: list[ConsistencyRule] = [
    ConsistencyRule(
        "size-matches-members",
        "the size feature must equal the member count",
        lambda p: p.household_features.get(SIZE_KEY, len(p.members)) == len(p.members),
    ),
    ConsistencyRule(
        "minor-not-grandparent",
        "a member under 18 cannot be a grandparent",
        lambda p: not any(
            record.get("age", 99) < 18 and record.get("relationship") == "grandparent"
            for record in p.members
        ),
    ),
    ConsistencyRule(
        "adult-not-foster-child",
        "a member 18 or older cannot be in foster care",
        lambda p: not any(
            record.get("age", 0) >= 18 and record.get("in_foster_care") == "yes"
            for record in p.members
        ),
    ),
    ConsistencyRule(
        "one-spouse",
        "at most one member is the spouse of the head",
        lambda p: sum(1 for _, v in _members_with(p, "relationship") if v == "spouse") <= 1,
    ),
    ConsistencyRule(
        "head-first",
        "member 0 is the head of household",
        lambda p: "relationship" not in p.members[0] or p.members[0]["relationship"] == "head",
    ),
]


def violated_rules(
    profile: HouseholdProfile, rules: Sequence[ConsistencyRule] = tuple(CONSISTENCY_RULES)
) -> list[str]:
    return [rule.name for rule in rules if not rule.check(profile)]


# --- thresholds from checkers, for branch-balanced numeric sampling ---

def collect_thresholds(programs: Iterable[RuleProgram]) -> dict[KeyPath, list[float]]:
    """Numeric literals each key is compared against, per key pattern."""
    thresholds: dict[KeyPath, set[float]] = {}
    for program in programs:
        for _, expr in program.expressions():
            if not (isinstance(expr, BinOp) and expr.op in ("<", "<=", ">=", ">", "==", "!=")):
                continue
            sides = ((expr.left, expr.right), (expr.right, expr.left))
            for lookup_side, lit_side in sides:
                if (
                    isinstance(lookup_side, Lookup)
                    and isinstance(lit_side, Lit)
                    and isinstance(lit_side.value, (int, float))
                    and not isinstance(lit_side.value, bool)
                ):
                    pattern = KeyPath(lookup_side.scope, lookup_side.key)
                    thresholds.setdefault(pattern, set()).add(float(lit_side.value))
    return {pattern: sorted(values) for pattern, values in thresholds.items()}


# --- samplers ---

_REJECTION_LIMIT = 500


def _default_bounds(constraint: SlotConstraint) -> tuple[float, float]:
    low = constraint.low if constraint.low is not None else 0
    if constraint.high is not None:
        high = constraint.high
    else:
        high = 100 if constraint.kind is ConstraintKind.INTEGER else 100000.0
    return low, high


def _sample_numeric(
    rng: random.Random,
    constraint: SlotConstraint,
    cutpoints: Sequence[float],
) -> Value:
    low, high = _default_bounds(constraint)
    integer = constraint.kind is ConstraintKind.INTEGER
    usable = [t for t in cutpoints if low <= t <= high]
    if usable and rng.random() < 0.5:
        pivot = rng.choice(usable)
        step = 1.0
        candidates = [
            min(max(pivot - step, low), high),
            min(max(pivot, low), high),
            min(max(pivot + step, low), high),
        ]
        value = rng.choice(candidates)
        return int(value) if integer else float(value)
    if integer:
        return rng.randint(int(low), int(high))
    return rng.uniform(low, high)


def _sample_value(
    rng: random.Random,
    constraint: SlotConstraint,
    cutpoints: Sequence[float],
) -> Value:
    if constraint.kind is ConstraintKind.CHOICE:
        return rng.choice(constraint.choices)
    return _sample_numeric(rng, constraint, cutpoints)


def _split_schema(schema: FeatureSchema) -> tuple[dict[str, SlotConstraint], dict[str, SlotConstraint]]:
    household: dict[str, SlotConstraint] = {}
    member: dict[str, SlotConstraint] = {}
    for pattern in schema:
        constraint = schema.constraint_for(pattern)
        if pattern.scope is Scope.HOUSEHOLD:
            household[pattern.key] = constraint
        else:
            member[pattern.key] = constraint
    return household, member


def _sample_size(rng: random.Random, constraint: SlotConstraint | None, draw) -> int:
    if draw is not None:
        return int(draw())
    low, high = (1, MAX_MEMBERS)
    if constraint is not None:
        if constraint.low is not None:
            low = max(low, int(constraint.low))
        if constraint.high is not None:
            high = min(high, int(constraint.high))
    return rng.randint(low, high)


def _sample_profiles(
    schema: FeatureSchema,
    rng: random.Random,
    n: int,
    value_for: Callable[[str, SlotConstraint], Value],
    size_draw,
    rules: Sequence[ConsistencyRule],
) -> list[HouseholdProfile]:
    household_slots, member_slots = _split_schema(schema)
    size_constraint = household_slots.get(SIZE_KEY)
    profiles: list[HouseholdProfile] = []
    for _ in range(n):
        for _attempt in range(_REJECTION_LIMIT):
            size = _sample_size(rng, size_constraint, size_draw)
            household_features: dict[str, Value] = {}
            if size_constraint is not None:
                household_features[SIZE_KEY] = size
            for key, constraint in household_slots.items():
                if key == SIZE_KEY:
                    continue
                household_features[key] = value_for(key, constraint)
            members = [
                {key: value_for(key, constraint) for key, constraint in member_slots.items()}
                for _ in range(size)
            ]
            profile = HouseholdProfile(household_features, members)
            if not violated_rules(profile, rules):
                profiles.append(profile)
                break
        else:
            raise ConstraintUnsatisfiable(
                f"no consistent profile within {_REJECTION_LIMIT} attempts"
            )
    return profiles


def sample_diverse(
    schema: FeatureSchema,
    seed: int,
    n: int,
    thresholds: Mapping[KeyPath, Sequence[float]] | None = None,
    rules: Sequence[ConsistencyRule] = tuple(CONSISTENCY_RULES),
) -> list[HouseholdProfile]:
    """Uniform feature draws with numeric values nudged toward checker
    thresholds, so small samples still realize both outcomes of most
    comparisons. Deterministic for a given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    cutmap = dict(thresholds or {})

    def value_for(key: str, constraint: SlotConstraint) -> Value:
        pattern_h = household_key(key)
        pattern_m = member_key(key)
        cutpoints = list(cutmap.get(pattern_h, ())) + list(cutmap.get(pattern_m, ()))
        return _sample_value(rng, constraint, cutpoints)

    return _sample_profiles(schema, rng, n, value_for, None, rules)


# --- representative sampling from distribution descriptors ---

def _validate_descriptor(feature: str, descriptor: Mapping) -> None:
    kind = descriptor.get("kind")
    if kind == "categorical":
        table = descriptor.get("table", {})
        if not table:
            raise ValueError(f"{feature}: categorical table is empty")
        total = sum(table.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"{feature}: categorical probabilities sum to {total}, not 1")
    elif kind == "uniform":
        if descriptor.get("low") is None or descriptor.get("high") is None:
            raise ValueError(f"{feature}: uniform needs low and high")
    elif kind == "mixture":
        components = descriptor.get("components", [])
        if not components:
            raise ValueError(f"{feature}: mixture needs components")
        total = sum(c.get("weight", 0) for c in components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"{feature}: mixture weights sum to {total}, not 1")
    else:
        raise ValueError(f"{feature}: unknown distribution kind {kind!r}")


def load_distributions(path: str | Path) -> dict[str, dict]:
    """Distribution config: JSON mapping feature name → descriptor."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    for feature, descriptor in payload.items():
        _validate_descriptor(feature, descriptor)
    return payload


def _draw_from_descriptor(
    rng: random.Random, descriptor: Mapping, constraint: SlotConstraint
):
    kind = descriptor["kind"]
    if kind == "categorical":
        table = descriptor["table"]
        roll = rng.random()
        cumulative = 0.0
        chosen = None
        for raw_value, probability in table.items():
            cumulative += probability
            if roll <= cumulative:
                chosen = raw_value
                break
        if chosen is None:
            chosen = list(table)[-1]
        return constraint.parse(str(chosen))
    if kind == "uniform":
        low, high = descriptor["low"], descriptor["high"]
        if constraint.kind is ConstraintKind.INTEGER:
            return rng.randint(int(low), int(high))
        return rng.uniform(low, high)
    components = descriptor["components"]
    roll = rng.random()
    cumulative = 0.0
    component = components[-1]
    for candidate in components:
        cumulative += candidate["weight"]
        if roll <= cumulative:
            component = candidate
            break
    if constraint.kind is ConstraintKind.INTEGER:
        return rng.randint(int(component["low"]), int(component["high"]))
    return rng.uniform(component["low"], component["high"])


def sample_representative(
    schema: FeatureSchema,
    distributions: Mapping[str, Mapping],
    seed: int,
    n: int,
    rules: Sequence[ConsistencyRule] = tuple(CONSISTENCY_RULES),
) -> list[HouseholdProfile]:
    """Per-feature independent draws from configured distributions, with
    the same consistency rejection as the diverse sampler."""
    if n < 1:
        raise ValueError("n must be >= 1")
    for feature, descriptor in distributions.items():
        _validate_descriptor(feature, descriptor)
    rng = random.Random(seed)
    household_slots, member_slots = _split_schema(schema)
    for key in list(household_slots) + list(member_slots):
        if key not in distributions:
            raise MissingDistribution(key)

    def value_for(key: str, constraint: SlotConstraint) -> Value:
        return _draw_from_descriptor(rng, distributions[key], constraint)

    size_draw = None
    if SIZE_KEY in household_slots:
        size_slot = household_slots[SIZE_KEY]
        size_draw = lambda: _draw_from_descriptor(rng, distributions[SIZE_KEY], size_slot)
    return _sample_profiles(schema, rng, n, value_for, size_draw, rules)


# --- rendering ---

def render_value(value: Value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    return str(value)


def render_profile(profile: HouseholdProfile) -> str:
    """Deterministic natural-language profile: a household paragraph, then
    one paragraph per member; every feature appears exactly once."""
    lines = [f"The household has {len(profile.members)} member(s)."]
    for feature in sorted(profile.household_features):
        if feature == SIZE_KEY:
            continue
        value = render_value(profile.household_features[feature])
        lines.append(f"The household's {feature} is {value}.")
    paragraphs = [" ".join(lines)]
    for index, record in enumerate(profile.members):
        sentences = [
            f"Person {index}'s {feature} is {render_value(record[feature])}."
            for feature in sorted(record)
        ]
        if sentences:
            paragraphs.append(" ".join(sentences))
        else:
            paragraphs.append(f"Person {index} has nothing on record.")
    return "\n\n".join(paragraphs)


# --- responders ---

_MEMBER_FEATURE_RE = re.compile(
    r"what is the (?P<feature>[a-z0-9_ ]+?) of person (?P<index>\d+)\?", re.IGNORECASE
)
_HOUSEHOLD_FEATURE_RE = re.compile(
    r"what is the household's (?P<feature>[a-z0-9_ ]+?)\?", re.IGNORECASE
)
_SIZE_RE = re.compile(
    r"how many (?:members|people) (?:are |live )?in (?:the|your) household\?", re.IGNORECASE
)
_YESNO_RE = re.compile(
    r"is person (?P<index>\d+) (?P<feature>[a-z0-9_ ]+?)\?", re.IGNORECASE
)
_COUNT_RE = re.compile(
    r"how many (?:household )?(?:members|children|people) .*?"
    r"(?P<direction>under|over|at least|at most) (?:the age of )?(?P<bound>\d+)",
    re.IGNORECASE,
)


def _normalize_feature(raw: str) -> str:
    return raw.strip().lower().replace(" ", "_")


class OracleUser:
    """Deterministic responder over the structured profile.

    Handles direct feature lookups by member index, household features,
    household size, yes/no member questions, and age-threshold counts
    (two-hop); anything deeper gets the literal refusal."""

    def __init__(self, profile: HouseholdProfile):
        self.profile = profile

    def answer(self, question: str) -> str:
        text = question.strip()
        match = _SIZE_RE.search(text)
        if match:
            return str(len(self.profile.members))
        match = _MEMBER_FEATURE_RE.search(text)
        if match:
            return self._member_feature(int(match.group("index")), match.group("feature"))
        match = _HOUSEHOLD_FEATURE_RE.search(text)
        if match:
            feature = _normalize_feature(match.group("feature"))
            if feature == SIZE_KEY:
                return str(len(self.profile.members))
            value = self.profile.household_features.get(feature)
            return CANNOT_ANSWER if value is None else render_value(value)
        match = _COUNT_RE.search(text)
        if match:
            return self._count_by_age(match.group("direction"), int(match.group("bound")))
        match = _YESNO_RE.search(text)
        if match:
            return self._member_feature(int(match.group("index")), match.group("feature"))
        return CANNOT_ANSWER

    def _member_feature(self, index: int, raw_feature: str) -> str:
        feature = _normalize_feature(raw_feature)
        if index >= len(self.profile.members):
            return CANNOT_ANSWER
        value = self.profile.members[index].get(feature)
        return CANNOT_ANSWER if value is None else render_value(value)

    def _count_by_age(self, direction: str, bound: int) -> str:
        ages = [record.get("age") for record in self.profile.members]
        if any(age is None for age in ages):
            return CANNOT_ANSWER
        direction = direction.lower()
        if direction == "under":
            count = sum(1 for age in ages if age < bound)
        elif direction == "over":
            count = sum(1 for age in ages if age > bound)
        elif direction == "at least":
            count = sum(1 for age in ages if age >= bound)
        else:
            count = sum(1 for age in ages if age <= bound)
        return str(count)


class LlmUser:
    """Responder that answers from the rendered profile text via the
    gateway, mirroring a human reading their own details."""

    def __init__(self, gateway: Gateway, profile_text: str, model: str = "default"):
        self.gateway = gateway
        self.profile_text = profile_text
        self.model = model

    def answer(self, question: str) -> str:
        request = CompletionRequest(
            (
                system(
                    "You are answering questions on behalf of the household "
                    "described below. Answer concisely and only from these "
                    f"facts; if the answer is not in them, say \"{CANNOT_ANSWER}\".\n\n"
                    + self.profile_text
                ),
                user(question),
            ),
            temperature=0.0,
            model=self.model,
        )
        return self.gateway.complete(request)
