"""Typed, schema-validated feature store.

Answers arrive as raw text; each slot's constraint parses and validates
the canonical form (integer, real, or one of an enumerated choice list)
and the typed value is stored. Reads of never-stored keys return the MISS
sentinel that drives the dialog; writes are append-only within a session,
so a second put to the same key is a loud OverwriteFault rather than a
silent revision.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

from .rules import MISS, KeyPath, Scope, Value, household_key, member_key


class StoreError(Exception):
    """Base class for schema and store errors."""


class DuplicateSlot(StoreError):
    """A slot key was defined twice."""


class UndefinedSlot(StoreError):
    """A key outside the schema was read or written — a checker/schema bug."""


class OverwriteFault(StoreError):
    """A second put to an already-stored key."""


class SchemaConflict(StoreError):
    """Two schemas define the same key with different scope or constraint."""


class ValidationError(StoreError):
    """Raw text does not parse as a valid value for its slot. This is the
    signal that triggers a clarification turn, never a crash."""

    def __init__(self, key: KeyPath, raw: str, constraint: "SlotConstraint"):
        super().__init__(f"{raw!r} is not {constraint.describe()} (for {key})")
        self.key = key
        self.raw = raw
        self.constraint = constraint


class ConstraintKind(str, enum.Enum):
    INTEGER = "integer"
    REAL = "real"
    CHOICE = "choice"


_INT_RE = re.compile(r"^[+-]?\d+$")


@dataclass(frozen=True)
class SlotConstraint:
    kind: ConstraintKind
    choices: tuple[str, ...] = ()
    low: float | None = None
    high: float | None = None

    def __post_init__(self) -> None:
        if self.kind is ConstraintKind.CHOICE:
            if not self.choices:
                raise ValueError("choice slots need a non-empty choice list")
            folded = [c.strip().casefold() for c in self.choices]
            if len(set(folded)) != len(folded):
                raise ValueError("choice list has duplicates")
            if self.low is not None or self.high is not None:
                raise ValueError("choice slots carry no bounds")
        else:
            if self.choices:
                raise ValueError("numeric slots carry no choice list")
            if self.low is not None and self.high is not None and self.low > self.high:
                raise ValueError("bounds must satisfy low <= high")

    def parse(self, raw: str) -> Value:
        """Parse canonical raw text into a typed value, or raise ValueError.

        Only canonical forms are accepted here ("1", "2.5", an enumerated
        choice up to case and surrounding whitespace); mapping free text
        like "one" onto a canonical form is the dialog's extraction job.
        """
        text = raw.strip()
        if not text:
            raise ValueError("empty answer")
        if self.kind is ConstraintKind.INTEGER:
            if not _INT_RE.match(text):
                raise ValueError(f"{text!r} is not an integer")
            return self._check_bounds(int(text))
        if self.kind is ConstraintKind.REAL:
            try:
                value = float(text)
            except ValueError:
                raise ValueError(f"{text!r} is not a number") from None
            if not math.isfinite(value):
                raise ValueError("number must be finite")
            return self._check_bounds(value)
        folded = text.casefold()
        for choice in self.choices:
            if choice.strip().casefold() == folded:
                return choice
        raise ValueError(f"{text!r} is not one of the listed choices")

    def _check_bounds(self, value: int | float) -> int | float:
        if self.low is not None and value < self.low:
            raise ValueError(f"{value} is below the minimum {self.low}")
        if self.high is not None and value > self.high:
            raise ValueError(f"{value} is above the maximum {self.high}")
        return value

    def admits(self, value: object) -> bool:
        """Whether an already-typed value satisfies this constraint."""
        if self.kind is ConstraintKind.INTEGER:
            return (
                isinstance(value, int)
                and not isinstance(value, bool)
                and (self.low is None or value >= self.low)
                and (self.high is None or value <= self.high)
            )
        if self.kind is ConstraintKind.REAL:
            return (
                isinstance(value, (int, float))
                and not isinstance(value, bool)
                and math.isfinite(value)
                and (self.low is None or value >= self.low)
                and (self.high is None or value <= self.high)
            )
        return isinstance(value, str) and value in self.choices

    def describe(self) -> str:
        """Human-readable constraint, used in questions and prompts."""
        if self.kind is ConstraintKind.CHOICE:
            return "one of: " + ", ".join(self.choices)
        noun = "an integer" if self.kind is ConstraintKind.INTEGER else "a number"
        if self.low is not None and self.high is not None:
            return f"{noun} between {self.low} and {self.high}"
        if self.low is not None:
            return f"{noun} of at least {self.low}"
        if self.high is not None:
            return f"{noun} of at most {self.high}"
        return noun


def integer_slot(low: int | None = None, high: int | None = None) -> SlotConstraint:
    return SlotConstraint(ConstraintKind.INTEGER, low=low, high=high)


def real_slot(low: float | None = None, high: float | None = None) -> SlotConstraint:
    return SlotConstraint(ConstraintKind.REAL, low=low, high=high)


def choice_slot(*choices: str) -> SlotConstraint:
    return SlotConstraint(ConstraintKind.CHOICE, choices=tuple(choices))


@dataclass(frozen=True)
class FeatureSchema:
    """Slot constraints keyed by pattern: (household | any-member) × key.

    A key name belongs to exactly one scope, so checkers and answers can
    never alias a household feature with a member feature.
    """

    slots: Mapping[KeyPath, SlotConstraint] = field(default_factory=dict)

    def __post_init__(self) -> None:
        names: set[str] = set()
        for pattern in self.slots:
            if pattern.pattern != pattern:
                raise ValueError(f"schema patterns carry no member index: {pattern}")
            if pattern.key in names:
                raise ValueError(f"key {pattern.key!r} defined in more than one scope")
            names.add(pattern.key)

    def define(self, pattern: KeyPath, constraint: SlotConstraint) -> "FeatureSchema":
        """A new schema with one more slot; this schema is unchanged."""
        if any(existing.key == pattern.key for existing in self.slots):
            raise DuplicateSlot(f"slot {pattern.key!r} is already defined")
        return FeatureSchema({**self.slots, pattern.pattern: constraint})

    def constraint_for(self, key: KeyPath) -> SlotConstraint:
        try:
            return self.slots[key.pattern]
        except KeyError:
            raise UndefinedSlot(f"no slot for {key} in schema") from None

    def __contains__(self, key: KeyPath) -> bool:
        return key.pattern in self.slots

    def __iter__(self) -> Iterator[KeyPath]:
        return iter(self.slots)

    def __len__(self) -> int:
        return len(self.slots)


def union_schemas(*schemas: FeatureSchema) -> FeatureSchema:
    """Merge schemas; identical re-definitions collapse, different ones fail."""
    merged: dict[KeyPath, SlotConstraint] = {}
    by_name: dict[str, KeyPath] = {}
    for schema in schemas:
        for pattern, constraint in schema.slots.items():
            if pattern.key in by_name and by_name[pattern.key] != pattern:
                raise SchemaConflict(f"key {pattern.key!r} appears in two scopes")
            if pattern in merged and merged[pattern] != constraint:
                raise SchemaConflict(f"conflicting constraints for {pattern}")
            merged[pattern] = constraint
            by_name[pattern.key] = pattern
    return FeatureSchema(merged)


class FeatureStore:
    """Single-session store: one household record plus per-member records.

    Member records grow on demand as member-scoped puts arrive; reading an
    index that was never written is a miss, same as any unknown key.
    """

    def __init__(self, schema: FeatureSchema):
        self.schema = schema
        self.household: dict[str, Value] = {}
        self.members: list[dict[str, Value]] = []

    def get(self, key: KeyPath) -> object:
        constraint = self.schema.constraint_for(key)
        del constraint  # existence check only
        if key.scope is Scope.HOUSEHOLD:
            return self.household.get(key.key, MISS)
        if key.member_index is None:
            raise UndefinedSlot(f"member reads need a concrete index: {key}")
        if key.member_index >= len(self.members):
            return MISS
        return self.members[key.member_index].get(key.key, MISS)

    def put(self, key: KeyPath, raw: str) -> "FeatureStore":
        constraint = self.schema.constraint_for(key)
        try:
            value = constraint.parse(raw)
        except ValueError:
            raise ValidationError(key, raw, constraint) from None
        record = self._record_for_write(key)
        if key.key in record:
            raise OverwriteFault(f"{key} was already answered")
        record[key.key] = value
        return self

    def _record_for_write(self, key: KeyPath) -> dict[str, Value]:
        if key.scope is Scope.HOUSEHOLD:
            return self.household
        if key.member_index is None:
            raise UndefinedSlot(f"member writes need a concrete index: {key}")
        while len(self.members) <= key.member_index:
            self.members.append({})
        return self.members[key.member_index]

    def known_keys(self) -> list[KeyPath]:
        keys = [household_key(k) for k in self.household]
        for index, record in enumerate(self.members):
            keys.extend(member_key(k, index) for k in record)
        return keys

    def copy(self) -> "FeatureStore":
        twin = FeatureStore(self.schema)
        twin.household = dict(self.household)
        twin.members = [dict(m) for m in self.members]
        return twin

    def to_json(self) -> dict:
        return {"household": dict(self.household), "members": [dict(m) for m in self.members]}

    @classmethod
    def from_json(cls, schema: FeatureSchema, payload: Mapping) -> "FeatureStore":
        store = cls(schema)
        for key, value in payload.get("household", {}).items():
            store._restore(household_key(key), value)
        for index, record in enumerate(payload.get("members", [])):
            for key, value in record.items():
                store._restore(member_key(key, index), value)
        return store

    def _restore(self, key: KeyPath, value: object) -> None:
        constraint = self.schema.constraint_for(key)
        if not constraint.admits(value):
            raise ValidationError(key, str(value), constraint)
        self._record_for_write(key)[key.key] = value  # type: ignore[assignment]


# --- schema files (written by synthesis next to each checker) ---

def schema_to_json(schema: FeatureSchema) -> dict:
    out: dict[str, dict] = {}
    for pattern in sorted(schema, key=lambda p: (p.scope.value, p.key)):
        constraint = schema.constraint_for(pattern)
        spec: dict = {"scope": pattern.scope.value, "kind": constraint.kind.value}
        if constraint.choices:
            spec["choices"] = list(constraint.choices)
        if constraint.low is not None:
            spec["low"] = constraint.low
        if constraint.high is not None:
            spec["high"] = constraint.high
        out[pattern.key] = spec
    return out


def schema_from_json(payload: Mapping) -> FeatureSchema:
    slots: dict[KeyPath, SlotConstraint] = {}
    for key, spec in payload.items():
        scope = Scope(spec["scope"])
        constraint = SlotConstraint(
            ConstraintKind(spec["kind"]),
            choices=tuple(spec.get("choices", ())),
            low=spec.get("low"),
            high=spec.get("high"),
        )
        slots[KeyPath(scope, key)] = constraint
    return FeatureSchema(slots)


def save_schema(directory: str | Path, opportunity_id: str, schema: FeatureSchema) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{opportunity_id}.schema.json"
    path.write_text(json.dumps(schema_to_json(schema), indent=2) + "\n", encoding="utf-8")
    return path


def load_schema(path: str | Path) -> FeatureSchema:
    return schema_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def load_corpus_schemas(directory: str | Path) -> dict[str, FeatureSchema]:
    """Load every <id>.schema.json in a rule corpus directory."""
    directory = Path(directory)
    schemas: dict[str, FeatureSchema] = {}
    for path in sorted(directory.glob("*.schema.json")):
        opportunity_id = path.name[: -len(".schema.json")]
        schemas[opportunity_id] = load_schema(path)
    return dict(sorted(schemas.items()))
