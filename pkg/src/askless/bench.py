"""Benchmark machinery: coverage-guided dataset minimization, gold labeling,
run orchestration, and turn-aware metrics.

A dataset row is one household plus the opportunities it will be interviewed
about.  Minimization keeps only households (and per-household opportunities)
whose checker traces add code coverage, so a small dataset still exercises
every reachable statement.  Scoring is micro-F1 over user-opportunity pairs
on a 0-100 scale, discounted by dialog length: F1 / (T/100 + 1), which
leaves F1 untouched at zero turns and halves it at the 100-turn cap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .baselines import DIRECT, REACT, BaselineAgent, RandomAgent, run_baseline
from .dialog import (
    DialogEngine,
    Responder,
    decisions_record,
    open_session,
    run_session,
    turn_record,
)
from .gateway import Gateway
from .rules import Missing, RuleProgram, Trace, evaluate, evaluate_traced, pretty_print
from .simuser import HouseholdProfile, LlmUser, OracleUser, render_profile
from .store import FeatureSchema, union_schemas
from .synthesis import RequirementDoc

PROADA = "proada"
RANDOM = "random"
AGENTS = (PROADA, DIRECT, REACT, RANDOM)

ORACLE_USER = "oracle"
LLM_USER = "llm"
USERS = (ORACLE_USER, LLM_USER)

MOCK_PROVIDER = "mock"
HTTP_PROVIDER = "http"

CLARITY_POLICY = "clarification re-asks count toward the turn total"


class BenchError(Exception):
    pass


class EmptyDataset(BenchError):
    """Nothing to score: no rows, no opportunities, or no finished session."""


class IncompleteProfile(BenchError):
    def __init__(self, household: int, key):
        super().__init__(f"household {household} is missing feature {key}")
        self.household = household
        self.key = key


# --- dataset rows ---


@dataclass
class DatasetEntry:
    profile: HouseholdProfile
    opportunities: list[str]

    def to_json(self) -> dict:
        return {**self.profile.to_json(), "opportunities": list(self.opportunities)}

    @classmethod
    def from_json(cls, payload: Mapping) -> "DatasetEntry":
        return cls(
            profile=HouseholdProfile.from_json(payload),
            opportunities=list(payload["opportunities"]),
        )


def save_dataset(path: Path, entries: Iterable[DatasetEntry]) -> None:
    with path.open("w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry.to_json()) + "\n")


def load_dataset(path: Path) -> list[DatasetEntry]:
    with path.open(encoding="utf-8") as handle:
        return [DatasetEntry.from_json(json.loads(line)) for line in handle if line.strip()]


# --- gold labeling ---


def label_gold(
    profiles: Sequence[HouseholdProfile],
    checkers: Mapping[str, RuleProgram],
    schemas: Mapping[str, FeatureSchema],
) -> None:
    """Evaluate every checker on every fully-known household; fill gold."""
    schema = union_schemas(*(schemas[oid] for oid in sorted(checkers)))
    for index, profile in enumerate(profiles):
        store = profile.to_store(schema)
        for oid in sorted(checkers):
            outcome = evaluate(checkers[oid], store)
            if isinstance(outcome, Missing):
                raise IncompleteProfile(index, outcome.key)
            profile.gold[oid] = outcome.eligible


# --- coverage pool and minimization ---


@dataclass(frozen=True)
class CoverageEntry:
    household: int
    opportunity_id: str
    trace: Trace
    decision: bool

    @property
    def elements(self) -> frozenset[tuple[str, int]]:
        return frozenset((self.opportunity_id, nid) for nid in self.trace.executed)


@dataclass
class CoveragePool:
    entries: list[CoverageEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        pairs = [(e.household, e.opportunity_id) for e in self.entries]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate (household, opportunity) pair in pool")

    def households(self) -> list[int]:
        return sorted({e.household for e in self.entries})

    def covered(self) -> frozenset[tuple[str, int]]:
        out: set[tuple[str, int]] = set()
        for entry in self.entries:
            out |= entry.elements
        return frozenset(out)


def build_pool(
    profiles: Sequence[HouseholdProfile],
    checkers: Mapping[str, RuleProgram],
    schemas: Mapping[str, FeatureSchema],
) -> CoveragePool:
    """Trace every checker over every fully-known household."""
    schema = union_schemas(*(schemas[oid] for oid in sorted(checkers)))
    entries: list[CoverageEntry] = []
    for index, profile in enumerate(profiles):
        store = profile.to_store(schema)
        for oid in sorted(checkers):
            outcome, trace, _ = evaluate_traced(checkers[oid], store)
            if isinstance(outcome, Missing):
                raise IncompleteProfile(index, outcome.key)
            entries.append(CoverageEntry(index, oid, trace, outcome.eligible))
    return CoveragePool(entries)


def minimize_dataset(pool: CoveragePool) -> list[tuple[int, str]]:
    """Smallest-ish selection of (household, opportunity) pairs that keeps
    every covered statement covered.

    Phase 1 greedily picks households by marginal coverage (ties to the
    lowest index).  Phase 2 prunes pairs that no longer contribute unique
    statements, scanning (household, opportunity) ascending to a fixpoint.
    """
    if not pool.entries:
        raise ValueError("empty coverage pool")
    by_household: dict[int, list[CoverageEntry]] = {}
    for entry in pool.entries:
        by_household.setdefault(entry.household, []).append(entry)

    covered: set[tuple[str, int]] = set()
    chosen: list[int] = []
    remaining = pool.households()
    while remaining:
        best, best_gain = None, 0
        for household in remaining:  # ascending: first max wins ties
            union: set[tuple[str, int]] = set()
            for entry in by_household[household]:
                union |= entry.elements
            gain = len(union - covered)
            if gain > best_gain:
                best, best_gain = household, gain
        if best is None:
            break
        chosen.append(best)
        remaining.remove(best)
        for entry in by_household[best]:
            covered |= entry.elements

    selected: dict[tuple[int, str], frozenset[tuple[str, int]]] = {
        (entry.household, entry.opportunity_id): entry.elements
        for household in chosen
        for entry in by_household[household]
    }
    removed = True
    while removed:
        removed = False
        for pair in sorted(selected):
            others: set[tuple[str, int]] = set()
            for other, elements in selected.items():
                if other != pair:
                    others |= elements
            if selected[pair] <= others:
                del selected[pair]
                removed = True
    return sorted(selected)


def dataset_from_selection(
    profiles: Sequence[HouseholdProfile], pairs: Sequence[tuple[int, str]]
) -> list[DatasetEntry]:
    """Fold selected pairs into one dataset row per surviving household."""
    grouped: dict[int, list[str]] = {}
    for household, oid in sorted(pairs):
        grouped.setdefault(household, []).append(oid)
    return [
        DatasetEntry(profile=profiles[household], opportunities=oids)
        for household, oids in sorted(grouped.items())
    ]


# --- metrics ---


def micro_f1(pairs: Sequence[tuple[bool, bool]]) -> tuple[float, float, float]:
    """Micro precision/recall/F1 over (prediction, gold) pairs, 0-100 scale.
    No true positives means F1 = 0, even when the labels agree vacuously."""
    if not pairs:
        raise ValueError("micro_f1 needs at least one pair")
    tp = sum(1 for pred, gold in pairs if pred and gold)
    fp = sum(1 for pred, gold in pairs if pred and not gold)
    fn = sum(1 for pred, gold in pairs if not pred and gold)
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if tp else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class MetricInputs:
    f1: float
    t: float

    def __post_init__(self) -> None:
        if not 0 <= self.f1 <= 100:
            raise ValueError("F1 must be on the 0-100 scale")
        if not 0 <= self.t <= 100:
            raise ValueError("average turns must be in [0, 100]")


def turn_weighted_f1(m: MetricInputs) -> float:
    """Dialog-length-discounted F1: identity at T=0, half at T=100."""
    return m.f1 / (m.t / 100.0 + 1.0)


# --- benchmark runs ---


@dataclass
class BenchmarkReport:
    agent: str
    user: str
    provider: str
    seed: int
    clarity_policy: str
    sessions: list[dict]
    pairs: list[dict]
    precision: float
    recall: float
    f1: float
    turns_mean: float
    turn_weighted_f1: float
    no_true_positives: bool
    failures: int

    def to_json(self) -> dict:
        return {
            "agent": self.agent,
            "user": self.user,
            "provider": self.provider,
            "seed": self.seed,
            "clarity_policy": self.clarity_policy,
            "sessions": self.sessions,
            "pairs": self.pairs,
            "metrics": {
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
                "turns_mean": self.turns_mean,
                "turn_weighted_f1": self.turn_weighted_f1,
                "no_true_positives": self.no_true_positives,
            },
            "failures": self.failures,
        }

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n")


def default_docs(checkers: Mapping[str, RuleProgram]) -> dict[str, RequirementDoc]:
    """Stand-in requirement text when none was kept: the checker itself."""
    return {
        oid: RequirementDoc(oid, oid, f"{oid}\n{pretty_print(program)}")
        for oid, program in checkers.items()
    }


def _responder(user: str, profile: HouseholdProfile, gateway: Gateway | None) -> Responder:
    if user == ORACLE_USER:
        return OracleUser(profile)
    if user == LLM_USER:
        if gateway is None:
            raise ValueError("the llm user needs a gateway")
        return LlmUser(gateway, render_profile(profile))
    raise ValueError(f"unknown user mode {user!r}")


def run_benchmark(
    dataset: Sequence[DatasetEntry],
    checkers: Mapping[str, RuleProgram],
    schemas: Mapping[str, FeatureSchema],
    agent: str = PROADA,
    user: str = ORACLE_USER,
    gateway: Gateway | None = None,
    docs: Mapping[str, RequirementDoc] | None = None,
    seed: int = 0,
    out_dir: Path | None = None,
) -> BenchmarkReport:
    """One interview per dataset row; aggregate micro-F1 and turn metrics.

    Session failures are recorded and skipped, not fatal.  Transcripts land
    as one JSONL file per session under ``out_dir`` when given.
    """
    if agent not in AGENTS:
        raise ValueError(f"unknown agent {agent!r}")
    if not dataset:
        raise EmptyDataset("the dataset has no rows")
    for index, entry in enumerate(dataset):
        if not entry.opportunities:
            raise EmptyDataset(f"dataset row {index} lists no opportunities")
        for oid in entry.opportunities:
            if oid not in checkers:
                raise ValueError(f"no checker for opportunity {oid!r}")
            if oid not in entry.profile.gold:
                raise ValueError(f"row {index} lacks a gold label for {oid!r}")
    if agent in (DIRECT, REACT) and gateway is None:
        raise ValueError(f"the {agent} agent needs a gateway")
    docs = dict(docs) if docs else default_docs(checkers)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    random_agent = RandomAgent(seed) if agent == RANDOM else None
    engine = DialogEngine(gateway=gateway, docs=docs) if agent == PROADA else None

    sessions: list[dict] = []
    score_pairs: list[tuple[bool, bool]] = []
    pair_rows: list[dict] = []
    turn_counts: list[int] = []
    failures = 0
    for index, entry in enumerate(dataset):
        session_id = f"{agent}-{index:04d}"
        responder = _responder(user, entry.profile, gateway)
        try:
            decisions, turns, warning, records = _run_one(
                agent, session_id, entry, checkers, schemas, docs,
                engine, random_agent, gateway, responder,
            )
        except Exception as exc:  # noqa: BLE001 - survey must survive one bad row
            failures += 1
            sessions.append(
                {"session_id": session_id, "household": index, "failed": True,
                 "error": f"{type(exc).__name__}: {exc}"}
            )
            continue
        if out_dir is not None:
            path = out_dir / f"{session_id}.jsonl"
            with path.open("w", encoding="utf-8") as handle:
                for record in records:
                    handle.write(json.dumps(record) + "\n")
        sessions.append(
            {
                "session_id": session_id,
                "household": index,
                "opportunities": list(entry.opportunities),
                "turns": turns,
                "warning": warning,
                "decisions": decisions,
                "failed": False,
            }
        )
        turn_counts.append(turns)
        for oid in entry.opportunities:
            prediction = decisions[oid]
            gold = entry.profile.gold[oid]
            score_pairs.append((prediction, gold))
            pair_rows.append(
                {"household": index, "opportunity": oid,
                 "prediction": prediction, "gold": gold}
            )
    if not score_pairs:
        raise EmptyDataset("every session failed; nothing to score")

    precision, recall, f1 = micro_f1(score_pairs)
    turns_mean = sum(turn_counts) / len(turn_counts)
    report = BenchmarkReport(
        agent=agent,
        user=user,
        provider=gateway.provider.name if gateway is not None else "none",
        seed=seed,
        clarity_policy=CLARITY_POLICY,
        sessions=sessions,
        pairs=pair_rows,
        precision=precision,
        recall=recall,
        f1=f1,
        turns_mean=turns_mean,
        turn_weighted_f1=turn_weighted_f1(MetricInputs(f1, turns_mean)),
        no_true_positives=all(not (p and g) for p, g in score_pairs),
        failures=failures,
    )
    return report


def _run_one(
    agent: str,
    session_id: str,
    entry: DatasetEntry,
    checkers: Mapping[str, RuleProgram],
    schemas: Mapping[str, FeatureSchema],
    docs: Mapping[str, RequirementDoc],
    engine: DialogEngine | None,
    random_agent: RandomAgent | None,
    gateway: Gateway | None,
    responder: Responder,
) -> tuple[dict[str, bool], int, bool, list[dict]]:
    if agent == PROADA:
        session = open_session(
            [checkers[oid] for oid in entry.opportunities],
            {oid: schemas[oid] for oid in entry.opportunities},
            session_id=session_id,
        )
        decisions = run_session(engine, session, responder)
        records = [turn_record(session, turn) for turn in session.transcript]
        records.append(decisions_record(session))
        return decisions, session.budget.used, session.fallback_warning, records

    run_docs = [docs[oid] for oid in entry.opportunities]
    if agent == RANDOM:
        result = run_baseline(random_agent, run_docs, responder)
    else:
        result = run_baseline(BaselineAgent(gateway, mode=agent), run_docs, responder)
    records: list[dict] = [
        {"type": "turn", "session_id": session_id, "question": q, "answer": a}
        for q, a in result.history
    ]
    records.append(
        {
            "type": "decisions",
            "session_id": session_id,
            "decisions": result.decisions,
            "turns_used": result.turns,
            "fallback_warning": result.warning,
        }
    )
    return result.decisions, result.turns, result.warning, records
