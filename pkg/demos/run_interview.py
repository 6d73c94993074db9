"""Interview a simulated household against three bundled opportunities and
print the full transcript, the decisions, and the rationale each decision
carries.

Run from the repository root:

    python3 demos/run_interview.py

Everything here is deterministic: the question templates are fixed text,
the oracle answers straight from the household profile, and direct answer
parsing needs no language model at all.
"""

from askless.dialog import DialogEngine, open_session, run_session
from askless.rules import describe_node, evaluate, load_corpus
from askless.simuser import HouseholdProfile, OracleUser, render_profile
from askless.store import load_corpus_schemas

OPPORTUNITIES = ["foster-youth-stipend", "job-training-voucher", "snap-groceries"]

checkers = load_corpus("corpus/rules")
schemas = load_corpus_schemas("corpus/rules")

# A 22-year-old former foster youth living alone on a small income.
profile = HouseholdProfile(
    household_features={"size": 1, "annual_income": 14000.0},
    members=[{"age": 22, "in_foster_care": "no", "employed": "no"}],
)
print(render_profile(profile))
print()

session = open_session(
    [checkers[oid] for oid in OPPORTUNITIES],
    {oid: schemas[oid] for oid in OPPORTUNITIES},
    session_id="demo-interview",
)
engine = DialogEngine()  # template questions, no gateway
decisions = run_session(engine, session, OracleUser(profile))

print(f"Interview finished in {session.budget.used} of {session.budget.max_turns} turns.\n")
for turn in session.transcript:
    print(f"  Q: {turn.question}")
    print(f"  A: {turn.answer}  ->  {turn.key} = {turn.extracted} [{turn.outcome}]")
print()

# Each decision can be traced back to the statements that actually ran.
for oid in OPPORTUNITIES:
    outcome = evaluate(checkers[oid], session.store)
    verdict = "eligible" if decisions[oid] else "not eligible"
    print(f"{oid}: {verdict}")
    for node_id in sorted(outcome.trace.executed):
        print(f"    {describe_node(checkers[oid], node_id)}")
print()

asked = [turn.key.key for turn in session.transcript]
print(f"asked keys, in order: {asked}")
print()

# Questions follow the execution path, so answers can make later questions
# unnecessary. A current foster youth resolves the stipend in two answers:
# age and income sit on a branch that never runs.
current = HouseholdProfile(
    household_features={"size": 1, "annual_income": 14000.0},
    members=[{"age": 22, "in_foster_care": "yes", "employed": "no"}],
)
short = open_session(
    [checkers["foster-youth-stipend"]],
    {"foster-youth-stipend": schemas["foster-youth-stipend"]},
    session_id="demo-skip",
)
run_session(engine, short, OracleUser(current))
print("with in_foster_care = yes, the stipend interview asks only:")
for turn in short.transcript:
    print(f"  {turn.question}")
