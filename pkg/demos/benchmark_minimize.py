"""Build a benchmark dataset from scratch and race two agents on it.

Run from the repository root:

    python3 demos/benchmark_minimize.py

The pipeline mirrors the CLI (`minimize`, `label`, `bench run`) but stays
in-process: sample a diverse household pool, keep only the households that
add statement coverage, label gold decisions by direct rule evaluation,
then interview every row with the dialog engine and with a coin-flipping
floor agent.
"""

from askless.bench import (
    MetricInputs,
    build_pool,
    dataset_from_selection,
    label_gold,
    minimize_dataset,
    run_benchmark,
    turn_weighted_f1,
)
from askless.rules import load_corpus
from askless.simuser import CONSISTENCY_RULES, sample_diverse
from askless.store import load_corpus_schemas, union_schemas

checkers = load_corpus("corpus/rules")
schemas = load_corpus_schemas("corpus/rules")
union = union_schemas(*(schemas[oid] for oid in sorted(checkers)))

# 1. Sample a pool of consistent households over the shared vocabulary.
pool_profiles = sample_diverse(union, seed=2024, n=40, rules=CONSISTENCY_RULES)
print(f"sampled pool: {len(pool_profiles)} households")

# 2. Trace every checker over every household and keep a minimal subset
#    that still covers every reachable (opportunity, statement) element.
pool = build_pool(pool_profiles, checkers, schemas)
selection = minimize_dataset(pool)
entries = dataset_from_selection(pool_profiles, selection)
kept = {household for household, _ in selection}
print(f"coverage elements: {len(pool.covered())}")
print(f"minimized: kept {len(kept)} households, {len(selection)} interview pairs")

# 3. Gold-label by evaluating each rule against the full profiles.
label_gold([entry.profile for entry in entries], checkers, schemas)

# 4. Benchmark: the dialog engine with an oracle answerer, then the random
#    floor. Turn-weighted F1 trades accuracy against interview length.
for agent in ("proada", "random"):
    report = run_benchmark(entries, checkers, schemas, agent=agent, seed=7)
    print(
        f"{agent:>7}: precision={report.precision:5.1f} recall={report.recall:5.1f} "
        f"f1={report.f1:5.1f} turns_mean={report.turns_mean:5.2f} "
        f"turn_weighted_f1={turn_weighted_f1(MetricInputs(report.f1, report.turns_mean)):5.1f}"
    )
