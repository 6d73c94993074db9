"""Command-line entry points: checker synthesis, dataset construction,
gold labeling, benchmark runs, and the HTTP service.

Every subcommand validates its configuration up front and exits non-zero
with a one-line message on any config error; only `serve` stays resident.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bench import (
    BenchError,
    HTTP_PROVIDER,
    LLM_USER,
    MOCK_PROVIDER,
    ORACLE_USER,
    PROADA,
    AGENTS,
    USERS,
    build_pool,
    dataset_from_selection,
    label_gold,
    load_dataset,
    minimize_dataset,
    run_benchmark,
    save_dataset,
)
from .gateway import Gateway
from .rules import load_corpus
from .service import DialogService, create_app, gateway_from_env
from .simuser import HouseholdProfile
from .store import load_corpus_schemas
from .synthesis import SynthesisError, load_requirements, synthesize_corpus


class ConfigError(Exception):
    """A problem with flags, files, or environment, reported as exit 2."""


def _load_rules(rules_dir: str) -> tuple[dict, dict]:
    checkers = load_corpus(rules_dir)
    if not checkers:
        raise ConfigError(f"no .rule files under {rules_dir}")
    schemas = load_corpus_schemas(rules_dir)
    missing = sorted(set(checkers) - set(schemas))
    if missing:
        raise ConfigError(f"missing schema for: {', '.join(missing)}")
    return checkers, schemas


def _require_gateway(audit: str | None) -> Gateway:
    gateway = gateway_from_env(audit_path=audit)
    if gateway is None:
        raise ConfigError("PROVIDER_BASE_URL is not set; cannot reach a provider")
    return gateway


def _load_profiles(path: str) -> list[HouseholdProfile]:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(HouseholdProfile.from_json(json.loads(line)))
    if not rows:
        raise ConfigError(f"no household rows in {path}")
    return rows


def cmd_synth(args: argparse.Namespace) -> int:
    gateway = _require_gateway(args.audit)
    results = synthesize_corpus(gateway, args.requirements, args.out)
    for oid, result in sorted(results.items()):
        print(f"{oid}: {len(result.program.nodes)} statements in {result.attempts} attempt(s)")
    return 0


def cmd_minimize(args: argparse.Namespace) -> int:
    checkers, schemas = _load_rules(args.rules)
    profiles = _load_profiles(args.pool)
    pool = build_pool(profiles, checkers, schemas)
    selection = minimize_dataset(pool)
    entries = dataset_from_selection(profiles, selection)
    save_dataset(Path(args.out), entries)
    print(
        f"kept {len(entries)} of {len(profiles)} households "
        f"({len(selection)} interview pairs) -> {args.out}"
    )
    return 0


def cmd_label(args: argparse.Namespace) -> int:
    checkers, schemas = _load_rules(args.rules)
    entries = load_dataset(Path(args.dataset))
    label_gold([entry.profile for entry in entries], checkers, schemas)
    save_dataset(Path(args.dataset), entries)
    print(f"labeled {len(entries)} rows in place: {args.dataset}")
    return 0


def cmd_bench_run(args: argparse.Namespace) -> int:
    checkers, schemas = _load_rules(args.rules)
    dataset = load_dataset(Path(args.dataset))
    gateway = None
    if args.provider == HTTP_PROVIDER:
        gateway = _require_gateway(args.audit)
    docs = None
    if args.requirements is not None:
        docs = {d.opportunity_id: d for d in load_requirements(args.requirements)}
    report = run_benchmark(
        dataset,
        checkers,
        schemas,
        agent=args.agent,
        user=args.user,
        gateway=gateway,
        docs=docs,
        seed=args.seed,
        out_dir=Path(args.transcripts) if args.transcripts else None,
    )
    report.provider = args.provider
    report.save(Path(args.out))
    metrics = report.to_json()["metrics"]
    print(
        f"{args.agent}/{args.user}: f1={metrics['f1']:.1f} "
        f"turns_mean={metrics['turns_mean']:.2f} "
        f"turn_weighted_f1={metrics['turn_weighted_f1']:.1f} "
        f"failures={report.failures} -> {args.out}"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    service = DialogService(
        rules_dir=args.rules,
        requirements_dir=args.requirements,
        storage_dir=args.storage,
        gateway=gateway_from_env(audit_path=args.audit),
    )
    port = args.port if args.port is not None else int(os.environ.get("PORT", "8000"))
    uvicorn.run(create_app(service), host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="askless",
        description="Program-synthesis-guided eligibility interviews.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="synthesize checkers from requirement texts")
    synth.add_argument("--requirements", required=True, help="directory of <id>.txt files")
    synth.add_argument("--out", required=True, help="output directory for rules + schemas")
    synth.add_argument("--audit", default=None, help="JSONL audit log for provider traffic")
    synth.set_defaults(func=cmd_synth)

    minimize = commands.add_parser(
        "minimize", help="select a minimal household set preserving statement coverage"
    )
    minimize.add_argument("--pool", required=True, help="JSONL of candidate households")
    minimize.add_argument("--rules", required=True, help="directory of rules + schemas")
    minimize.add_argument("--out", required=True, help="output dataset JSONL")
    minimize.set_defaults(func=cmd_minimize)

    label = commands.add_parser("label", help="fill gold decisions on a dataset, in place")
    label.add_argument("--dataset", required=True, help="dataset JSONL to label")
    label.add_argument("--rules", required=True, help="directory of rules + schemas")
    label.set_defaults(func=cmd_label)

    bench = commands.add_parser("bench", help="benchmark agents on a labeled dataset")
    bench_commands = bench.add_subparsers(dest="bench_command", required=True)
    bench_run = bench_commands.add_parser("run", help="run one agent over a dataset")
    bench_run.add_argument("--agent", required=True, choices=AGENTS)
    bench_run.add_argument("--dataset", required=True, help="labeled dataset JSONL")
    bench_run.add_argument("--rules", required=True, help="directory of rules + schemas")
    bench_run.add_argument("--user", default=ORACLE_USER, choices=USERS)
    bench_run.add_argument(
        "--provider",
        default=MOCK_PROVIDER,
        choices=(MOCK_PROVIDER, HTTP_PROVIDER),
        help="mock = no provider traffic; http = PROVIDER_BASE_URL endpoint",
    )
    bench_run.add_argument("--seed", type=int, default=0)
    bench_run.add_argument("--out", required=True, help="report JSON path")
    bench_run.add_argument("--transcripts", default=None, help="per-session JSONL directory")
    bench_run.add_argument("--requirements", default=None, help="requirement texts for prompts")
    bench_run.add_argument("--audit", default=None, help="JSONL audit log for provider traffic")
    bench_run.set_defaults(func=cmd_bench_run)

    serve = commands.add_parser("serve", help="serve the dialog HTTP API")
    serve.add_argument("--rules", required=True, help="directory of rules + schemas")
    serve.add_argument("--port", type=int, default=None, help="default: $PORT or 8000")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--requirements", default=None, help="requirement texts directory")
    serve.add_argument("--storage", default=None, help="session JSONL write-through directory")
    serve.add_argument("--audit", default=None, help="JSONL audit log for provider traffic")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BenchError, SynthesisError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
