"""Checker file I/O.

A checker file is UTF-8 text holding one rule program; its first
non-blank line is a header comment ``#opportunity: <id>``. A directory of
such files (``<id>.rule``) is a rule corpus.
"""

from __future__ import annotations

from pathlib import Path

from .ast import RuleProgram
from .errors import RuleSyntaxError
from .parser import parse_program
from .printer import pretty_print

HEADER_PREFIX = "#opportunity:"
CHECKER_SUFFIX = ".rule"


def parse_checker_text(text: str) -> RuleProgram:
    """Parse a checker file body, taking the opportunity id from the header."""
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if not stripped.startswith(HEADER_PREFIX):
            raise RuleSyntaxError(
                f"checker file must start with '{HEADER_PREFIX} <id>'", line_no, 1
            )
        opportunity_id = stripped[len(HEADER_PREFIX) :].strip()
        if not opportunity_id:
            raise RuleSyntaxError("empty opportunity id in header", line_no, 1)
        return parse_program(text, opportunity_id)
    raise RuleSyntaxError("empty checker file", 1, 1)


def render_checker_text(program: RuleProgram) -> str:
    return f"{HEADER_PREFIX} {program.opportunity_id}\n{pretty_print(program)}\n"


def load_checker(path: str | Path) -> RuleProgram:
    return parse_checker_text(Path(path).read_text(encoding="utf-8"))


def save_checker(directory: str | Path, program: RuleProgram) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{program.opportunity_id}{CHECKER_SUFFIX}"
    path.write_text(render_checker_text(program), encoding="utf-8")
    return path


def load_corpus(directory: str | Path) -> dict[str, RuleProgram]:
    """Load every checker in a directory, keyed and ordered by opportunity id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"rule corpus directory not found: {directory}")
    programs: dict[str, RuleProgram] = {}
    for path in sorted(directory.glob(f"*{CHECKER_SUFFIX}")):
        program = load_checker(path)
        if program.opportunity_id in programs:
            raise ValueError(f"duplicate opportunity id {program.opportunity_id!r} in corpus")
        programs[program.opportunity_id] = program
    return dict(sorted(programs.items()))
