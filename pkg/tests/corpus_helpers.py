"""Shared fixtures for exercising the bundled corpus: exhaustive value grids
per checker and independent hand-written reference predicates.

The references are deliberately written as plain Python over raw dicts, with
no use of the rule evaluator, so they can serve as a brute-force truth-table
oracle for the programs under corpus/rules/.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from askless.rules import RuleProgram, household_key, load_corpus, member_key
from askless.store import FeatureSchema, FeatureStore, load_corpus_schemas

CORPUS_DIR = Path(__file__).resolve().parent.parent / "corpus" / "rules"
REQUIREMENTS_DIR = CORPUS_DIR.parent / "requirements"

Reference = Callable[[dict, list[dict]], bool]

# Brute-force truth tables, one per opportunity, kept independent of the
# rule language on purpose.
REFERENCES: dict[str, Reference] = {
    "childcare-subsidy": lambda hh, ms: (
        hh["annual_income"] < 65000 and any(m["age"] < 13 for m in ms)
    ),
    "community-college-grant": lambda hh, ms: (
        any(17 <= m["age"] <= 30 for m in ms) and hh["annual_income"] < 45000
    ),
    "energy-assist": lambda hh, ms: (
        hh["annual_income"] < 40000 and hh["housing_status"] != "shelter"
    ),
    "foster-youth-stipend": lambda hh, ms: (
        ms[0]["in_foster_care"] == "yes"
        or (ms[0]["age"] < 25 and hh["annual_income"] < 20000)
    ),
    "head-start-preschool": lambda hh, ms: (
        any(3 <= m["age"] <= 5 for m in ms) and hh["annual_income"] < 55000
    ),
    "job-training-voucher": lambda hh, ms: any(
        18 <= m["age"] <= 55 and m["employed"] == "no" for m in ms
    ),
    "rent-freeze-senior": lambda hh, ms: (
        hh["housing_status"] == "rent"
        and ms[0]["age"] >= 62
        and hh["annual_income"] < 50000
    ),
    "senior-meal-delivery": lambda hh, ms: (
        any(m["age"] >= 60 for m in ms)
        and (hh["size"] == 1 or hh["annual_income"] < 35000)
    ),
    "snap-groceries": lambda hh, ms: (
        hh["annual_income"] < 15000 + 7000 * hh["size"]
    ),
    "transit-discount": lambda hh, ms: (
        hh["annual_income"] / hh["size"] < 12000
    ),
    "utility-shutoff-protection": lambda hh, ms: (
        any(m["disabled"] == "yes" or m["age"] >= 65 for m in ms)
        and hh["housing_status"] != "street"
    ),
    "veteran-housing-bonus": lambda hh, ms: (
        any(m["veteran"] == "yes" and m["age"] >= 17 for m in ms)
        and hh["annual_income"] < 80000
    ),
}


@dataclass(frozen=True)
class Grid:
    """Cartesian value grid for one checker.

    Values straddle every threshold the checker tests, so the grid drives
    each conditional down both arms.  `sizes` is empty for checkers that
    never read household size.
    """

    household: dict[str, list] = field(default_factory=dict)
    member: dict[str, list] = field(default_factory=dict)
    sizes: tuple[int, ...] = ()


GRIDS: dict[str, Grid] = {
    "childcare-subsidy": Grid(
        household={"annual_income": [50000.0, 65000.0]},
        member={"age": [5, 40]},
        sizes=(1, 2),
    ),
    "community-college-grant": Grid(
        household={"annual_income": [30000.0, 45000.0]},
        member={"age": [10, 20, 35]},
        sizes=(1, 2),
    ),
    "energy-assist": Grid(
        household={
            "annual_income": [30000.0, 40000.0],
            "housing_status": ["rent", "own", "shelter", "street"],
        },
    ),
    "foster-youth-stipend": Grid(
        household={"annual_income": [10000.0, 20000.0]},
        member={"in_foster_care": ["yes", "no"], "age": [20, 30]},
        sizes=(1, 2),
    ),
    "head-start-preschool": Grid(
        household={"annual_income": [40000.0, 55000.0]},
        member={"age": [2, 4, 6]},
        sizes=(1, 2),
    ),
    "job-training-voucher": Grid(
        member={"age": [10, 30, 60], "employed": ["yes", "no"]},
        sizes=(1, 2),
    ),
    "rent-freeze-senior": Grid(
        household={
            "housing_status": ["rent", "own"],
            "annual_income": [40000.0, 50000.0],
        },
        member={"age": [50, 70]},
        sizes=(1, 2),
    ),
    "senior-meal-delivery": Grid(
        household={"annual_income": [20000.0, 35000.0]},
        member={"age": [50, 65]},
        sizes=(1, 2),
    ),
    "snap-groceries": Grid(
        household={"annual_income": [20000.0, 25000.0, 30000.0, 40000.0]},
        sizes=(1, 2, 3),
    ),
    "transit-discount": Grid(
        household={"annual_income": [10000.0, 24000.0, 36000.0]},
        sizes=(1, 2, 3),
    ),
    "utility-shutoff-protection": Grid(
        household={"housing_status": ["rent", "street"]},
        member={"disabled": ["yes", "no"], "age": [30, 70]},
        sizes=(1, 2),
    ),
    "veteran-housing-bonus": Grid(
        household={"annual_income": [60000.0, 80000.0]},
        member={"veteran": ["yes", "no"], "age": [10, 30]},
        sizes=(1, 2),
    ),
}


def load_bundled_corpus() -> tuple[dict[str, RuleProgram], dict[str, FeatureSchema]]:
    return load_corpus(CORPUS_DIR), load_corpus_schemas(CORPUS_DIR)


def grid_cases(grid: Grid, schema: FeatureSchema) -> list[tuple[FeatureStore, dict, list[dict]]]:
    """Expand a grid into (store, household-dict, member-dicts) triples.

    The store is what the checker reads; the raw dicts are what the
    reference predicate reads, so the two implementations never share a
    data path.
    """
    hh_names = sorted(grid.household)
    member_names = sorted(grid.member)
    sizes = grid.sizes if grid.sizes else (None,)
    cases = []
    for size in sizes:
        member_slots = [] if size is None else list(range(size))
        one_member = list(
            itertools.product(*(grid.member[name] for name in member_names))
        )
        for hh_values in itertools.product(*(grid.household[name] for name in hh_names)):
            for assignment in itertools.product(one_member, repeat=len(member_slots)):
                household = dict(zip(hh_names, hh_values))
                members = [dict(zip(member_names, combo)) for combo in assignment]
                if size is not None:
                    household["size"] = size
                store = FeatureStore(schema)
                for name, value in household.items():
                    if household_key(name) in schema:
                        store.put(household_key(name), str(value))
                for index, member in enumerate(members):
                    for name, value in member.items():
                        store.put(member_key(name, index), str(value))
                cases.append((store, household, members))
    return cases
