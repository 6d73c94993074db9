"""Author the bundled benefits corpus: twelve checker programs, their slot
schemas, and the natural-language requirement texts they encode.

Run from the repository root:

    python3 demos/build_corpus.py

Writes corpus/rules/<id>.rule, corpus/rules/<id>.schema.json, and
corpus/requirements/<id>.txt.  Each checker is parsed and round-tripped
through the printer before it is saved, so the files on disk are always in
canonical form.
"""

from pathlib import Path

from askless.rules import (
    household_key,
    member_key,
    parse_checker_text,
    pretty_print,
    save_checker,
)
from askless.store import FeatureSchema, choice_slot, integer_slot, real_slot, save_schema

ROOT = Path(__file__).resolve().parent.parent
RULES_DIR = ROOT / "corpus" / "rules"
REQUIREMENTS_DIR = ROOT / "corpus" / "requirements"

# Slot vocabulary shared by every program; schemas must agree wherever two
# programs read the same feature, or sessions over both would fail to open.
SIZE = integer_slot(low=1, high=6)
INCOME = real_slot(low=0, high=250000)
HOUSING = choice_slot("rent", "own", "shelter", "street")
AGE = integer_slot(low=0, high=110)
YES_NO = choice_slot("yes", "no")

CORPUS: list[tuple[str, str, str, dict]] = [
    (
        "childcare-subsidy",
        """\
Childcare Subsidy
Helps working families pay for day care. The household must earn less than
$65,000 per year and include at least one child under 13.""",
        """\
if hh["annual_income"] >= 65000 {
  return false
} else {
  let young = 0
  for member in household {
    if member["age"] < 13 {
      let young = young + 1
    } else {
      let young = young
    }
  }
  return young >= 1
}""",
        {
            household_key("annual_income"): INCOME,
            household_key("size"): SIZE,
            member_key("age"): AGE,
        },
    ),
    (
        "community-college-grant",
        """\
Community College Grant
Tuition support for households with a member between 17 and 30 who could
enroll. Household income must be under $45,000.""",
        """\
let eligible = 0
for member in household {
  if member["age"] >= 17 {
    if member["age"] <= 30 {
      let eligible = eligible + 1
    } else {
      let eligible = eligible
    }
  } else {
    let eligible = eligible
  }
}
if eligible == 0 {
  return false
} else {
  return hh["annual_income"] < 45000
}""",
        {
            household_key("size"): SIZE,
            member_key("age"): AGE,
            household_key("annual_income"): INCOME,
        },
    ),
    (
        "energy-assist",
        """\
Energy Bill Assistance
Credits toward heating and electric bills for households earning under
$40,000 that pay their own utility account. Shelter residents are covered
by a separate program and do not qualify.""",
        """\
if hh["annual_income"] < 40000 {
  if hh["housing_status"] == "shelter" {
    return false
  } else {
    return true
  }
} else {
  return false
}""",
        {
            household_key("annual_income"): INCOME,
            household_key("housing_status"): HOUSING,
        },
    ),
    (
        "foster-youth-stipend",
        """\
Foster Youth Stipend
A monthly stipend for current foster youth, no questions asked. Former
foster youth qualify too while they are under 25 and the household earns
less than $20,000.""",
        """\
if hh["size"] < 1 {
  return false
} else {
  if hh[0]["in_foster_care"] == "yes" {
    return true
  } else {
    if hh[0]["age"] < 25 {
      return hh["annual_income"] < 20000
    } else {
      return false
    }
  }
}""",
        {
            household_key("size"): SIZE,
            member_key("in_foster_care"): YES_NO,
            member_key("age"): AGE,
            household_key("annual_income"): INCOME,
        },
    ),
    (
        "head-start-preschool",
        """\
Head Start Preschool
Free preschool placement when the household includes a child aged 3 to 5
and earns under $55,000.""",
        """\
let preschoolers = 0
for member in household {
  if member["age"] >= 3 {
    if member["age"] <= 5 {
      let preschoolers = preschoolers + 1
    } else {
      let preschoolers = preschoolers
    }
  } else {
    let preschoolers = preschoolers
  }
}
if preschoolers == 0 {
  return false
} else {
  return hh["annual_income"] < 55000
}""",
        {
            household_key("size"): SIZE,
            member_key("age"): AGE,
            household_key("annual_income"): INCOME,
        },
    ),
    (
        "job-training-voucher",
        """\
Job Training Voucher
Covers certification courses for any household member between 18 and 55
who is not currently employed.""",
        """\
let candidates = 0
for member in household {
  if member["age"] >= 18 {
    if member["age"] <= 55 {
      if member["employed"] == "no" {
        let candidates = candidates + 1
      } else {
        let candidates = candidates
      }
    } else {
      let candidates = candidates
    }
  } else {
    let candidates = candidates
  }
}
return candidates >= 1""",
        {
            household_key("size"): SIZE,
            member_key("age"): AGE,
            member_key("employed"): YES_NO,
        },
    ),
    (
        "rent-freeze-senior",
        """\
Senior Rent Freeze
Locks the current rent for tenants headed by a senior. The household must
rent its home, the head of household must be 62 or older, and income must
be below $50,000.""",
        """\
if hh["housing_status"] == "rent" {
  if hh[0]["age"] >= 62 {
    return hh["annual_income"] < 50000
  } else {
    return false
  }
} else {
  return false
}""",
        {
            household_key("housing_status"): HOUSING,
            member_key("age"): AGE,
            household_key("annual_income"): INCOME,
        },
    ),
    (
        "senior-meal-delivery",
        """\
Senior Meal Delivery
Daily meal drop-offs for households with a member aged 60 or older.
Seniors living alone always qualify; larger households qualify under
$35,000 of income.""",
        """\
let seniors = 0
for member in household {
  if member["age"] >= 60 {
    let seniors = seniors + 1
  } else {
    let seniors = seniors
  }
}
if seniors == 0 {
  return false
} else {
  if hh["size"] == 1 {
    return true
  } else {
    return hh["annual_income"] < 35000
  }
}""",
        {
            household_key("size"): SIZE,
            member_key("age"): AGE,
            household_key("annual_income"): INCOME,
        },
    ),
    (
        "snap-groceries",
        """\
Grocery Support (SNAP-style)
Monthly grocery credit with a sliding income cap: $15,000 plus $7,000 for
each household member.""",
        """\
return hh["annual_income"] < 15000 + 7000 * hh["size"]""",
        {
            household_key("annual_income"): INCOME,
            household_key("size"): SIZE,
        },
    ),
    (
        "transit-discount",
        """\
Transit Fare Discount
Half-price transit cards when income per household member is under
$12,000.""",
        """\
if hh["size"] >= 1 {
  return hh["annual_income"] / hh["size"] < 12000
} else {
  return false
}""",
        {
            household_key("size"): SIZE,
            household_key("annual_income"): INCOME,
        },
    ),
    (
        "utility-shutoff-protection",
        """\
Utility Shutoff Protection
Blocks utility disconnection for households that include a disabled member
or a member aged 65 or older, provided the household has an address where
service is delivered.""",
        """\
let protected = 0
for member in household {
  if member["disabled"] == "yes" {
    let protected = protected + 1
  } else {
    if member["age"] >= 65 {
      let protected = protected + 1
    } else {
      let protected = protected
    }
  }
}
if protected == 0 {
  return false
} else {
  if hh["housing_status"] == "street" {
    return false
  } else {
    return true
  }
}""",
        {
            household_key("size"): SIZE,
            member_key("disabled"): YES_NO,
            member_key("age"): AGE,
            household_key("housing_status"): HOUSING,
        },
    ),
    (
        "veteran-housing-bonus",
        """\
Veteran Housing Bonus
A rent supplement for households that include an adult veteran, capped at
$80,000 of household income.""",
        """\
let veterans = 0
for member in household {
  if member["veteran"] == "yes" {
    if member["age"] >= 17 {
      let veterans = veterans + 1
    } else {
      let veterans = veterans
    }
  } else {
    let veterans = veterans
  }
}
if veterans == 0 {
  return false
} else {
  return hh["annual_income"] < 80000
}""",
        {
            household_key("size"): SIZE,
            member_key("veteran"): YES_NO,
            member_key("age"): AGE,
            household_key("annual_income"): INCOME,
        },
    ),
]


def main() -> None:
    RULES_DIR.mkdir(parents=True, exist_ok=True)
    REQUIREMENTS_DIR.mkdir(parents=True, exist_ok=True)
    for opportunity_id, requirement, body, slots in CORPUS:
        source = f"#opportunity: {opportunity_id}\n{body}\n"
        program = parse_checker_text(source)
        assert program.opportunity_id == opportunity_id
        # Round-trip sanity: the canonical print must parse back to itself.
        canonical = pretty_print(program)
        reparsed = parse_checker_text(f"#opportunity: {opportunity_id}\n{canonical}\n")
        assert pretty_print(reparsed) == canonical

        schema = FeatureSchema(slots)
        for key in program.keys_read():
            assert key in schema, f"{opportunity_id} schema misses {key}"

        save_checker(RULES_DIR, program)
        save_schema(RULES_DIR, opportunity_id, schema)
        (REQUIREMENTS_DIR / f"{opportunity_id}.txt").write_text(
            requirement + "\n", encoding="utf-8"
        )
        print(f"wrote {opportunity_id}: {len(program.nodes)} statements, "
              f"{len(program.keys_read())} features")
    print(f"\ncorpus ready under {RULES_DIR.parent}")


if __name__ == "__main__":
    main()
