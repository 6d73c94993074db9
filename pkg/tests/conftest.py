from __future__ import annotations

import pytest

from askless.rules import MISS, KeyPath, Scope


class DictSource:
    """Minimal read-only feature source for evaluator tests: a household
    dict plus a list of member dicts; anything unset reads as MISS."""

    def __init__(self, household: dict | None = None, members: list[dict] | None = None):
        self.household = dict(household or {})
        self.members = [dict(m) for m in (members or [])]

    def get(self, key: KeyPath) -> object:
        if key.scope is Scope.HOUSEHOLD:
            return self.household.get(key.key, MISS)
        if key.member_index is None or key.member_index >= len(self.members):
            return MISS
        return self.members[key.member_index].get(key.key, MISS)


@pytest.fixture
def dict_source():
    return DictSource
