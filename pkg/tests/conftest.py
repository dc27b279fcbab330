import copy

import pytest

from multigrid_ilc.scenario import resolve, shipped_scenario


@pytest.fixture(scope="session")
def two_mg_resolved():
    return resolve(shipped_scenario("two-mg"))


@pytest.fixture(scope="session")
def scheme_scenario(two_mg_resolved):
    """Factory: the shipped two-MG scenario re-pointed at one scheme with
    catalogue default gains."""

    def make(scheme):
        raw = copy.deepcopy(two_mg_resolved)
        raw["ilcs"][0]["scheme"] = scheme
        raw["ilcs"][0]["gains"] = {}
        return resolve(raw)

    return make
