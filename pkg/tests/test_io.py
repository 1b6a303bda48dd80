import json
import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given

from nonbossy import io
from nonbossy.errors import ValidationError
from nonbossy.fixtures import (
    GOLDEN,
    correlated_prior,
    correlated_reference_plan,
    example4_reference_list,
    golden_table,
    prop2,
    spa,
)
from nonbossy.evalsearch import make_partition_instance
from nonbossy.mechanisms import tabulate_canonical

from conftest import random_adaptive_plan, random_decision_list, seeds

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
F = Fraction


def round_trip(mech):
    text = io.dumps(io.mechanism_to_json(mech))
    return io.mechanism_from_json(json.loads(text))


# -- round trips -------------------------------------------------------------------------------------


@pytest.mark.parametrize("make", [prop2, spa, example4_reference_list, correlated_reference_plan])
def test_fixture_round_trip(make):
    assert round_trip(make()) == make()


@given(seeds)
def test_decision_list_round_trip(seed):
    dl = random_decision_list(random.Random(seed))
    assert round_trip(dl) == dl


@given(seeds)
def test_plan_round_trip(seed):
    plan = random_adaptive_plan(random.Random(seed))
    assert round_trip(plan) == plan


@given(seeds)
def test_table_round_trip(seed):
    tab = tabulate_canonical(random_adaptive_plan(random.Random(seed)))
    assert round_trip(tab) == tab


def test_environment_round_trip():
    for env in (prop2().environment, spa().environment):
        assert io.environment_from_json(io.environment_to_json(env)) == env


def test_prior_round_trip():
    for dist in (correlated_prior(), make_partition_instance(2, 2, F(1, 2)).prior):
        back, constraint = io.prior_from_json(io.prior_to_json(dist))
        assert back == dist and constraint is None


def test_prior_with_constraint():
    dist, constraint = io.prior_from_json(FIXTURES / "partition_2_2.json")
    assert dist.n_agents == 4 and len(constraint) == 7


def test_exceptions_by_vector_are_accepted():
    doc = {"type": "decision-list", "entries": [
        {"outcome": [1, 0], "prices": ["1", "0"], "exceptions": [[0, 1]]},
        {"outcome": [0, 1], "prices": [0, 1], "exceptions": []},
        {"outcome": [0, 0], "prices": [0, 0]}]}
    dl = io.mechanism_from_json(doc)
    assert dl.entries[0].exceptions == frozenset({(0, 1)})
    assert io.mechanism_to_json(dl)["entries"][0]["exceptions"] == [1]


def test_every_checked_in_fixture_loads():
    for path in sorted(FIXTURES.glob("*.json")):
        doc = io.load_json(path)
        if doc.get("type") == "prior":
            io.prior_from_json(doc)
        else:
            io.mechanism_from_json(doc)


# -- golden files ------------------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_tables_are_byte_stable(name):
    assert io.dumps(io.mechanism_to_json(GOLDEN[name]())) == golden_table(name)


def test_dumps_is_deterministic():
    a = io.dumps(io.mechanism_to_json(spa()))
    assert a == io.dumps(io.mechanism_to_json(spa()))
    assert "8/5" in io.dumps({"x": F(8, 5)})
    assert io.to_jsonable(F(8, 5), decimal=True) == "1.600000"


# -- validation -----------------------------------------------------------------------------------------


def test_floats_rejected(tmp_path):
    path = tmp_path / "prior.json"
    path.write_text('{"type": "prior", "kind": "product", "agents": [[[1, 0.5], [0, 0.5]]]}')
    with pytest.raises(ValidationError, match="floating-point literal 0.5"):
        io.load_json(path)


@pytest.mark.parametrize("doc,path", [
    ({"type": "decision-list", "entries": [{"outcome": [1, 2], "prices": [1, 0]}]},
     "$.entries[0].outcome"),
    ({"type": "decision-list", "entries": [{"outcome": [1], "prices": ["x"]}]},
     "$.entries[0].prices"),
    ({"type": "decision-list", "entries": [{"outcome": [1], "prices": [1], "exceptions": [4]}]},
     "$.entries[0].exceptions[0]"),
    ({"type": "posted-price", "n_agents": 2, "plan": {"agent": -1, "price": 1}},
     "$.plan.agent"),
    ({"type": "table", "rows": []}, "$"),
    ({"type": "wat"}, "$.type"),
])
def test_mechanism_errors_carry_paths(doc, path):
    with pytest.raises(ValidationError) as err:
        io.mechanism_from_json(doc)
    assert err.value.path.startswith(path)


def test_table_row_errors_carry_paths():
    doc = io.mechanism_to_json(spa())
    doc["rows"][3]["payments"] = ["-1", "0"]
    doc["rows"][4]["profile"] = ["0"]
    with pytest.raises(ValidationError) as err:
        io.mechanism_from_json(doc)
    assert err.value.path == "$.rows[4].profile"


def test_environment_agent_count_checked():
    doc = io.environment_to_json(spa().environment)
    doc["agents"] = 3
    with pytest.raises(ValidationError) as err:
        io.environment_from_json(doc)
    assert err.value.path == "$.agents"


@pytest.mark.parametrize("doc,path", [
    ({"kind": "product", "agents": [[[1, "1/2"], [0, "1/3"]]]}, "$.agents"),
    ({"kind": "explicit", "support": [{"profile": [1], "probability": "2"}]}, "$.support"),
    ({"kind": "explicit", "support": [{"profile": [1], "probability": "1/2"},
                                      {"profile": [1, 0], "probability": "1/2"}]}, "$.support"),
    ({"kind": "product", "agents": [[[1, 1]]], "constraint": [[0, 0], [1, 0]]}, "$.constraint"),
    ({"kind": "nope"}, "$.kind"),
])
def test_prior_errors_carry_paths(doc, path):
    with pytest.raises(ValidationError) as err:
        io.prior_from_json(doc)
    assert err.value.path.startswith(path)


def test_bad_generator_reports_feasible_path():
    doc = io.environment_to_json(spa().environment)
    doc["feasible"] = {"generator": "k-uniform"}
    with pytest.raises(ValidationError) as err:
        io.environment_from_json(doc)
    assert err.value.path == "$.feasible"
