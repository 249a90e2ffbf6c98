import random

import pytest

from sgxchain.plan import ExecutionPlan, PlanNode, validate
from sgxchain.runtime import default_registry
from sgxchain.scenario import random_plan, reference_scenario


def node(nid, enclave=1, tag=None, function="identity"):
    return PlanNode(nid, tag or nid.encode().ljust(8, b"."), enclave, function)


def make_plan(nodes, edges):
    plan = ExecutionPlan(tuple(nodes), tuple(edges))
    validate(plan)
    return plan


@pytest.fixture
def fig9():
    return reference_scenario()


@pytest.fixture
def registry():
    return default_registry()


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def diamond():
    return make_plan(
        [node("A"), node("B"), node("C"), node("D")],
        [("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")],
    )


@pytest.fixture
def plan_corpus():
    r = random.Random(99)
    return [random_plan(r) for _ in range(200)]
