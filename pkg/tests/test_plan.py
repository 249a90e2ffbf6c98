import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgxchain.errors import (
    CyclicPlan,
    DanglingEdge,
    DisconnectedPlan,
    DuplicateTag,
    EmptyPlan,
    MalformedEdge,
    MultipleSinks,
    MutationInvalid,
    UnknownEdge,
)
from sgxchain.plan import (
    DropNode,
    DuplicateNode,
    EdgeClass,
    ExecutionPlan,
    RewireEdge,
    SwapTags,
    edge_classify,
    labeled_equal,
    mutate,
    topological_order,
    validate,
)
from sgxchain.scenario import random_plan

from .conftest import make_plan, node


def brute_force_order(plan):
    """Lexicographically smallest linearisation, by enumeration."""
    ids = sorted(plan.by_id)
    for perm in itertools.permutations(ids):
        pos = {n: i for i, n in enumerate(perm)}
        if all(pos[u] < pos[v] for u, v in plan.edges):
            return list(perm)
    raise AssertionError("no linearisation")


def test_single_node_is_valid():
    validate(ExecutionPlan((node("A"),)))


@pytest.mark.parametrize(
    "nodes, edges, error",
    [
        ([], [], EmptyPlan),
        ([node("A"), node("B")], [("A", "B"), ("B", "A")], CyclicPlan),
        ([node("A"), node("B"), node("C")], [("A", "B"), ("A", "C")], MultipleSinks),
        ([node("A"), node("B"), node("C"), node("D")], [("A", "B"), ("C", "D")], DisconnectedPlan),
        ([node("A"), node("B", tag=b"A.......")], [("A", "B")], DuplicateTag),
        ([node("A")], [("A", "Z")], DanglingEdge),
        ([node("A"), node("B")], [("A", "B"), ("A", "B")], MalformedEdge),
        ([node("A")], [("A", "A")], MalformedEdge),
    ],
)
def test_validate_errors(nodes, edges, error):
    with pytest.raises(error):
        validate(ExecutionPlan(tuple(nodes), tuple(edges)))


def test_isolated_nodes_are_disconnected():
    with pytest.raises(DisconnectedPlan):
        validate(ExecutionPlan((node("A"), node("B")), ()))


def test_fig9_topology_valid(fig9):
    plan = fig9.plan
    validate(plan)
    assert plan.sources == ["f1", "f3", "f4"]
    assert plan.sink == "f7"


def test_error_names_offender():
    with pytest.raises(DanglingEdge) as info:
        validate(ExecutionPlan((node("A"),), (("A", "Z"),)))
    assert info.value.subject == ("A", "Z")


def test_topological_order_examples(fig9, diamond):
    chain = make_plan([node("A"), node("B"), node("C")], [("A", "B"), ("B", "C")])
    assert topological_order(chain) == ["A", "B", "C"]
    assert topological_order(fig9.plan) == [f"f{i}" for i in range(1, 8)]
    assert topological_order(diamond) == ["A", "B", "C", "D"]


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_topological_order_matches_enumeration(r):
    plan = random_plan(r, max_nodes=7)
    order = topological_order(plan)
    assert order == brute_force_order(plan)
    assert sorted(order) == sorted(plan.by_id)


def test_edge_classify(fig9):
    plan = make_plan([node("A", 1), node("B", 1), node("C", 2)], [("A", "B"), ("B", "C")])
    assert edge_classify(plan, ("A", "B")) is EdgeClass.SAME_ENCLAVE
    assert edge_classify(plan, ("B", "C")) is EdgeClass.CROSS_ENCLAVE
    # reference assignment: f3 and f5->f6 cross, everything else stays in its enclave
    cross = {e for e in fig9.plan.edges if edge_classify(fig9.plan, e) is EdgeClass.CROSS_ENCLAVE}
    assert cross == {("f3", "f5"), ("f5", "f6")}
    assert edge_classify(fig9.plan, ("f2", "f5")) is EdgeClass.SAME_ENCLAVE
    with pytest.raises(UnknownEdge):
        edge_classify(plan, ("A", "C"))


def test_edge_classify_depends_only_on_enclaves(plan_corpus):
    for plan in plan_corpus[:50]:
        for u, v in plan.edges:
            cls = edge_classify(plan, (u, v))
            same = plan.node(u).enclave == plan.node(v).enclave
            assert (cls is EdgeClass.SAME_ENCLAVE) == same


def test_swap_tags_on_two_chain():
    f = node("f", 1, tag=b"tag_f...", function="reverse")
    g = node("g", 1, tag=b"tag_g...", function="identity")
    plan = make_plan([f, g], [("f", "g")])
    swapped = mutate(plan, SwapTags("f", "g"))
    assert swapped.node("f").tag == b"tag_g..." and swapped.node("f").function_name == "identity"
    assert swapped.node("g").tag == b"tag_f..." and swapped.node("g").function_name == "reverse"
    assert plan.node("f").tag == b"tag_f..."  # input untouched
    assert not labeled_equal(plan, swapped)


def test_drop_only_node_invalid():
    with pytest.raises(MutationInvalid):
        mutate(make_plan([node("A")], []), DropNode("A"))


def test_rewire_diamond(diamond):
    new = mutate(diamond, RewireEdge("B", "D", "C"))
    validate(new)
    assert set(new.edges) == {("A", "B"), ("A", "C"), ("B", "C"), ("C", "D")}


def test_rewire_into_cycle_invalid(diamond):
    with pytest.raises(MutationInvalid):
        mutate(diamond, RewireEdge("B", "D", "A"))


def test_duplicate_node_inserts_second_invocation(diamond):
    new = mutate(diamond, DuplicateNode("B"))
    assert ("B", "B'") in new.edges and ("B'", "D") in new.edges
    assert new.node("B'").tag == diamond.node("B").tag


def test_symmetric_swap_is_not_a_mutation():
    # two interchangeable sources feeding the same node: the labeled DAG is unchanged
    plan = make_plan([node("A"), node("B"), node("C")], [("A", "C"), ("B", "C")])
    with pytest.raises(MutationInvalid):
        mutate(plan, SwapTags("A", "B"))


def test_mutations_always_change_plan(plan_corpus):
    r = random.Random(3)
    for plan in plan_corpus[:100]:
        ids = plan.node_ids
        for mutation in (
            SwapTags(*r.sample(ids, 2)) if len(ids) > 1 else None,
            DropNode(r.choice(ids)),
            DuplicateNode(r.choice(ids)),
        ):
            if mutation is None:
                continue
            try:
                new = mutate(plan, mutation)
            except MutationInvalid:
                continue
            assert not labeled_equal(new, plan)
            assert len(topological_order(new)) == len(new.nodes)
