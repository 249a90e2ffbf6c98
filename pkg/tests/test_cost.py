import pytest

from sgxchain.cost import (
    CASE_CROSS,
    CASE_MULTI,
    CASE_SAME,
    CASE_SOURCE,
    benchmark_overhead,
    closed_form_cloud,
    closed_form_user,
    predict_cloud_ops,
    predict_user_ops,
    profile,
)
from sgxchain.digest import Algebra, OpCounters
from sgxchain.errors import WorkloadTooSmall
from sgxchain.runtime import execute_plan
from sgxchain.scenario import fig9_plan
from sgxchain.verifier import compute_user_hash

from .conftest import make_plan, node

R = bytes(16)


def test_profile_single_node():
    prof = profile(make_plan([node("A")], []))
    (p,) = prof.nodes
    assert prof.n == 1
    assert (p.in_degree, p.cross_in, p.cross_out, p.case) == (0, 0, 0, CASE_SOURCE)


def test_profile_fig9(fig9):
    prof = profile(fig9.plan)
    assert prof.n == 7
    assert prof.node("f5").in_degree == 3
    assert prof.node("f5").cross_in == 1 and prof.node("f5").cross_out == 1
    assert prof.node("f3").cross_out == 1
    assert [p.case for p in prof.nodes] == [CASE_SOURCE, CASE_SAME, CASE_SOURCE, CASE_SOURCE, CASE_MULTI, CASE_CROSS, CASE_SAME]
    assert sum(prof.case_frequencies.values()) == pytest.approx(1.0)


def test_profile_same_enclave_chain():
    ids = list("ABCDE")
    prof = profile(make_plan([node(i) for i in ids], list(zip(ids, ids[1:]))))
    assert [p.case for p in prof.nodes] == [CASE_SOURCE] + [CASE_SAME] * 4
    assert all(p.cross_out == 0 for p in prof.nodes)


def test_single_node_predictions():
    prof = profile(make_plan([node("A")], []))
    assert predict_cloud_ops(prof) == OpCounters(hash_count=1, con_count=1)
    assert predict_user_ops(prof) == OpCounters(hash_count=1, con_count=1)


def test_cross_successor_output_cost():
    same = profile(make_plan([node("A", 1), node("B", 1)], [("A", "B")]))
    cross = profile(make_plan([node("A", 1), node("B", 2)], [("A", "B")]))
    delta_a = predict_cloud_ops(cross).hash_count - predict_cloud_ops(same).hash_count
    # A's output adds 2 Hash + 1 Xor; B's cross-enclave input adds 1 Hash + 1 Xor
    assert delta_a == 3
    assert predict_cloud_ops(cross).xor_count - predict_cloud_ops(same).xor_count == 2


def test_multi_predecessor_adds():
    plan = make_plan([node("A"), node("B"), node("C"), node("D")], [("A", "D"), ("B", "D"), ("C", "D")])
    assert predict_user_ops(profile(plan)).add_count == 2


def test_fig9_predictions_hand_counted(fig9):
    prof = profile(fig9.plan)
    assert predict_cloud_ops(prof) == OpCounters(hash_count=7, xor_count=4, add_count=2, con_count=7)
    assert predict_user_ops(prof) == OpCounters(hash_count=3, xor_count=0, add_count=2, con_count=7)


def test_predictions_match_instrumented(plan_corpus, registry):
    for plan in plan_corpus:
        prof = profile(plan)
        cloud = Algebra()
        execute_plan(plan, b"d", R, registry, algebra=cloud)
        user = Algebra()
        compute_user_hash(plan, R, algebra=user)
        assert predict_cloud_ops(prof) == cloud.counters
        assert predict_user_ops(prof) == user.counters
        assert user.counters.xor_count == 0
        assert user.counters.hash_count <= cloud.counters.hash_count


def test_closed_forms_agree_with_per_node_tallies(plan_corpus, fig9):
    for plan in plan_corpus + [fig9.plan, fig9_plan(3, enclaves=7)]:
        prof = profile(plan)
        for closed, exact in ((closed_form_cloud(prof), predict_cloud_ops(prof)), (closed_form_user(prof), predict_user_ops(prof))):
            for key, value in exact.as_dict().items():
                assert closed[key] == pytest.approx(value, abs=1e-9)


def test_workload_too_small(fig9, registry):
    with pytest.raises(WorkloadTooSmall):
        benchmark_overhead(fig9.plan, registry, 1)


def test_benchmark_row(registry):
    plan = fig9_plan(1, function="busyloop_100k")
    row = benchmark_overhead(plan, registry, 1)
    assert row.nodes == 7 and row.enclaves == 3
    assert row.mean_ms_with > 0 and row.mean_ms_without > 0
    assert 0 < row.bookkeeping_pct < 5


def test_benchmark_rejects_zero_reps(fig9, registry):
    with pytest.raises(ValueError):
        benchmark_overhead(fig9.plan, registry, 0)


def test_self_comparison_is_flat(registry):
    import time

    plan = fig9_plan(1, function="busyloop_100k")
    samples = ([], [])
    for _ in range(5):
        for bucket in samples:
            t0 = time.perf_counter()
            execute_plan(plan, b"x", R, registry, bookkeeping=False)
            bucket.append(time.perf_counter() - t0)
    a, b = (min(s) for s in samples)
    assert abs(a - b) / a < 0.15
