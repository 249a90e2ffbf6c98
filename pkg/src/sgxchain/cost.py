"""Operation-count model for both hash-chain algorithms, plus overhead timing.

Counts are predicted per node from the plan structure and must equal what
the instrumented :class:`~sgxchain.digest.Algebra` records during a run.
The closed-form totals (frequencies in place of probabilities) are kept as
a second route to the same numbers.
"""

from __future__ import annotations

import statistics
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .digest import NONCE_SIZE, OpCounters
from .errors import WorkloadTooSmall
from .plan import ExecutionPlan
from .runtime import FunctionRegistry, execute_plan

# input-step categories, named after the hash-input cases
CASE_SOURCE = "a"  # only the nonce comes in
CASE_SAME = "b"  # one predecessor in the same enclave
CASE_CROSS = "c"  # one predecessor in another enclave
CASE_MULTI = "d"  # several predecessors


@dataclass(frozen=True)
class NodeProfile:
    node_id: str
    in_degree: int
    cross_in: int
    cross_out: int
    terminal: bool
    case: str


@dataclass
class PlanProfile:
    n: int
    nodes: list[NodeProfile]

    @property
    def case_counts(self) -> Counter:
        return Counter(p.case for p in self.nodes)

    @property
    def case_frequencies(self) -> dict[str, float]:
        counts = self.case_counts
        return {c: counts.get(c, 0) / self.n for c in (CASE_SOURCE, CASE_CROSS, CASE_MULTI, CASE_SAME)}

    def node(self, node_id: str) -> NodeProfile:
        return next(p for p in self.nodes if p.node_id == node_id)


def profile(plan: ExecutionPlan) -> PlanProfile:
    rows = []
    for nid in plan.order:
        preds = plan.predecessors(nid)
        succs = plan.successors(nid)
        cross_in = sum(plan.is_cross(p, nid) for p in preds)
        if not preds:
            case = CASE_SOURCE
        elif len(preds) > 1:
            case = CASE_MULTI
        else:
            case = CASE_CROSS if cross_in else CASE_SAME
        rows.append(
            NodeProfile(nid, len(preds), cross_in, sum(plan.is_cross(nid, s) for s in succs), not succs, case)
        )
    return PlanProfile(len(rows), rows)


def predict_cloud_ops(prof: PlanProfile) -> OpCounters:
    c = OpCounters()
    for p in prof.nodes:
        c.con_count += 1
        if p.case == CASE_CROSS:
            c.xor_count += 1
            c.hash_count += 1
        elif p.case == CASE_MULTI:
            c.add_count += p.in_degree - 1
            c.xor_count += p.cross_in
            c.hash_count += p.cross_in
        c.hash_count += 2 * p.cross_out
        c.xor_count += p.cross_out
        if p.terminal:
            c.hash_count += 1
    return c


def predict_user_ops(prof: PlanProfile) -> OpCounters:
    c = OpCounters()
    for p in prof.nodes:
        c.con_count += 1
        if p.case == CASE_MULTI:
            c.add_count += p.in_degree - 1
        c.hash_count += p.cross_out + (1 if p.terminal else 0)
    return c


def _closed_form_terms(prof: PlanProfile):
    n = prof.n
    freq = prof.case_frequencies
    multi = [p for p in prof.nodes if p.case == CASE_MULTI]
    m = statistics.fmean(p.in_degree for p in multi) if multi else 0.0
    m_cross = statistics.fmean(p.cross_in for p in multi) if multi else 0.0
    q_cross = sum(p.cross_out for p in prof.nodes) / (n - 1) if n > 1 else 0.0
    return n, freq[CASE_CROSS], freq[CASE_MULTI], m, m_cross, q_cross


def closed_form_cloud(prof: PlanProfile) -> dict[str, float]:
    """Whole-plan totals for the cloud algorithm, evaluated with case frequencies."""
    n, pr2, pr3, m, m_cross, q_cross = _closed_form_terms(prof)
    return {
        "con_count": n,
        "add_count": n * pr3 * (m - 1) if pr3 else 0.0,
        "xor_count": n * (pr2 + pr3 * m_cross) + (n - 1) * q_cross,
        "hash_count": n * (pr2 + pr3 * m_cross) + 1 + 2 * (n - 1) * q_cross,
    }


def closed_form_user(prof: PlanProfile) -> dict[str, float]:
    n, _, pr3, m, _, q_cross = _closed_form_terms(prof)
    return {
        "con_count": n,
        "add_count": n * pr3 * (m - 1) if pr3 else 0.0,
        "xor_count": 0.0,
        "hash_count": 1 + (n - 1) * q_cross,
    }


# --- overhead measurement -----------------------------------------------------

MIN_NODE_SECONDS = 1e-3


@dataclass
class OverheadRow:
    nodes: int
    enclaves: int
    mean_ms_with: float
    mean_ms_without: float
    delta_ms: float
    delta_pct: float
    bookkeeping_ms: float
    bookkeeping_pct: float


@dataclass
class OverheadReport:
    rows: list[OverheadRow] = field(default_factory=list)

    def linear_fit(self) -> tuple[float, float, float]:
        """(slope ms/node, intercept ms, R^2) of bookkeeping time against node count."""
        xs = [r.nodes for r in self.rows]
        ys = [r.bookkeeping_ms for r in self.rows]
        slope, intercept = statistics.linear_regression(xs, ys)
        r2 = statistics.correlation(xs, ys) ** 2
        return slope, intercept, r2

    def to_dict(self) -> dict:
        out: dict = {"rows": [asdict(r) for r in self.rows]}
        if len(self.rows) >= 2:
            slope, intercept, r2 = self.linear_fit()
            out["fit"] = {"slope_ms_per_node": slope, "intercept_ms": intercept, "r2": r2}
        return out

    def to_text(self) -> str:
        head = f"{'nodes':>5} {'encl':>4} {'with_ms':>10} {'without_ms':>10} {'delta_ms':>9} {'delta_%':>8} {'chain_ms':>9} {'chain_%':>8}"
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.nodes:>5} {r.enclaves:>4} {r.mean_ms_with:>10.3f} {r.mean_ms_without:>10.3f} "
                f"{r.delta_ms:>9.3f} {r.delta_pct:>8.3f} {r.bookkeeping_ms:>9.4f} {r.bookkeeping_pct:>8.4f}"
            )
        if len(self.rows) >= 2:
            slope, intercept, r2 = self.linear_fit()
            lines.append(f"bookkeeping fit: {slope * 1000:.2f} us/node + {intercept * 1000:.2f} us, R^2={r2:.4f}")
        return "\n".join(lines)


def benchmark_overhead(
    plan: ExecutionPlan,
    functions: FunctionRegistry,
    repetitions: int,
    data: bytes = b"benchmark",
    r: Optional[bytes] = None,
) -> OverheadRow:
    """Mean wall time of runs with and without hash-chain bookkeeping.

    Runs alternate between the two modes.  The bookkeeping share is also
    timed directly inside the runtime, which is far less noisy than the
    difference of two wall-clock means.  Each node's share is taken as its
    minimum over repetitions (preemption only ever adds time) and the
    shares are summed.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    r = r if r is not None else bytes(NONCE_SIZE)
    with_s, without_s, chain_s = [], [], []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        execute_plan(plan, data, r, functions, bookkeeping=False)
        without_s.append(time.perf_counter() - t0)
        if without_s[0] / len(plan.nodes) < MIN_NODE_SECONDS:
            raise WorkloadTooSmall(
                f"{1000 * without_s[0] / len(plan.nodes):.3f} ms per node is below the 1 ms floor"
            )
        t0 = time.perf_counter()
        run = execute_plan(plan, data, r, functions)
        with_s.append(time.perf_counter() - t0)
        chain_s.append(run.bookkeeping_by_node)
    mean_with = 1000 * statistics.fmean(with_s)
    mean_without = 1000 * statistics.fmean(without_s)
    chain = 1000 * sum(min(rep[nid] for rep in chain_s) for nid in plan.node_ids)
    return OverheadRow(
        nodes=len(plan.nodes),
        enclaves=len(plan.enclaves),
        mean_ms_with=mean_with,
        mean_ms_without=mean_without,
        delta_ms=mean_with - mean_without,
        delta_pct=100 * (mean_with - mean_without) / mean_without,
        bookkeeping_ms=chain,
        bookkeeping_pct=100 * chain / (1000 * min(with_s)),
    )


def overhead_sweep(
    plans: Sequence[ExecutionPlan], functions: FunctionRegistry, repetitions: int
) -> OverheadReport:
    return OverheadReport([benchmark_overhead(p, functions, repetitions) for p in plans])
