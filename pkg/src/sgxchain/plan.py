"""Execution plans: labeled DAGs of ECall nodes with enclave assignments."""

from __future__ import annotations

import enum
import hashlib
import heapq
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Union

from .digest import TAG_SIZE
from .errors import (
    CyclicPlan,
    DanglingEdge,
    DisconnectedPlan,
    DuplicateNodeId,
    DuplicateTag,
    EmptyPlan,
    MalformedEdge,
    MultipleSinks,
    MutationInvalid,
    UnknownEdge,
    ValidationError,
)

Edge = tuple[str, str]


class EdgeClass(enum.Enum):
    SAME_ENCLAVE = "SameEnclave"
    CROSS_ENCLAVE = "CrossEnclave"


@dataclass(frozen=True)
class PlanNode:
    node_id: str
    tag: bytes
    enclave: int
    function_name: str

    def __post_init__(self):
        if len(self.tag) != TAG_SIZE:
            raise ValueError(f"tag of {self.node_id!r} must be {TAG_SIZE} octets")
        if self.enclave < 0:
            raise ValueError(f"enclave id of {self.node_id!r} must be non-negative")


@dataclass(frozen=True)
class ExecutionPlan:
    """Immutable plan.  Construction does not validate; call :func:`validate`."""

    nodes: tuple[PlanNode, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))

    @cached_property
    def by_id(self) -> dict[str, PlanNode]:
        return {n.node_id: n for n in self.nodes}

    @cached_property
    def _preds(self) -> dict[str, list[str]]:
        preds: dict[str, list[str]] = {n.node_id: [] for n in self.nodes}
        for u, v in self.edges:
            if v in preds:
                preds[v].append(u)
        return {k: sorted(v) for k, v in preds.items()}

    @cached_property
    def _succs(self) -> dict[str, list[str]]:
        succs: dict[str, list[str]] = {n.node_id: [] for n in self.nodes}
        for u, v in self.edges:
            if u in succs:
                succs[u].append(v)
        return {k: sorted(v) for k, v in succs.items()}

    def node(self, node_id: str) -> PlanNode:
        return self.by_id[node_id]

    def predecessors(self, node_id: str) -> list[str]:
        return self._preds[node_id]

    def successors(self, node_id: str) -> list[str]:
        return self._succs[node_id]

    @property
    def node_ids(self) -> list[str]:
        return sorted(self.by_id)

    @property
    def sources(self) -> list[str]:
        return [n for n in self.node_ids if not self._preds[n]]

    @property
    def sinks(self) -> list[str]:
        return [n for n in self.node_ids if not self._succs[n]]

    @property
    def sink(self) -> str:
        (only,) = self.sinks
        return only

    @property
    def enclaves(self) -> list[int]:
        return sorted({n.enclave for n in self.nodes})

    def is_cross(self, u: str, v: str) -> bool:
        return self.by_id[u].enclave != self.by_id[v].enclave

    @cached_property
    def order(self) -> list[str]:
        return topological_order(self)

    def fingerprint(self) -> bytes:
        return structure_fingerprint(self)


def validate(plan: ExecutionPlan, unique_tags: bool = True) -> None:
    """Raise the first violated invariant as a :class:`ValidationError` subclass."""
    if not plan.nodes:
        raise EmptyPlan("plan has no nodes")
    ids: set[str] = set()
    for n in plan.nodes:
        if n.node_id in ids:
            raise DuplicateNodeId(f"node id {n.node_id!r} appears twice", n.node_id)
        ids.add(n.node_id)
    seen_edges: set[Edge] = set()
    for edge in plan.edges:
        if len(edge) != 2:
            raise MalformedEdge(f"edge {edge!r} is not a pair", edge)
        u, v = edge
        if u not in ids or v not in ids:
            raise DanglingEdge(f"edge {u}->{v} references an unknown node", edge)
        if u == v:
            raise MalformedEdge(f"self-loop on {u}", edge)
        if edge in seen_edges:
            raise MalformedEdge(f"duplicate edge {u}->{v}", edge)
        seen_edges.add(edge)
    if unique_tags:
        owner: dict[bytes, str] = {}
        for n in sorted(plan.nodes, key=lambda n: n.node_id):
            if n.tag in owner:
                raise DuplicateTag(f"tag {n.tag.hex()} shared by {owner[n.tag]} and {n.node_id}", n.node_id)
            owner[n.tag] = n.node_id
    order = _kahn(plan)
    if len(order) != len(plan.nodes):
        stuck = sorted(ids - set(order))
        raise CyclicPlan(f"cycle through {stuck[0]}", stuck[0])
    _check_connected(plan)
    sinks = plan.sinks
    if len(sinks) > 1:
        raise MultipleSinks(f"plan has {len(sinks)} sinks: {', '.join(sinks)}", sinks[1])


def _kahn(plan: ExecutionPlan) -> list[str]:
    indeg = {n: len(plan.predecessors(n)) for n in plan.by_id}
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        n = heapq.heappop(heap)
        out.append(n)
        for s in plan.successors(n):
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, s)
    return out


def _check_connected(plan: ExecutionPlan) -> None:
    ids = plan.node_ids
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        n = stack.pop()
        for m in plan.predecessors(n) + plan.successors(n):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    if len(seen) != len(ids):
        missing = sorted(set(ids) - seen)[0]
        raise DisconnectedPlan(f"node {missing} is not connected to {ids[0]}", missing)


def topological_order(plan: ExecutionPlan) -> list[str]:
    """Kahn's algorithm, ties broken by ascending node id."""
    order = _kahn(plan)
    if len(order) != len(plan.nodes):
        raise CyclicPlan("plan is cyclic")
    return order


def edge_classify(plan: ExecutionPlan, edge: Edge) -> EdgeClass:
    u, v = edge
    if (u, v) not in set(plan.edges):
        raise UnknownEdge(f"edge {u}->{v} is not in the plan")
    return EdgeClass.CROSS_ENCLAVE if plan.is_cross(u, v) else EdgeClass.SAME_ENCLAVE


def structure_fingerprint(plan: ExecutionPlan) -> bytes:
    """Digest of the labeled DAG as seen from the sink.

    Covers each node's tag, the DAG wiring, and whether each edge crosses an
    enclave boundary.  Sibling order does not matter.  Two plans compare
    equal here exactly when the hash chain cannot tell them apart (up to
    hash collisions).
    """
    memo: dict[str, bytes] = {}
    for n in plan.order:
        parts = sorted(
            (b"X" if plan.is_cross(p, n) else b"S") + memo[p] for p in plan.predecessors(n)
        )
        h = hashlib.sha256(plan.node(n).tag)
        for part in parts:
            h.update(part)
        memo[n] = h.digest()
    return hashlib.sha256(b"".join(sorted(memo[s] for s in plan.sinks))).digest()


def labeled_equal(a: ExecutionPlan, b: ExecutionPlan) -> bool:
    return structure_fingerprint(a) == structure_fingerprint(b)


# --- mutations (the attacker's rewired plan) --------------------------------


@dataclass(frozen=True)
class SwapTags:
    """Exchange the ECalls (tag, function, enclave) at two plan positions."""

    a: str
    b: str


@dataclass(frozen=True)
class RewireEdge:
    src: str
    old_to: str
    new_to: str


@dataclass(frozen=True)
class DropNode:
    node: str


@dataclass(frozen=True)
class DuplicateNode:
    """Invoke the same ECall a second time right after the original."""

    node: str


PlanMutation = Union[SwapTags, RewireEdge, DropNode, DuplicateNode]


def _require(plan: ExecutionPlan, *node_ids: str) -> None:
    for n in node_ids:
        if n not in plan.by_id:
            raise MutationInvalid(f"unknown node {n!r}")


def mutate(plan: ExecutionPlan, mutation: PlanMutation) -> ExecutionPlan:
    """Return the rewired plan; the input plan is never modified."""
    unique_tags = True
    if isinstance(mutation, SwapTags):
        _require(plan, mutation.a, mutation.b)
        if mutation.a == mutation.b:
            raise MutationInvalid("cannot swap a node with itself")
        na, nb = plan.node(mutation.a), plan.node(mutation.b)
        swapped = {
            na.node_id: replace(na, tag=nb.tag, function_name=nb.function_name, enclave=nb.enclave),
            nb.node_id: replace(nb, tag=na.tag, function_name=na.function_name, enclave=na.enclave),
        }
        new = ExecutionPlan(tuple(swapped.get(n.node_id, n) for n in plan.nodes), plan.edges)
    elif isinstance(mutation, RewireEdge):
        _require(plan, mutation.src, mutation.old_to, mutation.new_to)
        old = (mutation.src, mutation.old_to)
        if old not in set(plan.edges):
            raise MutationInvalid(f"no edge {old[0]}->{old[1]} to rewire")
        edges = [e for e in plan.edges if e != old] + [(mutation.src, mutation.new_to)]
        new = ExecutionPlan(plan.nodes, tuple(edges))
    elif isinstance(mutation, DropNode):
        _require(plan, mutation.node)
        d = mutation.node
        bypass = [(p, s) for p in plan.predecessors(d) for s in plan.successors(d)]
        edges = [e for e in plan.edges if d not in e]
        edges += [e for e in bypass if e not in edges]
        new = ExecutionPlan(tuple(n for n in plan.nodes if n.node_id != d), tuple(edges))
    elif isinstance(mutation, DuplicateNode):
        _require(plan, mutation.node)
        d = mutation.node
        copy_id = d + "'"
        while copy_id in plan.by_id:
            copy_id += "'"
        copy = replace(plan.node(d), node_id=copy_id)
        edges = [(copy_id, v) if u == d else (u, v) for u, v in plan.edges] + [(d, copy_id)]
        new = ExecutionPlan(plan.nodes + (copy,), tuple(edges))
        unique_tags = False
    else:
        raise MutationInvalid(f"unsupported mutation {mutation!r}")

    try:
        validate(new, unique_tags=unique_tags)
    except ValidationError as exc:
        raise MutationInvalid(f"{mutation} yields an invalid plan: {exc}") from exc
    if labeled_equal(new, plan):
        raise MutationInvalid(f"{mutation} leaves the labeled DAG unchanged")
    return new


def build_plan(nodes: Iterable[PlanNode], edges: Iterable[Edge] = ()) -> ExecutionPlan:
    """Construct and validate in one step."""
    plan = ExecutionPlan(tuple(nodes), tuple(edges))
    validate(plan)
    return plan
