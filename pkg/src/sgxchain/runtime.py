"""Simulated multi-enclave cloud running the cloud-side hash chain.

Each node's hash input is built from its predecessors' contributions and
its tag; each node's output is routed per outgoing edge:

* same-enclave successor: the raw hash input stays inside the enclave;
* cross-enclave successor: ``hash(h) XOR hash(res)`` travels with the
  result through the untrusted channel, and the receiver folds
  ``hash(res')`` back in;
* terminal node: ``hash(h)`` becomes ``hash_cloud``.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from . import symbolic as sym
from .digest import ZERO_DIGEST, Algebra, Digest, OpCounters
from .errors import (
    BoundaryViolation,
    DuplicateName,
    FunctionFailure,
    MissingContribution,
    NoSuchMessage,
    UnknownFunction,
)
from .plan import Edge, ExecutionPlan, PlanNode

BusinessFunction = Callable[[Sequence[bytes]], bytes]


class FunctionRegistry:
    """Name -> deterministic ECall business function."""

    def __init__(self):
        self._functions: dict[str, BusinessFunction] = {}

    def register(self, name: str, fn: BusinessFunction) -> None:
        if name in self._functions:
            raise DuplicateName(f"function {name!r} is already registered")
        self._functions[name] = fn

    def get(self, name: str) -> BusinessFunction:
        try:
            return self._functions[name]
        except KeyError:
            raise UnknownFunction(f"function {name!r} is not registered") from None

    def __contains__(self, name: str) -> bool:
        return name in self._functions

    def names(self) -> list[str]:
        return sorted(self._functions)


def _identity(inputs):
    return b"".join(inputs)


def _reverse(inputs):
    return b"".join(inputs)[::-1]


def _digest(inputs):
    return hashlib.sha256(b"".join(inputs)).digest()


def _xor_fold(inputs):
    width = max(len(x) for x in inputs)
    acc = 0
    for x in inputs:
        acc ^= int.from_bytes(x.ljust(width, b"\0"), "big")
    return acc.to_bytes(width, "big") if width else b""


def busyloop(outer: int = 1000, inner: int = 1000) -> BusinessFunction:
    """Nested-loop workload standing in for real enclave computation.

    The output is a fixed 32 octets so result sizes do not compound along
    fan-in and skew the per-node bookkeeping cost.
    """

    def fn(inputs):
        acc = 0
        for i in range(outer):
            for j in range(inner):
                acc += i ^ j
        return hashlib.sha256(b"".join(inputs) + acc.to_bytes(8, "big")).digest()

    return fn


def default_registry() -> FunctionRegistry:
    reg = FunctionRegistry()
    reg.register("identity", _identity)
    reg.register("reverse", _reverse)
    reg.register("digest", _digest)
    reg.register("xor_fold", _xor_fold)
    reg.register("busyloop_1M", busyloop(1000, 1000))
    reg.register("busyloop_100k", busyloop(100, 1000))
    return reg


@dataclass(frozen=True)
class BoundaryMessage:
    from_node: str
    to_node: str
    chain: Digest
    result: bytes
    chain_expr: Optional[sym.Expr] = field(default=None, compare=False)

    @property
    def edge(self) -> Edge:
        return (self.from_node, self.to_node)

    def to_dict(self) -> dict:
        return {
            "from": self.from_node,
            "to": self.to_node,
            "chain_hex": self.chain.hex(),
            "result_hex": self.result.hex(),
        }


# A tap sees every message in transit and may replace it.
ChannelTap = Callable[[BoundaryMessage, "UntrustedChannel"], BoundaryMessage]


class EnclaveSim:
    """Per-enclave private table of raw chain values."""

    def __init__(self, enclave_id: int, functions=()):
        self.enclave_id = enclave_id
        self.functions = frozenset(functions)
        self._chain: dict[str, bytes] = {}
        self._expr: dict[str, sym.Expr] = {}
        self._results: dict[str, bytes] = {}

    def store(self, node_id: str, h: bytes, res: bytes, expr=None) -> None:
        self._chain[node_id] = h
        self._results[node_id] = res
        if expr is not None:
            self._expr[node_id] = expr

    def read(self, node_id: str, reader_enclave: int):
        if reader_enclave != self.enclave_id:
            raise BoundaryViolation(
                f"enclave {reader_enclave} cannot read state of enclave {self.enclave_id}"
            )
        if node_id not in self._results:
            raise KeyError(node_id)
        return self._chain.get(node_id), self._results[node_id], self._expr.get(node_id)


class UntrustedChannel:
    """Everything between enclaves.  Attacks hook in here and nowhere else."""

    def __init__(self, tap: Optional[ChannelTap] = None):
        self.tap = tap
        self._pending: dict[Edge, BoundaryMessage] = {}
        self.sent: list[BoundaryMessage] = []
        self.delivered: list[BoundaryMessage] = []

    def send(self, msg: BoundaryMessage) -> None:
        if not isinstance(msg.chain, Digest):
            raise BoundaryViolation(f"raw chain value on edge {msg.from_node}->{msg.to_node}")
        self._pending[msg.edge] = msg
        self.sent.append(msg)

    def emitted_by(self, node_id: str) -> BoundaryMessage:
        for msg in self.sent:
            if msg.from_node == node_id:
                return msg
        raise NoSuchMessage(f"node {node_id} has not emitted a boundary message")

    def deliver(self, edge: Edge) -> BoundaryMessage:
        if edge not in self._pending:
            raise MissingContribution(edge)
        msg = self._pending.pop(edge)
        if self.tap is not None:
            msg = self.tap(msg, self)
        # a tampered chain must still be a digest; tags cannot smuggle raw values in
        if not isinstance(msg.chain, Digest):
            msg = replace(msg, chain=Digest(msg.chain))
        self.delivered.append(msg)
        return msg


@dataclass
class NodeRecord:
    node_id: str
    h: Optional[bytes]
    chain_out: Optional[bytes]
    result: bytes
    h_expr: Optional[sym.Expr] = None
    out_expr: Optional[sym.Expr] = None


@dataclass
class ExecutionTrace:
    side: str
    records: dict[str, NodeRecord] = field(default_factory=dict)
    sent: list[BoundaryMessage] = field(default_factory=list)
    delivered: list[BoundaryMessage] = field(default_factory=list)
    order: list[str] = field(default_factory=list)

    @property
    def final_expr(self) -> Optional[sym.Expr]:
        return self.records[self.order[-1]].out_expr if self.order else None

    def to_dict(self) -> dict:
        nodes = []
        for nid in self.order:
            rec = self.records[nid]
            entry = {
                "node": nid,
                "h_hex": rec.h.hex() if rec.h is not None else None,
                "H_hex": rec.chain_out.hex() if rec.chain_out is not None else None,
            }
            if self.side == "cloud":
                entry["res_hex"] = rec.result.hex()
            if rec.out_expr is not None:
                entry["H_expr"] = sym.render(rec.out_expr)
            nodes.append(entry)
        out = {"side": self.side, "nodes": nodes}
        if self.side == "cloud":
            out["boundary_messages"] = [m.to_dict() for m in self.delivered]
        if self.final_expr is not None:
            out["final_expr"] = sym.render(self.final_expr)
        return out


@dataclass
class ExecutionResult:
    result: bytes
    hash_cloud: Optional[Digest]
    trace: ExecutionTrace
    counters: OpCounters
    bookkeeping_seconds: float = 0.0
    # per-node share of bookkeeping_seconds, keyed by node id
    bookkeeping_by_node: dict[str, float] = field(default_factory=dict)


def compute_hash_input(node: PlanNode, contributions: Sequence[bytes], algebra: Algebra) -> bytes:
    """``c||tag`` for one contribution, ``add(contributions)||tag`` for several."""
    if not contributions:
        raise ValueError(f"node {node.node_id} has no contributions")
    if len(contributions) == 1:
        return algebra.concat(contributions[0], node.tag)
    return algebra.concat(algebra.add(contributions), node.tag)


def input_expr(node: PlanNode, contributions: Sequence[sym.Expr]) -> sym.Expr:
    tag = sym.tag_atom(node.node_id)
    if len(contributions) == 1:
        return sym.Concat(contributions[0], tag)
    return sym.Concat(sym.Sum(tuple(contributions)), tag)


def compute_hash_output(
    plan: ExecutionPlan, node: PlanNode, h: bytes, res: bytes, algebra: Algebra
) -> tuple[Optional[Digest], bool, dict[str, Digest]]:
    """Per-edge output rule.

    Returns ``(terminal_hash, keep_raw, cross_chains)``: the terminal digest
    (or None), whether a same-enclave successor needs the raw ``h``, and the
    chain value for each cross-enclave successor.
    """
    succs = plan.successors(node.node_id)
    if not succs:
        return algebra.hash(h), False, {}
    keep_raw = False
    cross: dict[str, Digest] = {}
    for s in succs:
        if plan.is_cross(node.node_id, s):
            cross[s] = algebra.xor(algebra.hash(h), algebra.hash(res))
        else:
            keep_raw = True
    return None, keep_raw, cross


def execute_plan(
    plan: ExecutionPlan,
    data: bytes,
    r: bytes,
    functions: FunctionRegistry,
    tap: Optional[ChannelTap] = None,
    *,
    algebra: Optional[Algebra] = None,
    symbolic: bool = False,
    bookkeeping: bool = True,
) -> ExecutionResult:
    """Run the plan in topological order and compute ``hash_cloud``.

    With ``bookkeeping=False`` only business functions and result routing run;
    this is the baseline for overhead measurement.  ``symbolic=True`` also
    builds formula expressions for every chain value.
    """
    algebra = algebra or Algebra()
    resident: dict[int, set[str]] = {}
    for n in plan.nodes:
        resident.setdefault(n.enclave, set()).add(n.function_name)
    enclaves = {e: EnclaveSim(e, fns) for e, fns in resident.items()}
    channel = UntrustedChannel(tap)
    trace = ExecutionTrace("cloud")
    spent = 0.0
    per_node: dict[str, float] = {}
    hash_cloud = None
    result = b""

    for nid in plan.order:
        node = plan.node(nid)
        fn = functions.get(node.function_name)
        preds = plan.predecessors(nid)
        inputs: list[bytes] = []
        contributions: list[bytes] = []
        exprs: list[sym.Expr] = []

        before = spent
        t0 = time.perf_counter()
        if not preds:
            inputs.append(data)
            contributions.append(r)
            exprs.append(sym.NONCE)
        for p in preds:
            if plan.is_cross(p, nid):
                msg = channel.deliver((p, nid))
                inputs.append(msg.result)
                if bookkeeping:
                    contributions.append(algebra.xor(msg.chain, algebra.hash(msg.result)))
                    if symbolic:
                        exprs.append(sym.Xor(msg.chain_expr, sym.Hash(sym.res_atom(p, received=True))))
            else:
                try:
                    raw, res_p, expr_p = enclaves[node.enclave].read(p, node.enclave)
                except KeyError:
                    raise MissingContribution((p, nid)) from None
                inputs.append(res_p)
                contributions.append(raw)
                exprs.append(expr_p)
        h = compute_hash_input(node, contributions, algebra) if bookkeeping else None
        h_expr = input_expr(node, exprs) if symbolic else None
        spent += time.perf_counter() - t0

        try:
            res = fn(inputs)
        except Exception as exc:
            raise FunctionFailure(nid, exc) from exc

        t0 = time.perf_counter()
        out_expr = None
        if bookkeeping:
            terminal, _, cross = compute_hash_output(plan, node, h, res, algebra)
        else:
            terminal = None
            cross = {s: ZERO_DIGEST for s in plan.successors(nid) if plan.is_cross(nid, s)}
        enclaves[node.enclave].store(nid, h, res, h_expr)
        chain_expr = None
        if symbolic:
            chain_expr = sym.Xor(sym.Hash(h_expr), sym.Hash(sym.res_atom(nid)))
        for s, chain in cross.items():
            channel.send(BoundaryMessage(nid, s, chain, res, chain_expr))
        if terminal is not None:
            hash_cloud = terminal
            chain_out = terminal
            out_expr = sym.Hash(h_expr) if symbolic else None
        elif cross:
            chain_out = next(iter(cross.values()))
            out_expr = chain_expr
        else:
            chain_out = h
            out_expr = h_expr
        spent += time.perf_counter() - t0
        per_node[nid] = spent - before

        trace.records[nid] = NodeRecord(nid, h, chain_out if bookkeeping else None, res, h_expr, out_expr)
        trace.order.append(nid)
        result = res

    trace.sent = list(channel.sent)
    trace.delivered = list(channel.delivered)
    return ExecutionResult(result, hash_cloud, trace, algebra.counters, spent, per_node)
