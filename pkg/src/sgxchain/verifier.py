"""User-side recomputation of the plan hash and the accept/reject decision.

The user knows the plan, the public tags and the nonce ``r`` but never sees
intermediate results.  Cross-enclave edges carry ``hash(h)`` here, which is
what the cloud's ``hash(h) XOR hash(res) XOR hash(res')`` collapses to when
``res' == res``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from . import symbolic as sym
from .digest import Algebra, Digest, OpCounters
from .plan import ExecutionPlan
from .runtime import ExecutionTrace, NodeRecord, compute_hash_input, input_expr


class Reason(enum.Enum):
    BAD_SIGNATURE = "BadSignature"
    HASH_MISMATCH = "HashMismatch"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: Optional[Reason] = None
    result: Optional[bytes] = None
    expected: Optional[bytes] = field(default=None, compare=False)
    received: Optional[bytes] = field(default=None, compare=False)

    def __str__(self) -> str:
        return "Accept" if self.accepted else f"Reject({self.reason.value})"


@dataclass
class UserHash:
    hash_user: Digest
    trace: ExecutionTrace
    counters: OpCounters


def compute_user_hash(
    plan: ExecutionPlan, r: bytes, *, algebra: Optional[Algebra] = None, symbolic: bool = False
) -> UserHash:
    algebra = algebra or Algebra()
    raw: dict[str, bytes] = {}
    raw_expr: dict[str, sym.Expr] = {}
    hashed: dict[tuple[str, str], Digest] = {}
    hashed_expr: dict[str, sym.Expr] = {}
    trace = ExecutionTrace("user")
    hash_user = None

    for nid in plan.order:
        node = plan.node(nid)
        preds = plan.predecessors(nid)
        if not preds:
            contributions, exprs = [r], [sym.NONCE]
        else:
            contributions, exprs = [], []
            for p in preds:
                if plan.is_cross(p, nid):
                    contributions.append(hashed[(p, nid)])
                    exprs.append(hashed_expr.get(p))
                else:
                    contributions.append(raw[p])
                    exprs.append(raw_expr.get(p))
        h = compute_hash_input(node, contributions, algebra)
        h_expr = input_expr(node, exprs) if symbolic else None
        succs = plan.successors(nid)
        chain_out: bytes = h
        out_expr = h_expr
        if not succs:
            hash_user = chain_out = algebra.hash(h)
            out_expr = sym.Hash(h_expr) if symbolic else None
        for s in succs:
            if plan.is_cross(nid, s):
                hashed[(nid, s)] = chain_out = algebra.hash(h)
                if symbolic:
                    hashed_expr[nid] = out_expr = sym.Hash(h_expr)
            else:
                raw[nid] = h
                if symbolic:
                    raw_expr[nid] = h_expr
        trace.records[nid] = NodeRecord(nid, h, chain_out, b"", h_expr, out_expr)
        trace.order.append(nid)

    return UserHash(hash_user, trace, algebra.counters)


def verify(expected: bytes, received_hash: bytes, sig_ok: bool, received_result: Optional[bytes] = None) -> Verdict:
    """Accept iff the signature checked out and the two plan hashes agree."""
    digests = {"expected": bytes(expected), "received": bytes(received_hash)}
    if not sig_ok:
        return Verdict(False, Reason.BAD_SIGNATURE, **digests)
    if digests["expected"] != digests["received"]:
        return Verdict(False, Reason.HASH_MISMATCH, **digests)
    return Verdict(True, None, received_result, **digests)


def verification_report(verdict: Verdict, plan: ExecutionPlan) -> dict:
    return {
        "verdict": "Accept" if verdict.accepted else "Reject",
        "reason": verdict.reason.value if verdict.reason else None,
        "expected_hex": verdict.expected.hex() if verdict.expected is not None else None,
        "received_hex": verdict.received.hex() if verdict.received is not None else None,
        "plan_fingerprint": plan.fingerprint().hex(),
    }
