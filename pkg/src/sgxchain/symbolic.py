"""Symbolic shadows of chain values, for printing hash-chain formulas.

Expressions are built alongside the byte values when tracing is enabled
and rendered with the notation used in hash-chain write-ups::

    hash(((r||tag_1||tag_2) + (hash(r||tag_3)) + (r||tag_4)) || tag_5)

Rendering rules: a concatenation whose left side is a bare ``r``/tag chain
is written flat, any other left side is parenthesised; sums parenthesise
every operand; XOR runs are flat except inside a sum operand, where they
nest to the left.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Concat:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sum:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Hash:
    inner: "Expr"


@dataclass(frozen=True)
class Xor:
    left: "Expr"
    right: "Expr"


Expr = Union[Atom, Concat, Sum, Hash, Xor]

NONCE = Atom("r")


def tag_atom(node_id: str) -> Atom:
    return Atom(f"tag_{node_id}")


def res_atom(node_id: str, received: bool = False) -> Atom:
    return Atom(f"res'_{node_id}" if received else f"res_{node_id}")


def _plain(e: Expr) -> bool:
    if isinstance(e, Atom):
        return True
    return isinstance(e, Concat) and _plain(e.left)


def _xor_terms(e: Expr) -> list[Expr]:
    if isinstance(e, Xor):
        return _xor_terms(e.left) + _xor_terms(e.right)
    return [e]


def render(e: Expr, in_sum: bool = False) -> str:
    if isinstance(e, Atom):
        return e.name
    if isinstance(e, Hash):
        return f"hash({render(e.inner)})"
    if isinstance(e, Concat):
        right = render(e.right)
        if _plain(e.left):
            return f"{render(e.left)}||{right}"
        if isinstance(e.left, Sum):
            return f"({render(e.left)}) || {right}"
        return f"({render(e.left)})||{right}"
    if isinstance(e, Sum):
        return " + ".join(f"({render(op, in_sum=True)})" for op in e.operands)
    if isinstance(e, Xor):
        if in_sum:
            left = render(e.left, in_sum=True)
            if isinstance(e.left, Xor):
                left = f"({left})"
            return f"{left} ⊕ {render(e.right)}"
        return " ⊕ ".join(render(t) for t in _xor_terms(e))
    raise TypeError(f"not an expression: {e!r}")


_WS = re.compile(r"\s+")


def normalize(text: str) -> str:
    """Strip whitespace so renderings can be compared modulo layout."""
    return _WS.sub("", text)


def referential_listing(plan, side: str = "user") -> list[tuple[str, str]]:
    """Per-node ``(node_id, formula)`` pairs written in terms of ``H_<pred>``.

    A node whose successors are all in other enclaves (or that is terminal)
    publishes the hashed form; otherwise ``H_<id>`` is the raw input and
    cross-enclave readers refer to ``hash(H_<id>)``.
    """
    if side not in ("user", "cloud"):
        raise ValueError(f"side must be 'user' or 'cloud', not {side!r}")
    rows = []
    for nid in plan.order:
        preds = plan.predecessors(nid)
        terms = []
        for p in preds:
            ref = f"H_{p}"
            if plan.is_cross(p, nid):
                if not _publishes_hashed(plan, p):
                    ref = f"hash({ref})" if side == "user" else f"hash({ref}) ⊕ hash(res_{p})"
                if side == "cloud":
                    ref = f"({ref} ⊕ hash(res'_{p}))"
            terms.append(ref)
        if not preds:
            h = f"r||tag_{nid}"
        elif len(terms) == 1:
            h = f"{terms[0]}||tag_{nid}"
        else:
            h = f"({' + '.join(terms)}) || tag_{nid}"
        if not plan.successors(nid):
            out = f"hash({h})"
        elif _publishes_hashed(plan, nid):
            out = f"hash({h})" if side == "user" else f"hash({h}) ⊕ hash(res_{nid})"
        else:
            out = h
        rows.append((nid, out))
    return rows


def _publishes_hashed(plan, nid: str) -> bool:
    succs = plan.successors(nid)
    return all(plan.is_cross(nid, s) for s in succs)
