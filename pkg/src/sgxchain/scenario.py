"""Scenario files and plan generators.

A scenario file is JSON::

    {
      "enclaves": [1, 2, 3],
      "nodes": [{"id": "f1", "tag_hex": "...", "enclave": 1, "function": "identity"}, ...],
      "edges": [["f1", "f2"], ...],
      "request": "fig9",
      "data_hex": "...",
      "seed": 7,                 # optional
      "attacks": [...]           # optional
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .attacks import DDRC, AttackSpec, OTMMisroute, OTMTamper, attack_kind
from .digest import TAG_SIZE
from .entropy import Rng
from .errors import ScenarioParseError, ValidationError
from .plan import (
    DropNode,
    DuplicateNode,
    ExecutionPlan,
    PlanMutation,
    PlanNode,
    RewireEdge,
    SwapTags,
    validate,
)


@dataclass
class Scenario:
    plan: ExecutionPlan
    request_id: str
    data: bytes
    attacks: list[AttackSpec] = field(default_factory=list)
    seed: Optional[int] = None
    enclaves: list[int] = field(default_factory=list)

    @property
    def plans(self) -> dict[str, ExecutionPlan]:
        return {self.request_id: self.plan}


def _field(obj: dict, key: str, kind, where: str):
    if not isinstance(obj, dict):
        raise ScenarioParseError("expected an object", where)
    if key not in obj:
        raise ScenarioParseError(f"missing field {key!r}", where)
    value = obj[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise ScenarioParseError(f"expected {kind.__name__}", f"{where}.{key}" if where else key)
    return value


def _hex(text: str, where: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise ScenarioParseError("not a hex string", where) from None


def _edge(value, where: str) -> tuple[str, str]:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, str) for v in value)):
        raise ScenarioParseError("edge must be a [from, to] pair of node ids", where)
    return (value[0], value[1])


_MUTATIONS = {
    "swap_tags": (SwapTags, ("a", "b")),
    "rewire_edge": (RewireEdge, ("src", "old_to", "new_to")),
    "drop_node": (DropNode, ("node",)),
    "duplicate_node": (DuplicateNode, ("node",)),
}


def mutation_from_dict(obj: Any, where: str) -> PlanMutation:
    kind = _field(obj, "type", str, where)
    if kind not in _MUTATIONS:
        raise ScenarioParseError(f"unknown mutation type {kind!r}", f"{where}.type")
    cls, names = _MUTATIONS[kind]
    return cls(*(_field(obj, n, str, where) for n in names))


def mutation_to_dict(m: PlanMutation) -> dict:
    for kind, (cls, names) in _MUTATIONS.items():
        if isinstance(m, cls):
            return {"type": kind, **{n: getattr(m, n) for n in names}}
    raise TypeError(m)


def attack_from_dict(obj: Any, where: str) -> AttackSpec:
    kind = _field(obj, "kind", str, where)
    label = obj.get("target_run", "")
    if kind == "ddrc":
        return DDRC(mutation_from_dict(_field(obj, "mutation", dict, where), f"{where}.mutation"), label)
    if kind == "otm_tamper":
        mask = _hex(_field(obj, "xor_mask", str, where), f"{where}.xor_mask")
        return OTMTamper(
            _edge(_field(obj, "edge", list, where), f"{where}.edge"),
            _field(obj, "octet_index", int, where),
            mask,
            obj.get("target", "result"),
            label,
        )
    if kind == "otm_misroute":
        return OTMMisroute(
            _edge(_field(obj, "victim_edge", list, where), f"{where}.victim_edge"),
            _field(obj, "substitute_from", str, where),
            label,
        )
    raise ScenarioParseError(f"unknown attack kind {kind!r}", f"{where}.kind")


def attack_to_dict(spec: AttackSpec) -> dict:
    out: dict[str, Any] = {"kind": attack_kind(spec)}
    if isinstance(spec, DDRC):
        out["mutation"] = mutation_to_dict(spec.mutation)
    elif isinstance(spec, OTMTamper):
        out.update(edge=list(spec.edge), octet_index=spec.octet_index, xor_mask=spec.xor_mask.hex(), target=spec.target)
    else:
        out.update(victim_edge=list(spec.victim_edge), substitute_from=spec.substitute_from)
    if spec.target_run:
        out["target_run"] = spec.target_run
    return out


def scenario_from_dict(obj: Any) -> Scenario:
    enclaves = _field(obj, "enclaves", list, "")
    if not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in enclaves):
        raise ScenarioParseError("enclave ids must be non-negative integers", "enclaves")
    nodes = []
    for i, raw in enumerate(_field(obj, "nodes", list, "")):
        where = f"nodes[{i}]"
        tag = _hex(_field(raw, "tag_hex", str, where), f"{where}.tag_hex")
        if len(tag) != TAG_SIZE:
            raise ScenarioParseError(f"tag must be {TAG_SIZE} octets", f"{where}.tag_hex")
        enclave = _field(raw, "enclave", int, where)
        if enclave not in enclaves:
            raise ScenarioParseError(f"enclave {enclave} is not declared", f"{where}.enclave")
        nodes.append(PlanNode(_field(raw, "id", str, where), tag, enclave, _field(raw, "function", str, where)))
    edges = [_edge(e, f"edges[{i}]") for i, e in enumerate(_field(obj, "edges", list, ""))]
    plan = ExecutionPlan(tuple(nodes), tuple(edges))
    try:
        validate(plan)
    except ValidationError as exc:
        raise ScenarioParseError(str(exc), "nodes/edges") from exc
    unused = sorted(set(enclaves) - {n.enclave for n in nodes})
    if unused:
        raise ScenarioParseError(f"enclave {unused[0]} hosts no node", "enclaves")
    seed = obj.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise ScenarioParseError("expected int", "seed")
    attacks = [attack_from_dict(a, f"attacks[{i}]") for i, a in enumerate(obj.get("attacks", []))]
    return Scenario(
        plan,
        _field(obj, "request", str, ""),
        _hex(_field(obj, "data_hex", str, ""), "data_hex"),
        attacks,
        seed,
        list(enclaves),
    )


def parse_scenario(text: str) -> Scenario:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    return scenario_from_dict(obj)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario: {exc.strerror}", str(path)) from None
    return parse_scenario(text)


def scenario_to_dict(sc: Scenario) -> dict:
    out = {
        "enclaves": sc.enclaves or sc.plan.enclaves,
        "nodes": [
            {"id": n.node_id, "tag_hex": n.tag.hex(), "enclave": n.enclave, "function": n.function_name}
            for n in sc.plan.nodes
        ],
        "edges": [list(e) for e in sc.plan.edges],
        "request": sc.request_id,
        "data_hex": sc.data.hex(),
    }
    if sc.seed is not None:
        out["seed"] = sc.seed
    if sc.attacks:
        out["attacks"] = [attack_to_dict(a) for a in sc.attacks]
    return out


def reference_scenario() -> Scenario:
    """The seven-node hybrid example shipped with the package."""
    text = resources.files("sgxchain").joinpath("scenarios/fig9.json").read_text(encoding="utf-8")
    return parse_scenario(text)


# --- generated plans ---------------------------------------------------------

# enclave slot for f1..f7: f3 is alone, f6/f7 share a third enclave
_MOTIF_ENCLAVES = (0, 0, 1, 0, 0, 2, 2)
_MOTIF_EDGES = (("f1", "f2"), ("f2", "f5"), ("f3", "f5"), ("f4", "f5"), ("f5", "f6"), ("f6", "f7"))


def _tag(label: str) -> bytes:
    return label.encode()[:TAG_SIZE].ljust(TAG_SIZE, b"_")


def fig9_plan(copies: int = 1, enclaves: int = 3, function: str = "identity") -> ExecutionPlan:
    """The hybrid example's shape repeated ``copies`` times in series.

    Copy ``k`` feeds its last node into the first node of copy ``k + 1``.
    Enclave slots rotate through ``enclaves`` ids so larger plans spread over
    more enclaves.
    """
    if copies < 1:
        raise ValueError("copies must be positive")
    nodes, edges = [], []
    for k in range(copies):
        def nid(name: str) -> str:
            return name if copies == 1 else f"c{k:02d}{name}"

        for i, slot in enumerate(_MOTIF_ENCLAVES):
            name = f"f{i + 1}"
            tag = _tag(f"ecall_{name}") if copies == 1 else _tag(f"e{k:02d}_{name}")
            nodes.append(PlanNode(nid(name), tag, (3 * k + slot) % max(enclaves, 1), function))
        edges += [(nid(u), nid(v)) for u, v in _MOTIF_EDGES]
        if k:
            edges.append((f"c{k - 1:02d}f7", nid("f1")))
    plan = ExecutionPlan(tuple(nodes), tuple(edges))
    validate(plan)
    return plan


def random_plan(
    rng: Rng,
    *,
    max_nodes: int = 50,
    min_nodes: int = 1,
    max_enclaves: int = 7,
    max_in_degree: int = 5,
    functions: tuple[str, ...] = ("digest", "xor_fold"),
) -> ExecutionPlan:
    """Random valid plan: acyclic, single sink, weakly connected.

    Every non-final node gets one to three successors among later nodes, so
    the last node is the unique sink and everything reaches it.
    """
    n = rng.randint(min_nodes, max_nodes)
    k = rng.randint(1, max_enclaves)
    ids = [f"n{i:02d}" for i in range(n)]
    tags: set[bytes] = set()
    while len(tags) < n:
        tags.add(rng.randbytes(TAG_SIZE))
    tag_list = sorted(tags)
    rng.shuffle(tag_list)
    nodes = tuple(PlanNode(ids[i], tag_list[i], rng.randrange(k), rng.choice(functions)) for i in range(n))
    indeg = [0] * n
    edges = []
    for j in range(n - 2, -1, -1):
        later = [t for t in range(j + 1, n) if indeg[t] < max_in_degree]
        for t in rng.sample(later, min(len(later), rng.randint(1, 3))):
            edges.append((ids[j], ids[t]))
            indeg[t] += 1
    plan = ExecutionPlan(nodes, tuple(edges))
    validate(plan)
    return plan


def random_scenario(rng: Rng, **plan_kwargs) -> Scenario:
    plan = random_plan(rng, **plan_kwargs)
    return Scenario(plan, "generated", rng.randbytes(rng.randint(1, 64)), enclaves=plan.enclaves)
