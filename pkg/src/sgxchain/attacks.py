"""DDRC and OTM fault injection, and campaigns that check every attack is caught.

DDRC: the untrusted scheduler runs a rewired plan while the user verifies
the original.  OTM: messages crossing the untrusted channel are modified
or swapped for another enclave's output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .entropy import Rng, child_rng, make_rng
from .errors import (
    AttackError,
    BaselineFailed,
    MutationInvalid,
    NoSuchMessage,
    NotCrossEnclave,
    UnknownEdge,
)
from .plan import (
    DropNode,
    DuplicateNode,
    Edge,
    ExecutionPlan,
    PlanMutation,
    RewireEdge,
    SwapTags,
    mutate,
)
from .protocol import establish_session, round_trip
from .runtime import BoundaryMessage, ChannelTap, ExecutionTrace, FunctionRegistry, UntrustedChannel


@dataclass(frozen=True)
class DDRC:
    mutation: PlanMutation
    target_run: str = ""


@dataclass(frozen=True)
class OTMTamper:
    """XOR ``xor_mask`` into the message's ``target`` field starting at ``octet_index``."""

    edge: Edge
    octet_index: int
    xor_mask: bytes
    target: str = "result"
    target_run: str = ""


@dataclass(frozen=True)
class OTMMisroute:
    victim_edge: Edge
    substitute_from: str
    target_run: str = ""


AttackSpec = Union[DDRC, OTMTamper, OTMMisroute]


def attack_kind(spec: AttackSpec) -> str:
    return {DDRC: "ddrc", OTMTamper: "otm_tamper", OTMMisroute: "otm_misroute"}[type(spec)]


def apply_ddrc(plan: ExecutionPlan, spec: DDRC) -> ExecutionPlan:
    return mutate(plan, spec.mutation)


def _cross_edge(plan: ExecutionPlan, edge: Edge) -> Edge:
    edge = tuple(edge)
    if edge not in set(plan.edges):
        raise UnknownEdge(f"edge {edge[0]}->{edge[1]} is not in the plan")
    if not plan.is_cross(*edge):
        raise NotCrossEnclave(f"edge {edge[0]}->{edge[1]} stays inside one enclave")
    return edge


def apply_otm(plan: ExecutionPlan, spec: Union[OTMTamper, OTMMisroute]) -> ChannelTap:
    """Build the channel hook that realises ``spec`` on ``plan``."""
    if isinstance(spec, OTMTamper):
        edge = _cross_edge(plan, spec.edge)
        if spec.target not in ("result", "chain"):
            raise AttackError(f"unknown tamper target {spec.target!r}")
        if not spec.xor_mask or not any(spec.xor_mask):
            raise AttackError("an all-zero mask changes nothing")

        def tamper(msg: BoundaryMessage, channel: UntrustedChannel) -> BoundaryMessage:
            if msg.edge != edge:
                return msg
            payload = bytearray(getattr(msg, spec.target))
            end = spec.octet_index + len(spec.xor_mask)
            if spec.octet_index < 0 or end > len(payload):
                raise NoSuchMessage(
                    f"octets {spec.octet_index}..{end - 1} outside the {len(payload)}-octet {spec.target}"
                )
            for i, m in enumerate(spec.xor_mask):
                payload[spec.octet_index + i] ^= m
            return replace(msg, **{spec.target: bytes(payload)})

        return tamper

    if isinstance(spec, OTMMisroute):
        edge = _cross_edge(plan, spec.victim_edge)
        if spec.substitute_from == edge[0]:
            raise AttackError("substituting the genuine sender is not a misroute")
        if spec.substitute_from not in plan.by_id:
            raise NoSuchMessage(f"unknown node {spec.substitute_from!r}")
        if not any(plan.is_cross(spec.substitute_from, s) for s in plan.successors(spec.substitute_from)):
            raise NoSuchMessage(f"node {spec.substitute_from} never sends across an enclave boundary")

        def misroute(msg: BoundaryMessage, channel: UntrustedChannel) -> BoundaryMessage:
            if msg.edge != edge:
                return msg
            other = channel.emitted_by(spec.substitute_from)
            return replace(msg, chain=other.chain, result=other.result, chain_expr=other.chain_expr)

        return misroute

    raise AttackError(f"not an OTM attack: {spec!r}")


# --- random attack generation ----------------------------------------------


def random_mutation(plan: ExecutionPlan, rng: Rng, max_tries: int = 200) -> tuple[PlanMutation, ExecutionPlan]:
    ids = plan.node_ids
    for _ in range(max_tries):
        kind = rng.choice(("swap", "rewire", "drop", "duplicate"))
        if kind == "swap" and len(ids) >= 2:
            a, b = rng.sample(ids, 2)
            mutation: PlanMutation = SwapTags(a, b)
        elif kind == "rewire" and plan.edges and len(ids) >= 3:
            src, old_to = rng.choice(plan.edges)
            mutation = RewireEdge(src, old_to, rng.choice([n for n in ids if n not in (src, old_to)]))
        elif kind == "drop" and len(ids) >= 2:
            mutation = DropNode(rng.choice(ids))
        elif kind == "duplicate":
            mutation = DuplicateNode(rng.choice(ids))
        else:
            continue
        try:
            return mutation, mutate(plan, mutation)
        except MutationInvalid:
            continue
    raise MutationInvalid("no valid mutation found")


def random_ddrc(plan: ExecutionPlan, rng: Rng, label: str = "") -> DDRC:
    mutation, _ = random_mutation(plan, rng)
    return DDRC(mutation, label)


def random_tamper(trace: ExecutionTrace, rng: Rng, label: str = "") -> Optional[OTMTamper]:
    """Single-octet tamper of a message seen in an honest run's ``trace``."""
    if not trace.delivered:
        return None
    msg = rng.choice(trace.delivered)
    target = "chain" if rng.random() < 0.25 or not msg.result else "result"
    width = len(getattr(msg, target))
    return OTMTamper(msg.edge, rng.randrange(width), bytes([rng.randrange(1, 256)]), target, label)


def random_misroute(plan: ExecutionPlan, rng: Rng, label: str = "") -> Optional[OTMMisroute]:
    position = {n: i for i, n in enumerate(plan.order)}
    senders = [n for n in plan.order if any(plan.is_cross(n, s) for s in plan.successors(n))]
    choices = []
    for u, v in plan.edges:
        if plan.is_cross(u, v):
            choices += [((u, v), s) for s in senders if s != u and position[s] < position[v]]
    if not choices:
        return None
    edge, sub = rng.choice(choices)
    return OTMMisroute(edge, sub, label)


# --- campaigns ---------------------------------------------------------------


@dataclass
class AttackOutcome:
    label: str
    kind: str
    description: str
    verdict: str
    expected: str = "Reject"

    @property
    def detected(self) -> bool:
        return self.verdict.startswith("Reject")


@dataclass
class CampaignReport:
    baseline: str
    outcomes: list[AttackOutcome] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.outcomes)

    @property
    def detected(self) -> int:
        return sum(o.detected for o in self.outcomes)

    @property
    def detection_rate(self) -> float:
        return 1.0 if not self.outcomes else self.detected / self.total

    def merge(self, other: "CampaignReport") -> None:
        self.outcomes.extend(other.outcomes)

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "attacks": self.total,
            "detected": self.detected,
            "detection_rate": self.detection_rate,
            "rows": [
                {
                    "label": o.label,
                    "kind": o.kind,
                    "attack": o.description,
                    "verdict": o.verdict,
                    "expected": o.expected,
                }
                for o in self.outcomes
            ],
        }

    def to_text(self) -> str:
        lines = [f"baseline: {self.baseline}"]
        for o in self.outcomes:
            lines.append(f"{o.label:>10}  {o.kind:<13} {o.verdict:<22} expected {o.expected}  {o.description}")
        lines.append(f"detected {self.detected}/{self.total} ({100 * self.detection_rate:.1f}%)")
        return "\n".join(lines)


def _describe(spec: AttackSpec) -> str:
    if isinstance(spec, DDRC):
        return repr(spec.mutation)
    if isinstance(spec, OTMTamper):
        return f"{spec.target}[{spec.octet_index}]^={spec.xor_mask.hex()} on {spec.edge[0]}->{spec.edge[1]}"
    return f"{spec.substitute_from}'s message on {spec.victim_edge[0]}->{spec.victim_edge[1]}"


def run_attack(scenario, spec: AttackSpec, functions: FunctionRegistry, rng: Rng):
    """One attacked round trip in its own session; returns the exchange."""
    session = establish_session(child_rng(rng))
    tap = scheduler = None
    if isinstance(spec, DDRC):
        rewired = apply_ddrc(scenario.plan, spec)
        scheduler = lambda _plan: rewired  # noqa: E731
    else:
        tap = apply_otm(scenario.plan, spec)
    return round_trip(session, scenario.plan, scenario.data, scenario.request_id, functions, tap, scheduler)


def honest_run(scenario, functions: FunctionRegistry, rng: Rng):
    session = establish_session(child_rng(rng))
    return round_trip(session, scenario.plan, scenario.data, scenario.request_id, functions)


def run_campaign(scenario, specs, functions: FunctionRegistry, rng: Optional[Rng] = None) -> CampaignReport:
    """Run one attacked exchange per spec after confirming the honest baseline."""
    rng = rng or make_rng(getattr(scenario, "seed", None))
    baseline = honest_run(scenario, functions, rng)
    if not baseline.verdict.accepted:
        raise BaselineFailed(f"honest run was rejected: {baseline.verdict}")
    report = CampaignReport(str(baseline.verdict))
    for i, spec in enumerate(specs):
        exchange = run_attack(scenario, spec, functions, rng)
        report.outcomes.append(
            AttackOutcome(spec.target_run or f"#{i}", attack_kind(spec), _describe(spec), str(exchange.verdict))
        )
    return report
