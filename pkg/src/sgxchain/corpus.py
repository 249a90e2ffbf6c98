"""Attack campaigns over freshly generated plans, one plan per attack."""

from __future__ import annotations

from typing import Optional

from .attacks import (
    CampaignReport,
    honest_run,
    random_ddrc,
    random_misroute,
    random_tamper,
    run_campaign,
)
from .entropy import Rng, child_rng
from .errors import AttackError
from .runtime import FunctionRegistry
from .scenario import Scenario, random_scenario


def _one(rng: Rng, functions: FunctionRegistry, kind: str, label: str, max_tries: int = 50):
    for _ in range(max_tries):
        sc = random_scenario(rng)
        if kind == "ddrc":
            if len(sc.plan.nodes) < 2:
                continue
            return sc, random_ddrc(sc.plan, rng, label)
        if kind == "otm_misroute":
            spec = random_misroute(sc.plan, rng, label)
        else:
            spec = random_tamper(honest_run(sc, functions, child_rng(rng)).run.trace, rng, label)
        if spec is not None:
            return sc, spec
    raise AttackError(f"could not generate a {kind} attack in {max_tries} plans")


def corpus_campaign(
    rng: Rng,
    functions: FunctionRegistry,
    *,
    ddrc: int = 0,
    tamper: int = 0,
    misroute: int = 0,
) -> CampaignReport:
    report: Optional[CampaignReport] = None
    for kind, count in (("ddrc", ddrc), ("otm_tamper", tamper), ("otm_misroute", misroute)):
        for i in range(count):
            sc, spec = _one(rng, functions, kind, f"{kind}-{i}")
            part = run_campaign(sc, [spec], functions, child_rng(rng))
            if report is None:
                report = part
            else:
                report.merge(part)
    return report or CampaignReport("Accept (no plans generated)")


def scenario_campaign(
    sc: Scenario,
    rng: Rng,
    functions: FunctionRegistry,
    *,
    ddrc: int = 0,
    tamper: int = 0,
    misroute: int = 0,
) -> CampaignReport:
    """Random attacks against one fixed scenario."""
    specs = [random_ddrc(sc.plan, rng, f"ddrc-{i}") for i in range(ddrc)]
    if tamper:
        trace = honest_run(sc, functions, child_rng(rng)).run.trace
        for i in range(tamper):
            spec = random_tamper(trace, rng, f"otm_tamper-{i}")
            if spec is None:
                raise AttackError("scenario has no cross-enclave messages to tamper with")
            specs.append(spec)
    for i in range(misroute):
        spec = random_misroute(sc.plan, rng, f"otm_misroute-{i}")
        if spec is None:
            raise AttackError("scenario has no misroutable cross-enclave edge")
        specs.append(spec)
    return run_campaign(sc, specs, functions, rng)
