"""Hash-chain verification of multi-enclave execution plans."""

from .attacks import DDRC, OTMMisroute, OTMTamper, CampaignReport, apply_ddrc, apply_otm, run_attack, run_campaign
from .cost import benchmark_overhead, predict_cloud_ops, predict_user_ops, profile
from .digest import Algebra, Digest, OpCounters, add, concat, hash_bytes, xor
from .errors import SgxChainError
from .plan import (
    DropNode,
    DuplicateNode,
    EdgeClass,
    ExecutionPlan,
    PlanNode,
    RewireEdge,
    SwapTags,
    edge_classify,
    labeled_equal,
    mutate,
    topological_order,
    validate,
)
from .protocol import build_request, cloud_handle, establish_session, round_trip, user_receive
from .runtime import FunctionRegistry, default_registry, execute_plan
from .scenario import Scenario, fig9_plan, load_scenario, random_plan, reference_scenario
from .verifier import Reason, Verdict, compute_user_hash, verify

__version__ = "0.1.0"
