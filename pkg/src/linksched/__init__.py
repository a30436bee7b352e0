"""Shadow-queue link scheduling: simulator, schedulers, and analysis tools."""

from .capacity import MembershipResult, boundary_search, region_membership
from .csma import CsmaState, WeightFunction, product_form_check
from .generators import (
    BUILTIN_SCENARIOS,
    generate_bottleneck_star,
    generate_grid,
    generate_linear10,
)
from .queueing import DataQueueBank, Packet, ShadowBank
from .rank import (
    Component,
    FlowLoop,
    FlowPath,
    assign_ranks,
    decompose_components,
    enumerate_flow_paths,
    find_flow_loops,
    verify_ranking,
)
from .scenario import ScenarioError, load_scenario, loads_scenario
from .schedule_engine import (
    MaxWeightSolver,
    Schedule,
    ScheduleSet,
    enumerate_maximal_schedules,
    is_feasible,
    max_weight_schedule,
)
from .schedulers import BPQueueBank, SchedulerKind
from .sim import (
    CsmaParams,
    Scenario,
    SimTrace,
    StabilityVerdict,
    average_delay,
    poisson_arrivals,
    run,
    stability_estimate,
)
from .sweep import SweepSpec, run_sweep
from .topology import (
    DirectedLink,
    Flow,
    FlowSet,
    HopIncidence,
    NetworkGraph,
    ValidationError,
    build_network,
    validate_flows,
)

__version__ = "0.1.0"
