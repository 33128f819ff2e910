"""Signal-timing optimization toolkit.

Couples a genetic search over per-intersection phase durations with a
user-equilibrium traffic assignment as the fitness oracle, and ships a
four-intersection incident-response study as a built-in fixture.
"""

__version__ = "0.1.0"

from .assignment import (
    AssignmentResult,
    CostParams,
    SolverOptions,
    all_or_nothing,
    beckmann_term,
    capacity_check,
    link_travel_time,
    solve_ue,
    total_travel_time,
)
from .ga import Chromosome, GAConfig, GAResult, fitness, init_population, run_ga
from .netmodel import (
    IncidentSpec,
    Link,
    Movement,
    Network,
    NetworkError,
    Node,
    NodeKind,
    ODMatrix,
    Turn,
    build_testbed,
    enumerate_routes,
    load_network,
    to_document,
)
from .scenarios import (
    ScenarioConfig,
    ScenarioKind,
    ScenarioReport,
    apply_incident,
    compare,
    run_all_scenarios,
    run_scenario,
)
from .signals import (
    Phase,
    PhaseSplits,
    SignalLayout,
    SignalPlan,
    decode_chromosome,
    encode_plans,
    link_green_split,
    link_green_splits,
    phase_splits,
    repair,
)

__all__ = [
    "__version__",
    "AssignmentResult",
    "CostParams",
    "SolverOptions",
    "all_or_nothing",
    "beckmann_term",
    "capacity_check",
    "link_travel_time",
    "solve_ue",
    "total_travel_time",
    "Chromosome",
    "GAConfig",
    "GAResult",
    "fitness",
    "init_population",
    "run_ga",
    "IncidentSpec",
    "Link",
    "Movement",
    "Network",
    "NetworkError",
    "Node",
    "NodeKind",
    "ODMatrix",
    "Turn",
    "build_testbed",
    "enumerate_routes",
    "load_network",
    "to_document",
    "ScenarioConfig",
    "ScenarioKind",
    "ScenarioReport",
    "apply_incident",
    "compare",
    "run_all_scenarios",
    "run_scenario",
    "Phase",
    "PhaseSplits",
    "SignalLayout",
    "SignalPlan",
    "decode_chromosome",
    "encode_plans",
    "link_green_split",
    "link_green_splits",
    "phase_splits",
    "repair",
]
