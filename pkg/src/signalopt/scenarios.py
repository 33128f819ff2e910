"""Incident application and the three-scenario comparison harness.

Scenario 1 optimizes signal timings on the intact network.  Scenario 2
replays scenario 1's plan on the network with an incident applied and no
re-timing.  Scenario 3 re-runs the optimizer on the degraded network,
warm-started from the scenario-1 plan so the response can never be worse
than doing nothing.  Scenario runs are independent pure pipelines.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

from .assignment import CostParams, SolverOptions, capacity_check, solve_ue
from .ga import Chromosome, GAConfig, GAResult, run_ga
from .netmodel import IncidentSpec, Network, NetworkError, enumerate_routes
from .signals import SignalLayout, SignalPlan, decode_chromosome, encode_plans, link_green_splits

__all__ = [
    "ScenarioKind",
    "ScenarioConfig",
    "ScenarioReport",
    "ScenarioError",
    "apply_incident",
    "run_scenario",
    "run_all_scenarios",
    "compare",
    "report_to_dict",
    "plans_to_dicts",
    "plans_from_dicts",
]


class ScenarioError(RuntimeError):
    """A scenario was requested without its prerequisites."""


class ScenarioKind(Enum):
    NO_INCIDENT_OPTIMIZED = 1
    INCIDENT_UNOPTIMIZED = 2
    INCIDENT_OPTIMIZED = 3


@dataclass(frozen=True)
class ScenarioConfig:
    ga: GAConfig = GAConfig()
    cost: CostParams = CostParams()
    solver: SolverOptions = SolverOptions()
    incident: IncidentSpec | None = None


@dataclass(frozen=True)
class ScenarioReport:
    kind: ScenarioKind
    plans: tuple  # tuple of SignalPlan
    ttt: float  # vehicle-hours
    link_flows: dict
    green_splits: dict
    relative_gap: float
    converged: bool
    route_flows: dict  # route (tuple of link ids) -> veh/h, for the heaviest OD pair
    od_pair: tuple | None
    capacity_violations: tuple
    ga_result: GAResult | None = None
    deltas: dict = field(default_factory=dict)


def apply_incident(net: Network, incident: IncidentSpec) -> Network:
    """Return a copy of the network with the incident link's capacity scaled.

    The multiplier is (lanes - lanes_blocked) / lanes.  Blocking every lane
    would disconnect the network and is rejected.  The input network is
    never modified; blocking zero lanes returns it unchanged.
    """
    link = net.links.get(incident.link)
    if link is None:
        raise NetworkError(f"incident references unknown link {incident.link!r}")
    if incident.lanes_blocked >= link.lanes:
        raise NetworkError(
            f"incident blocks all {link.lanes} lanes of {incident.link!r}; "
            "full closures are not supported"
        )
    if incident.lanes_blocked == 0:
        return net
    multiplier = (link.lanes - incident.lanes_blocked) / link.lanes
    links = dict(net.links)
    links[incident.link] = dataclasses.replace(link, capacity=link.capacity * multiplier)
    return dataclasses.replace(net, links=links)


def _heaviest_pair(net: Network):
    pairs = net.od.positive_pairs()
    if not pairs:
        return None
    return max(pairs, key=lambda kv: (kv[1], str(kv[0][0]), str(kv[0][1])))[0]


def _route_flows(net: Network, pair, splits, params: CostParams, flows) -> dict:
    """Approximate route volumes for one OD pair.

    The pair's demand is assigned all-or-nothing at the equilibrium link
    costs over its enumerated routes; equilibrium link flows do not
    decompose uniquely, so this is a reading aid, not a solver output.
    """
    if pair is None:
        return {}
    from .assignment import link_travel_time

    routes = enumerate_routes(net, pair, max_routes=8)
    costs = []
    for route in routes:
        total = 0.0
        for lid in route:
            link = net.links[lid]
            total += link_travel_time(link, flows.get(lid, 0.0), splits.get(lid, 1.0), params)
        costs.append(total)
    best = min(range(len(routes)), key=lambda i: (costs[i], tuple(str(l) for l in routes[i])))
    demand = net.od[pair]
    return {tuple(route): (demand if i == best else 0.0) for i, route in enumerate(routes)}


def _report_from_solution(kind, net, plans, splits, result, params, ga_result=None) -> ScenarioReport:
    pair = _heaviest_pair(net)
    return ScenarioReport(
        kind=kind,
        plans=tuple(plans),
        ttt=result.total_travel_time,
        link_flows=dict(result.link_flows),
        green_splits=dict(splits),
        relative_gap=result.relative_gap,
        converged=result.converged,
        route_flows=_route_flows(net, pair, splits, params, result.link_flows),
        od_pair=pair,
        capacity_violations=tuple(capacity_check(result, net, splits)),
        ga_result=ga_result,
    )


def run_scenario(
    kind: ScenarioKind,
    net: Network,
    cfg: ScenarioConfig,
    reference: ScenarioReport | None = None,
) -> ScenarioReport:
    """Run one scenario on the given base network.

    Scenario 2 needs the scenario-1 report (its plan is reused verbatim);
    scenario 3 uses it, when given, to seed the optimizer's population.
    Scenarios 2 and 3 require an incident in the config.
    """
    kind = ScenarioKind(kind)
    layout = SignalLayout.from_network(net)

    if kind is ScenarioKind.NO_INCIDENT_OPTIMIZED:
        ga = run_ga(net, layout, cfg.ga, cfg.cost, cfg.solver)
        plans = decode_chromosome(ga.best_chromosome, layout)
        splits = link_green_splits(net, plans)
        result = solve_ue(net, splits, cfg.solver, cfg.cost)
        return _report_from_solution(kind, net, plans, splits, result, cfg.cost, ga)

    if cfg.incident is None:
        raise ScenarioError(f"scenario {kind.value} needs an incident specification")
    degraded = apply_incident(net, cfg.incident)

    if kind is ScenarioKind.INCIDENT_UNOPTIMIZED:
        if reference is None:
            raise ScenarioError("scenario 2 needs the scenario-1 report for its signal plan")
        plans = reference.plans
        splits = link_green_splits(degraded, plans)
        result = solve_ue(degraded, splits, cfg.solver, cfg.cost)
        report = _report_from_solution(kind, degraded, plans, splits, result, cfg.cost)
        return dataclasses.replace(report, deltas=_deltas(report.ttt, reference, None))

    seeds = ()
    if reference is not None:
        seeds = (Chromosome(encode_plans(reference.plans, layout)),)
    ga = run_ga(degraded, layout, cfg.ga, cfg.cost, cfg.solver, seed_individuals=seeds)
    plans = decode_chromosome(ga.best_chromosome, layout)
    splits = link_green_splits(degraded, plans)
    result = solve_ue(degraded, splits, cfg.solver, cfg.cost)
    return _report_from_solution(kind, degraded, plans, splits, result, cfg.cost, ga)


def run_all_scenarios(net: Network, cfg: ScenarioConfig):
    """Scenario 1, then 2 and 3 against it, with cross deltas filled in."""
    s1 = run_scenario(ScenarioKind.NO_INCIDENT_OPTIMIZED, net, cfg)
    s2 = run_scenario(ScenarioKind.INCIDENT_UNOPTIMIZED, net, cfg, reference=s1)
    s3 = run_scenario(ScenarioKind.INCIDENT_OPTIMIZED, net, cfg, reference=s1)
    s3 = dataclasses.replace(s3, deltas=_deltas(s3.ttt, s1, s2))
    return s1, s2, s3


def compare(a: float | ScenarioReport, b: float | ScenarioReport) -> dict:
    """Percent increase and saving of ``a`` relative to ``b``.

    Undefined when the reference travel time is zero; reported as None.
    """
    ttt_a = a.ttt if isinstance(a, ScenarioReport) else float(a)
    ttt_b = b.ttt if isinstance(b, ScenarioReport) else float(b)
    if ttt_b == 0.0:
        return {"increase_pct": None, "saving_pct": None, "undefined": True}
    return {
        "increase_pct": (ttt_a - ttt_b) / ttt_b * 100.0,
        "saving_pct": (ttt_b - ttt_a) / ttt_b * 100.0,
        "undefined": False,
    }


def _deltas(ttt, s1, s2):
    deltas = {}
    if s1 is not None:
        deltas["vs_scenario1_pct"] = compare(ttt, s1.ttt)["increase_pct"]
    if s2 is not None:
        deltas["vs_scenario2_pct"] = compare(ttt, s2.ttt)["increase_pct"]
    return deltas


# ---------------------------------------------------------------------------
# serialization helpers (consumed by the CLI)


def plans_to_dicts(plans):
    return [
        {
            "junction": p.junction,
            "cycle_s": p.cycle,
            "durations_s": list(p.durations),
        }
        for p in plans
    ]


def plans_from_dicts(entries, layout: SignalLayout):
    """Rebuild plans from their JSON form against a known layout."""
    genes = []
    by_junction = {str(e["junction"]): e for e in entries}
    for junction in layout.junctions:
        entry = by_junction.get(str(junction.junction))
        if entry is None:
            raise ScenarioError(f"plan file misses junction {junction.junction!r}")
        durations = [float(d) for d in entry["durations_s"]]
        if len(durations) != junction.phase_count:
            raise ScenarioError(f"plan for {junction.junction!r} has wrong phase count")
        genes.extend(durations)
    return decode_chromosome(tuple(genes), layout)


def report_to_dict(report: ScenarioReport) -> dict:
    return {
        "kind": report.kind.value,
        "ttt_veh_h": report.ttt,
        "plan": plans_to_dicts(report.plans),
        "deltas": report.deltas,
        "relative_gap": report.relative_gap,
        "converged": report.converged,
        "od_pair": list(report.od_pair) if report.od_pair else None,
        "route_flows": [
            {"route": list(route), "vph": flow} for route, flow in sorted(
                report.route_flows.items(), key=lambda kv: [str(x) for x in kv[0]]
            )
        ],
        "link_flows": {str(k): v for k, v in sorted(report.link_flows.items(), key=lambda kv: str(kv[0]))},
        "capacity_violations": [
            {"link": str(v.link), "ratio": v.ratio} for v in report.capacity_violations
        ],
    }
