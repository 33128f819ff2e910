"""Command-line front end.

Commands: ``assign`` (equilibrium for a fixed plan), ``optimize`` (genetic
search), ``scenario {1|2|3|all}`` (incident study), ``plot`` (SVG exports).
Every output is reproducible from the configuration and seed alone; files
carry a provenance header with the config hash, seed and tool version.

Exit codes: 0 success, 2 input error, 3 missing prerequisite, 4 solver
non-convergence under --strict.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

from . import __version__
from .assignment import CostParams, SolverOptions, solve_ue
from .ga import GAConfig, run_ga
from .netmodel import (
    IncidentSpec,
    NetworkError,
    TESTBED_INCIDENT_LINK,
    build_testbed,
    load_network,
)
from .plots import convergence_scatter, flow_map
from .scenarios import (
    ScenarioConfig,
    ScenarioError,
    ScenarioKind,
    compare,
    plans_from_dicts,
    plans_to_dicts,
    report_to_dict,
    run_scenario,
)
from .signals import PlanError, SignalLayout, decode_chromosome, link_green_splits

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_NO_CONVERGENCE = 4


class InputError(Exception):
    pass


class PrerequisiteError(Exception):
    pass


def _config_hash(args) -> str:
    """Stable digest of the semantic configuration (not paths or threads)."""
    fields = {
        "command": args.command,
        "network": "testbed" if getattr(args, "testbed", False) else getattr(args, "network", None),
        "seed": getattr(args, "seed", None),
        "pop": getattr(args, "pop", None),
        "generations": getattr(args, "generations", None),
        "pc": getattr(args, "pc", None),
        "pm": getattr(args, "pm", None),
        "gap": getattr(args, "gap", None),
        "incident": getattr(args, "incident", None),
        "plan": getattr(args, "plan", None),
    }
    blob = json.dumps(fields, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _provenance(args) -> str:
    return f"signalopt {__version__} config={_config_hash(args)} seed={getattr(args, 'seed', 0)}"


def _load_net(args):
    if getattr(args, "testbed", False):
        return build_testbed()
    path = Path(args.network)
    if not path.exists():
        raise InputError(f"network file not found: {path}")
    return load_network(path)


def _load_incident(args) -> IncidentSpec | None:
    path = getattr(args, "incident", None)
    if path is None:
        if getattr(args, "testbed", False):
            # built-in incident: one blocked lane on the second heavy route
            return IncidentSpec(TESTBED_INCIDENT_LINK, lanes_blocked=1)
        return None
    p = Path(path)
    if not p.exists():
        raise InputError(f"incident file not found: {p}")
    doc = json.loads(p.read_text())
    return IncidentSpec(doc["link"], int(doc["lanes_blocked"]))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header_comment: str, columns, rows):
    buf = io.StringIO()
    buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    path.write_text(buf.getvalue())


def _write_json(path: Path, payload: dict, args):
    payload = dict(payload)
    payload["provenance"] = {
        "tool": "signalopt",
        "version": __version__,
        "config_sha256": _config_hash(args),
        "seed": getattr(args, "seed", 0),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _flows_rows(net, flows, splits, params):
    from .assignment import link_travel_time

    rows = []
    for lid in sorted(net.links, key=str):
        link = net.links[lid]
        flow = flows.get(lid, 0.0)
        lam = splits.get(lid, 1.0)
        rows.append([lid, repr(flow), repr(lam), repr(link_travel_time(link, flow, lam, params))])
    return rows


def _solver_options(args) -> SolverOptions:
    return SolverOptions(gap_tolerance=args.gap)


def _ga_config(args) -> GAConfig:
    return GAConfig(
        population_size=args.pop,
        max_generations=args.generations,
        p_crossover=args.pc,
        p_mutation=args.pm,
        seed=args.seed,
    )


def _plan_for_assign(args, net, layout):
    if args.plan is None:
        return decode_chromosome(layout.initial_genes(), layout)
    path = Path(args.plan)
    if not path.exists():
        raise InputError(f"plan file not found: {path}")
    doc = json.loads(path.read_text())
    entries = doc.get("plan", doc.get("plans", doc))
    return plans_from_dicts(entries, layout)


def cmd_assign(args) -> int:
    net = _load_net(args)
    incident = _load_incident(args) if args.incident else None
    if incident is not None:
        from .scenarios import apply_incident

        net = apply_incident(net, incident)
    layout = SignalLayout.from_network(net)
    plans = _plan_for_assign(args, net, layout)
    splits = link_green_splits(net, plans)
    params = CostParams()
    result = solve_ue(net, splits, _solver_options(args), params)

    out = _out_dir(args)
    _write_csv(
        out / "flows.csv",
        _provenance(args),
        ["link_id", "flow_vph", "lambda", "travel_time_s"],
        _flows_rows(net, result.link_flows, splits, params),
    )
    _write_json(
        out / "assignment.json",
        {
            "link_flows": {str(k): v for k, v in sorted(result.link_flows.items(), key=lambda kv: str(kv[0]))},
            "green_splits": {str(k): v for k, v in sorted(splits.items(), key=lambda kv: str(kv[0]))},
            "relative_gap": result.relative_gap,
            "iterations": result.iterations,
            "converged": result.converged,
            "total_travel_time_veh_h": result.total_travel_time,
            "plan": plans_to_dicts(plans),
        },
        args,
    )
    print(f"total travel time: {result.total_travel_time:.2f} veh-h")
    print(f"relative gap: {result.relative_gap:.3e} ({result.iterations} iterations)")
    if args.strict and not result.converged:
        print("solver did not reach the requested gap", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _trace_rows(ga_result):
    rows = []
    for record in ga_result.trace:
        for idx, ind in enumerate(record.individuals):
            rows.append([record.generation, idx, repr(ind.fitness)] + [repr(g) for g in ind.genes])
    return rows


def _write_ga_outputs(args, out, ga_result, layout, prefix=""):
    gene_count = layout.gene_count
    _write_csv(
        out / f"{prefix}trace.csv",
        _provenance(args),
        ["generation", "individual_index", "fitness"] + [f"gene_{i + 1}" for i in range(gene_count)],
        _trace_rows(ga_result),
    )
    _write_csv(
        out / f"{prefix}best_summary.csv",
        _provenance(args),
        ["generation", "best_fitness"] + [f"gene_{i + 1}" for i in range(gene_count)],
        [
            [r.generation, repr(r.best_fitness_so_far)] + [repr(g) for g in r.best_genes_so_far]
            for r in ga_result.trace
        ],
    )


def cmd_optimize(args) -> int:
    net = _load_net(args)
    layout = SignalLayout.from_network(net)
    ga_result = run_ga(net, layout, _ga_config(args), CostParams(), _solver_options(args))

    out = _out_dir(args)
    _write_ga_outputs(args, out, ga_result, layout)
    plans = decode_chromosome(ga_result.best_chromosome, layout)
    _write_json(
        out / "best_plan.json",
        {
            "best_fitness": ga_result.best_fitness,
            "ttt_veh_h": -ga_result.best_fitness,
            "plan": plans_to_dicts(plans),
            "evaluations": ga_result.evaluations,
            "memo_hits": ga_result.memo_hits,
        },
        args,
    )
    for record in ga_result.trace:
        print(f"generation {record.generation:3d}: best fitness {record.best_fitness_so_far:.4f}")
    print(f"best plan written to {out / 'best_plan.json'}")
    return EXIT_OK


def _scenario_cfg(args, incident) -> ScenarioConfig:
    return ScenarioConfig(
        ga=_ga_config(args),
        cost=CostParams(),
        solver=_solver_options(args),
        incident=incident,
    )


def _load_reference(out: Path, net, args):
    path = out / "scenario_1.json"
    if not path.exists():
        raise PrerequisiteError(
            "scenario 2 needs the scenario-1 plan; run 'signalopt scenario 1' "
            f"into {out} first"
        )
    doc = json.loads(path.read_text())
    layout = SignalLayout.from_network(net)
    plans = plans_from_dicts(doc["plan"], layout)
    splits = link_green_splits(net, plans)
    result = solve_ue(net, splits, _solver_options(args), CostParams())
    from .scenarios import _report_from_solution

    return _report_from_solution(ScenarioKind.NO_INCIDENT_OPTIMIZED, net, plans, splits, result, CostParams())


def _emit_scenario(args, out, report, net_for_flows):
    n = report.kind.value
    _write_json(out / f"scenario_{n}.json", report_to_dict(report), args)
    _write_csv(
        out / f"flows_scenario_{n}.csv",
        _provenance(args),
        ["link_id", "flow_vph", "lambda", "travel_time_s"],
        _flows_rows(net_for_flows, report.link_flows, report.green_splits, CostParams()),
    )
    if report.ga_result is not None:
        layout = SignalLayout.from_network(net_for_flows)
        _write_ga_outputs(args, out, report.ga_result, layout, prefix=f"scenario_{n}_")


def cmd_scenario(args) -> int:
    net = _load_net(args)
    incident = _load_incident(args)
    if args.which in ("2", "3", "all") and incident is None:
        raise InputError("scenarios with an incident need --incident (or --testbed)")
    cfg = _scenario_cfg(args, incident)
    out = _out_dir(args)

    from .scenarios import apply_incident, run_all_scenarios

    reports = []
    if args.which == "all":
        s1, s2, s3 = run_all_scenarios(net, cfg)
        reports = [s1, s2, s3]
    elif args.which == "1":
        reports = [run_scenario(ScenarioKind.NO_INCIDENT_OPTIMIZED, net, cfg)]
    elif args.which == "2":
        reference = _load_reference(out, net, args)
        reports = [run_scenario(ScenarioKind.INCIDENT_UNOPTIMIZED, net, cfg, reference)]
    else:
        reference = None
        if (out / "scenario_1.json").exists():
            reference = _load_reference(out, net, args)
        reports = [run_scenario(ScenarioKind.INCIDENT_OPTIMIZED, net, cfg, reference)]

    for report in reports:
        net_for_flows = net
        if report.kind is not ScenarioKind.NO_INCIDENT_OPTIMIZED:
            net_for_flows = apply_incident(net, incident)
        _emit_scenario(args, out, report, net_for_flows)

    if args.which == "all":
        s1, s2, s3 = reports
        summary = {
            "ttt_veh_h": {"scenario_1": s1.ttt, "scenario_2": s2.ttt, "scenario_3": s3.ttt},
            "scenario2_vs_scenario1": compare(s2, s1),
            "scenario3_vs_scenario1": compare(s3, s1),
            "scenario3_vs_scenario2": compare(s3, s2),
        }
        _write_json(out / "summary.json", summary, args)
        print(f"{'scenario':<12}{'TTT (veh-h)':>14}{'vs s1':>10}{'vs s2':>10}")
        for label, report in (("1", s1), ("2", s2), ("3", s3)):
            vs1 = compare(report, s1)["increase_pct"]
            vs2 = compare(report, s2)["increase_pct"]
            print(f"{label:<12}{report.ttt:>14.2f}{vs1:>+9.2f}%{vs2:>+9.2f}%")
        saving = compare(s3, s2)["saving_pct"]
        print(f"re-timing under the incident saves {saving:.2f}% of scenario-2 travel time")
    else:
        for report in reports:
            print(f"scenario {report.kind.value}: TTT {report.ttt:.2f} veh-h")

    if args.strict and any(not r.converged for r in reports):
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _read_trace(path: Path):
    if not path.exists():
        raise InputError(f"trace file not found: {path}")
    rows = []
    with path.open() as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if not header or header[0] != "generation":
            raise InputError(f"malformed trace file: {path}")
        gene_cols = [c for c in header if c.startswith("gene_")]
        for row in reader:
            rows.append(
                (
                    int(row[0]),
                    float(row[2]),
                    [float(x) for x in row[3 : 3 + len(gene_cols)]],
                )
            )
    if not rows:
        raise InputError(f"no generations in trace: {path}")
    return rows


def cmd_plot(args) -> int:
    net = _load_net(args)
    layout = SignalLayout.from_network(net)
    rows = _read_trace(Path(args.trace))
    out = _out_dir(args)
    provenance = _provenance(args)

    count = 0
    for start, end, junction in layout.segments():
        for k in range(junction.phase_count):
            points = [(genes[start + k], fit, gen) for gen, fit, genes in rows]
            title = f"junction {junction.junction} phase {k + 1}"
            svg = convergence_scatter(points, title, provenance=provenance)
            name = f"convergence_{junction.junction}_phase{k + 1}.svg"
            (out / name).write_text(svg)
            count += 1

    if args.flows:
        flows_path = Path(args.flows)
        if not flows_path.exists():
            raise InputError(f"flows file not found: {flows_path}")
        flows = {}
        with flows_path.open() as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            for row in reader:
                flows[row["link_id"]] = float(row["flow_vph"])
        (out / "flow_map.svg").write_text(flow_map(net, flows, provenance=provenance))
        count += 1
    print(f"wrote {count} SVG file(s) to {out}")
    return EXIT_OK


def _add_network_args(parser):
    parser.add_argument("--testbed", action="store_true", help="use the built-in four-intersection network")
    parser.add_argument("--network", help="path to a network document (JSON)")
    parser.add_argument("--incident", help="path to an incident document (JSON)")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--pop", type=int, default=75)
    parser.add_argument("--generations", type=int, default=20)
    parser.add_argument("--pc", type=float, default=0.8)
    parser.add_argument("--pm", type=float, default=0.1)
    parser.add_argument("--gap", type=float, default=1e-4)
    parser.add_argument("--out", default="out")
    parser.add_argument("--strict", action="store_true", help="exit 4 on solver non-convergence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signalopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_assign = sub.add_parser("assign", help="equilibrium assignment for a fixed signal plan")
    _add_network_args(p_assign)
    p_assign.add_argument("--plan", help="signal plan JSON (defaults to the layout's initial timings)")

    p_opt = sub.add_parser("optimize", help="genetic search for signal timings")
    _add_network_args(p_opt)

    p_scen = sub.add_parser("scenario", help="incident scenario study")
    p_scen.add_argument("which", choices=["1", "2", "3", "all"])
    _add_network_args(p_scen)

    p_plot = sub.add_parser("plot", help="render SVG convergence and flow plots")
    _add_network_args(p_plot)
    p_plot.add_argument("--trace", required=True, help="trace CSV from optimize/scenario")
    p_plot.add_argument("--flows", help="flows CSV for the flow map")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if bool(getattr(args, "testbed", False)) == bool(getattr(args, "network", None)):
        print("specify exactly one network source: --testbed or --network", file=sys.stderr)
        return EXIT_INPUT
    handlers = {
        "assign": cmd_assign,
        "optimize": cmd_optimize,
        "scenario": cmd_scenario,
        "plot": cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except (InputError, NetworkError, PlanError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PrerequisiteError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
