"""Command-line front end.

Settings are resolved from, in increasing priority: built-in defaults, a
JSON config file (``--config`` or ``DEPTREE_CONFIG``), ``DEPTREE_*``
environment variables, and command-line flags.

Exit codes: 0 success, 1 analysis or runtime error, 2 invalid input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from collections.abc import Mapping, Sequence
from pathlib import Path

from . import __version__
from .analysis import SimulationOptions, default_time, group_tables, groups_touching, intensities_at, marginals_at
from .bdd import PATH_LIMIT, TRUE, build_bdd, enumerate_paths
from .errors import AnalysisError, DeptreeError, ModelError, ValidationErrors
from .eventtree import quantify_event_tree
from .export import dumps_report, fault_tree_dot, loss_csv, path_csv, petri_net_dot
from .markov import mm_steady_state, mm_to_joint
from .model import dumps, load_model
from .petri import Coupling, spn_simulate
from .quantify import EventMeasure, conditional_given, joint_with, path_table, top_frequency, top_probability
from .reduction import reduce_model

log = logging.getLogger("deptree")

ENV_PREFIX = "DEPTREE_"
EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2

# setting name -> type; these may come from the config file or the environment
SETTINGS = {
    "seed": int,
    "replications": int,
    "workers": int,
    "path_limit": int,
    "time": float,
    "mission": float,
}


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _convert(name: str, raw, origin: str):
    try:
        return SETTINGS[name](raw)
    except (TypeError, ValueError):
        raise ModelError(f"{origin}: {name} must be {SETTINGS[name].__name__}, got {raw!r}") from None


def resolve_settings(args: argparse.Namespace, environ: Mapping[str, str] | None = None) -> dict:
    environ = os.environ if environ is None else environ
    settings: dict = {"workers": default_workers(), "path_limit": PATH_LIMIT}
    config_path = getattr(args, "config", None) or environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise ModelError(f"config file {config_path}: {exc}") from None
        if not isinstance(data, dict):
            raise ModelError(f"config file {config_path} must hold a JSON object")
        for k, v in data.items():
            if k not in SETTINGS:
                raise ModelError(f"config file {config_path}: unknown setting {k!r}")
            settings[k] = _convert(k, v, config_path)
    for k in SETTINGS:
        raw = environ.get(ENV_PREFIX + k.upper())
        if raw not in (None, ""):
            settings[k] = _convert(k, raw, ENV_PREFIX + k.upper())
    for k in SETTINGS:
        v = getattr(args, k, None)
        if v is not None:
            settings[k] = v
    if settings["workers"] < 1:
        raise ModelError("workers must be >= 1")
    return settings


def parse_literals(text: str) -> dict[str, bool]:
    """``"X2,~X3"`` -> {X2: True, X3: False}; ``~``, ``!`` or ``-`` negate."""
    out: dict[str, bool] = {}
    for tok in text.replace(",", " ").split():
        value = True
        while tok and tok[0] in "~!-":
            value = not value
            tok = tok[1:]
        if not tok:
            raise ModelError(f"empty literal in {text!r}")
        if tok in out and out[tok] != value:
            raise ModelError(f"contradictory literals for {tok}")
        out[tok] = value
    return out


def _list(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [t for t in text.replace(",", " ").split() if t]


def _floats(text: str | None) -> list[float] | None:
    items = _list(text)
    if items is None:
        return None
    try:
        return [float(t) for t in items]
    except ValueError:
        raise ModelError(f"not a list of numbers: {text!r}") from None


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _envelope(command: str, config: Mapping, result) -> dict:
    return {"tool": "deptree", "version": __version__, "command": command, "config": dict(config), "result": result}


def _report_config(args: argparse.Namespace, settings: Mapping, extra: Mapping | None = None) -> dict:
    # the worker count never changes results and is left out so reports
    # compare equal across machines
    cfg = {"model": args.model, "model_sha256": _sha256(args.model)}
    cfg.update({k: v for k, v in sorted(settings.items()) if k != "workers"})
    if extra:
        cfg.update(extra)
    return cfg


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def _sim(settings: Mapping) -> SimulationOptions:
    return SimulationOptions(settings.get("seed"), settings.get("replications"), settings["workers"])


def _pick(kind: str, available: Sequence[str], chosen: str | None) -> str:
    if chosen is not None:
        if chosen not in available:
            raise ModelError(f"unknown {kind} {chosen!r}; available: {sorted(available)}")
        return chosen
    if len(available) == 1:
        return next(iter(available))
    raise ModelError(f"model has {len(available)} {kind}s; choose one of {sorted(available)}")


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args, settings) -> int:
    model = load_model(args.model)
    result = {
        "valid": True,
        "basic_events": len(model.basic_events),
        "fault_trees": sorted(model.fault_trees),
        "event_trees": sorted(model.event_trees),
        "dependency_groups": sorted(model.dependency_groups),
        "markov_models": sorted(model.markov_models),
        "petri_nets": sorted(model.petri_nets),
    }
    _emit(dumps_report(_envelope("validate", _report_config(args, settings), result)), args.output)
    return EXIT_OK


def cmd_ft(args, settings) -> int:
    model = load_model(args.model)
    ft_id = _pick("fault tree", list(model.fault_trees), args.top)
    ft = model.fault_tree(ft_id)
    bdd = build_bdd(ft, _list(args.order))
    events = list(bdd.order)
    t = settings.get("time")
    if t is None:
        t = default_time(model, events)
    sim = _sim(settings)
    tables = group_tables(model, groups_touching(model, events), sim, t)
    measure = EventMeasure(tables, marginals_at(model, events, t))
    limit = settings["path_limit"]
    paths = enumerate_paths(bdd, TRUE, limit)
    result: dict = {
        "top": ft_id,
        "order": events,
        "time": t,
        "bdd_nodes": len(bdd),
        "path_count": len(paths),
        "probability": top_probability(bdd, measure, limit=limit),
    }
    try:
        result["frequency"] = top_frequency(bdd, measure, intensities=intensities_at(model, events, t), limit=limit)
    except AnalysisError as exc:
        result["frequency"] = None
        result["frequency_unavailable"] = str(exc)
    rows = path_table(bdd, measure, paths=paths) if args.paths else None
    if rows is not None:
        result["paths"] = rows
    if args.joint:
        lits = parse_literals(args.joint)
        result["joint"] = {
            "literals": lits,
            "probability": joint_with(bdd, lits, measure, limit=limit),
            "paths": [p.text() for p in paths if p.compatible(lits)],
        }
    if args.given:
        lits = parse_literals(args.given)
        result["conditional"] = {"literals": lits, "probability": conditional_given(bdd, lits, measure, limit=limit)}
    extra = {"top": ft_id, "order": args.order, "joint": args.joint, "given": args.given, "paths": bool(args.paths)}
    _emit(dumps_report(_envelope("ft", _report_config(args, settings, extra), result)), args.output)
    if args.csv:
        Path(args.csv).write_text(path_csv(rows if rows is not None else path_table(bdd, measure, paths=paths)), newline="")
    return EXIT_OK


def cmd_et(args, settings) -> int:
    model = load_model(args.model)
    et_id = _pick("event tree", list(model.event_trees), args.event_tree)
    et = model.event_trees[et_id]
    bdds = {}
    events: set[str] = set(et.shared_sources)
    for bp in et.branch_points:
        if bp.fault_tree is not None and bp.fault_tree not in bdds:
            bdds[bp.fault_tree] = build_bdd(model.fault_tree(bp.fault_tree))
            events.update(bdds[bp.fault_tree].order)
        if bp.event is not None:
            events.add(bp.event)
    ordered = sorted(events)
    t = settings.get("time")
    if t is None:
        t = default_time(model, ordered)
    tables = group_tables(model, groups_touching(model, ordered), _sim(settings), t)
    measure = EventMeasure(tables, marginals_at(model, ordered, t))
    res = quantify_event_tree(et, bdds, measure)
    result = res.to_dict()
    result["time"] = t
    report = _envelope("et", _report_config(args, settings, {"event_tree": et_id}), result)
    _emit(dumps_report(report), args.output)
    if args.csv:
        Path(args.csv).write_text(loss_csv(result), newline="")
    log.info("conservation error %.3g", res.conservation_error)
    return EXIT_OK


def load_couplings(path: str | None) -> list[Coupling]:
    if not path:
        return []
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: {exc}") from None
    if isinstance(data, Mapping):
        data = data.get("couplings", [])
    if not isinstance(data, list):
        raise ModelError(f"{path}: expected a list of couplings")
    try:
        return [Coupling.from_dict(c) for c in data]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"{path}: malformed coupling ({exc})") from None


def cmd_reduce(args, settings) -> int:
    model = load_model(args.model)
    ft_id = _pick("fault tree", list(model.fault_trees), args.top)
    gates = _list(args.gates) or []
    new, red = reduce_model(
        model,
        ft_id,
        gates,
        load_couplings(args.coupling),
        grid=_floats(args.grid),
        replications=settings.get("replications"),
        seed=settings.get("seed"),
        sim=_sim(settings),
    )
    _emit(dumps(new), args.output)
    if args.report:
        result = {
            "fault_tree": ft_id,
            "gates": gates,
            "group": red.group.id if red.group else None,
            "complex_events": {
                g: {
                    "reversible": red.complex_events[g].reversible,
                    "times": red.metrics[g].times,
                    "q": red.metrics[g].q,
                    "w": red.metrics[g].w,
                    "failure_rate": red.rates[g].failure,
                    "repair_rate": red.rates[g].repair,
                    "failure_distribution": red.distributions[g][0].to_dict(),
                    "repair_distribution": red.distributions[g][1].to_dict() if red.distributions[g][1] else None,
                }
                for g in gates
            },
        }
        extra = {"top": ft_id, "gates": gates, "coupling": args.coupling, "grid": args.grid}
        Path(args.report).write_text(dumps_report(_envelope("reduce", _report_config(args, settings, extra), result)))
    return EXIT_OK


def cmd_solve_mm(args, settings) -> int:
    model = load_model(args.model)
    mm_id = _pick("Markov model", list(model.markov_models), args.markov_model)
    mm = model.markov_models[mm_id]
    pi = mm_steady_state(mm)
    table = mm_to_joint(mm, pi)
    result = {
        "markov_model": mm_id,
        "states": list(mm.states),
        "steady_state": pi,
        "members": list(table.members),
        "joint": table.to_dict(),
    }
    _emit(dumps_report(_envelope("solve-mm", _report_config(args, settings, {"markov_model": mm_id}), result)), args.output)
    return EXIT_OK


def cmd_simulate_pn(args, settings) -> int:
    model = load_model(args.model)
    net_id = _pick("Petri net", list(model.petri_nets), args.net)
    seed = settings.get("seed")
    if seed is None:
        raise ModelError("simulate-pn needs a seed (--seed, DEPTREE_SEED or the config file)")
    reps = settings.get("replications")
    if reps is None:
        raise ModelError("simulate-pn needs a replication count (--reps)")
    mission = settings.get("mission") or model.mission_time
    if mission is None:
        raise ModelError("simulate-pn needs a mission time (--mission)")
    observe = _floats(args.observe) or []
    stats = spn_simulate(model.petri_nets[net_id], mission, reps, seed, observe_times=observe, workers=settings["workers"])
    result = stats.to_dict()
    result["net"] = net_id
    if stats.flows is not None:
        result["flows"] = stats.flows
    extra = {"net": net_id, "observe": observe, "mission": mission}
    _emit(dumps_report(_envelope("simulate-pn", _report_config(args, settings, extra), result)), args.output)
    return EXIT_OK


def cmd_export_dot(args, settings) -> int:
    model = load_model(args.model)
    if args.net:
        if args.net not in model.petri_nets:
            raise ModelError(f"unknown Petri net {args.net!r}")
        text = petri_net_dot(model.petri_nets[args.net], args.net)
    else:
        ft_id = _pick("fault tree", list(model.fault_trees), args.top)
        ft = model.fault_tree(ft_id)
        if args.bdd:
            text = build_bdd(ft, _list(args.order)).to_dot(ft_id)
        else:
            text = fault_tree_dot(ft)
    _emit(text, args.output)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model JSON file")
    common.add_argument("-o", "--output", help="write the result here instead of stdout")
    common.add_argument("--config", help="JSON file with default settings")
    common.add_argument("--workers", type=int, help="worker processes for simulation (default: available cores)")
    common.add_argument("--path-limit", dest="path_limit", type=int, help="maximum number of BDD paths")
    common.add_argument("-v", "--verbose", action="store_true")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--seed", type=int, help="simulation seed")
    sim.add_argument("--reps", dest="replications", type=int, help="simulation replications")

    p = argparse.ArgumentParser(prog="deptree", description="Dependency-aware fault tree and event tree analysis.")
    p.add_argument("--version", action="version", version=f"deptree {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a model file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("ft", parents=[common, sim], help="quantify a fault tree")
    s.add_argument("--top", help="fault tree id")
    s.add_argument("--joint", metavar="LITERALS", help="probability of the top event together with literals, e.g. 'X2,~X3'")
    s.add_argument("--given", metavar="LITERALS", help="probability of the top event given literals")
    s.add_argument("--paths", action="store_true", help="include the factorized path table")
    s.add_argument("--order", help="comma-separated variable ordering")
    s.add_argument("--time", type=float, help="evaluation time in hours (default: steady state or mission time)")
    s.add_argument("--csv", help="also write the path table as CSV")
    s.set_defaults(func=cmd_ft)

    s = sub.add_parser("et", parents=[common, sim], help="quantify an event tree")
    s.add_argument("--event-tree", dest="event_tree", help="event tree id")
    s.add_argument("--time", type=float, help="evaluation time in hours")
    s.add_argument("--csv", help="also write loss frequencies as CSV")
    s.set_defaults(func=cmd_et)

    s = sub.add_parser("reduce", parents=[common, sim], help="replace gates by complex events")
    s.add_argument("--top", help="fault tree id")
    s.add_argument("--gates", required=True, help="comma-separated gate ids")
    s.add_argument("--coupling", help="JSON file with coupling arcs between template nets")
    s.add_argument("--grid", help="comma-separated time grid (default: the model's)")
    s.add_argument("--report", help="write rate vectors and distributions here")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("solve-mm", parents=[common], help="steady state of a Markov model")
    s.add_argument("--markov-model", dest="markov_model", help="Markov model id")
    s.set_defaults(func=cmd_solve_mm)

    s = sub.add_parser("simulate-pn", parents=[common, sim], help="simulate a stochastic Petri net")
    s.add_argument("--net", help="Petri net id")
    s.add_argument("--mission", type=float, help="mission time in hours")
    s.add_argument("--observe", help="comma-separated observation times")
    s.set_defaults(func=cmd_simulate_pn)

    s = sub.add_parser("export-dot", parents=[common], help="Graphviz source for a tree, its BDD or a net")
    s.add_argument("--top", help="fault tree id")
    s.add_argument("--bdd", action="store_true", help="export the BDD instead of the tree")
    s.add_argument("--order", help="comma-separated variable ordering for --bdd")
    s.add_argument("--net", help="export this Petri net")
    s.set_defaults(func=cmd_export_dot)
    return p


def _diagnostic(exc: DeptreeError) -> str:
    data = exc.to_dict() if hasattr(exc, "to_dict") else {"error": type(exc).__name__, "message": str(exc)}
    return json.dumps(data)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = resolve_settings(args)
        return args.func(args, settings)
    except ValidationErrors as exc:
        for e in exc.errors:
            sys.stderr.write(_diagnostic(e) + "\n")
        return EXIT_INVALID
    except ModelError as exc:
        sys.stderr.write(_diagnostic(exc) + "\n")
        return EXIT_INVALID
    except (AnalysisError, DeptreeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_RUNTIME
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
