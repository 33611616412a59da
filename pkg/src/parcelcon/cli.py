"""Command-line entry point: ``parcelcon <command> [options]``.

Staged commands share one output directory:

    gen-network   -> network.json
    gen-demand    -> demand.json            (needs network.json)
    plan-capacity -> instance.json          (outline plan, promises, repair)
    gen-paths     -> instance.json          (adds container arcs and path sets)
    solve         -> solution.json          (baseline, then containerized)
    report        -> report.json, report.csv, savings.svg, capacity.svg
    run           -> all of the above in one go
    matrix        -> one sub-directory per cell plus matrix.csv
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .demand import DemandSet
from .model import build_ip
from .network import Network, all_structures
from .pipeline import (PRESETS, ExperimentConfig, PathSets, PipelineError, PlannedInstance, RunResult,
                       SolvedModel, plan_instance, preset_dict, read_json, reload_solution, run_matrix, run_pipeline,
                       stage_demand, stage_network, stage_paths, stage_report, stage_solve, write_json,
                       write_outputs)

log = logging.getLogger("parcelcon")

SEEDED = {"gen-network", "gen-demand", "run", "matrix"}


def _config(args) -> ExperimentConfig:
    over: dict = {}
    preset = getattr(args, "preset", None)
    if args.config:
        with open(args.config) as fh:
            over = json.load(fh)
        # a preset named in the file wins over --preset; file keys refine it
        preset = over.pop("preset", None) or preset
    if preset:
        over = preset_dict(preset, over)
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "gap", None) is not None:
        over["gap"] = args.gap
    if getattr(args, "structure", None):
        link, _, hub = args.structure.partition("/")
        over["link_structure"], over["hub_structure"] = link, hub or "Default"
    if getattr(args, "pattern", None):
        over["pattern"] = args.pattern
    if getattr(args, "workers", None):
        over["workers"] = args.workers
    return ExperimentConfig.from_dict(over)


def _load_instance(out: Path, args) -> PlannedInstance:
    path = out / "instance.json"
    if not path.exists():
        raise PipelineError("load", f"{path} not found; run plan-capacity first")
    inst = PlannedInstance.from_dict(read_json(path))
    if args.gap is not None:
        inst.config = ExperimentConfig.from_dict({**inst.config.to_dict(), "gap": args.gap})
    return inst


def _load_paths(out: Path, inst: PlannedInstance) -> PathSets:
    d = read_json(out / "instance.json")
    if "paths" not in d:
        raise PipelineError("load", "instance.json has no path sets; run gen-paths first")
    return PathSets.from_dict(d, inst)


def cmd_gen_network(args, cfg: ExperimentConfig, out: Path) -> int:
    net = stage_network(cfg)
    write_json(out / "network.json", {"config": cfg.to_dict(), "network": net.to_dict()})
    log.info("network %s: %d hubs, %d arcs", net.name, len(net.hubs), len(net.arcs))
    return 0


def cmd_gen_demand(args, cfg: ExperimentConfig, out: Path) -> int:
    p = out / "network.json"
    net = Network.from_dict(read_json(p)["network"]) if p.exists() else stage_network(cfg)
    demand = stage_demand(cfg, net)
    write_json(out / "demand.json", {"config": cfg.to_dict(), "demand": demand.to_dict()})
    log.info("%d commodities, %d parcels/hour", len(demand.commodities),
             sum(c.quantity for c in demand.commodities))
    return 0


def cmd_plan_capacity(args, cfg: ExperimentConfig, out: Path) -> int:
    net = demand = None
    if (out / "network.json").exists():
        d = read_json(out / "network.json")
        cfg = ExperimentConfig.from_dict({**d["config"], **_explicit(args)})
        net = Network.from_dict(d["network"])
    if (out / "demand.json").exists():
        d = read_json(out / "demand.json")
        cfg = ExperimentConfig.from_dict({**d["config"], **_explicit(args)})
        demand = DemandSet.from_dict(d["demand"])
    inst = plan_instance(cfg, net, demand)
    write_json(out / "instance.json", inst.to_dict())
    if inst.repair is not None and not inst.repair.unchanged:
        log.info("capacity repair: sort %s, xdock %s, departures %s", inst.repair.hub_sort_added,
                 inst.repair.hub_xdock_added, inst.repair.departures_added)
    return 0


def _explicit(args) -> dict:
    d = {}
    if getattr(args, "gap", None) is not None:
        d["gap"] = args.gap
    return d


def cmd_gen_paths(args, cfg: ExperimentConfig, out: Path) -> int:
    inst = _load_instance(out, args)
    paths = stage_paths(inst)
    d = inst.to_dict()
    d.update(paths.to_dict())
    write_json(out / "instance.json", d)
    log.info("%d container arcs; %d containerized paths", len(paths.registry),
             sum(len(v) for v in paths.containerized.values()))
    return 0


def _progress(line: str) -> None:
    print(line, file=sys.stderr, flush=True)


def cmd_solve(args, cfg: ExperimentConfig, out: Path) -> int:
    inst = _load_instance(out, args)
    paths = _load_paths(out, inst)
    base, cont = stage_solve(inst, paths, args.baseline_only, _progress if args.progress else None)
    write_json(out / "solution.json", {"baseline": base.to_dict(),
                                       "containerized": None if cont is None else cont.to_dict()})
    log.info("baseline %.1f, containerized %s parcel-min/h", base.solution.objective / 10,
             "-" if cont is None else f"{cont.solution.objective / 10:.1f}")
    return 0


def cmd_report(args, cfg: ExperimentConfig, out: Path) -> int:
    inst = _load_instance(out, args)
    paths = _load_paths(out, inst)
    sol = read_json(out / "solution.json")
    c = inst.config
    bm = build_ip(inst.network, inst.plan, inst.commodities, paths.baseline, paths.registry, c.container_size,
                  kind="baseline")
    base = SolvedModel(bm, reload_solution(bm, sol["baseline"]), None, None)
    cont = None
    if sol.get("containerized"):
        cm = build_ip(inst.network, inst.plan, inst.commodities, paths.containerized, paths.registry,
                      c.container_size)
        cont = SolvedModel(cm, reload_solution(cm, sol["containerized"]), None, None)
    rep = stage_report(inst, base, cont)
    res = RunResult(inst, paths, base, cont, rep, {})
    write_outputs(out, res, include_timings=False)
    _print_row(rep.row(c))
    return 0


def _print_row(row: dict) -> None:
    print(", ".join(f"{k}={v}" for k, v in row.items()))


def cmd_run(args, cfg: ExperimentConfig, out: Path) -> int:
    res = run_pipeline(cfg, out, args.baseline_only, _progress if args.progress else None)
    _print_row(res.report.row(cfg))
    return 0


def cmd_matrix(args, cfg: ExperimentConfig, out: Path) -> int:
    structures = None
    if args.structures:
        structures = [tuple((s.split("/") + ["Default"])[:2]) for s in args.structures]
    elif args.link_only:
        structures = [(l.value, "Default") for l, h in all_structures() if h.value == "Default"]
    rows, errors = run_matrix(cfg, structures, args.patterns, args.seeds or [cfg.seed], out, args.baseline_only,
                              args.jobs)
    for r in rows:
        _print_row(r)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return 1 if errors else 0


COMMANDS = {
    "gen-network": (cmd_gen_network, "build the grid network"),
    "gen-demand": (cmd_gen_demand, "sample commodities"),
    "plan-capacity": (cmd_plan_capacity, "outline capacity plan, service promises and repair"),
    "gen-paths": (cmd_gen_paths, "physical paths expanded into container paths"),
    "solve": (cmd_solve, "solve the baseline and containerized models"),
    "report": (cmd_report, "savings, utilization and capacity statistics"),
    "run": (cmd_run, "every stage end to end"),
    "matrix": (cmd_matrix, "structure x pattern x seed experiment matrix"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parcelcon", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file (missing keys take defaults)")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named base configuration")
        p.add_argument("--seed", type=int, required=name in SEEDED, help="random seed")
        p.add_argument("--out-dir", default="out", help="output directory (default: out)")
        p.add_argument("--gap", type=float, help="relative optimality gap for the IP solves")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("gen-network", "gen-demand", "plan-capacity", "run"):
            p.add_argument("--structure", help="LINK/HUB, e.g. HC1/Default")
            p.add_argument("--pattern", choices=["uniform", "centric", "bipolar"])
        if name in ("solve", "run", "matrix"):
            p.add_argument("--baseline-only", action="store_true", help="skip the containerized model")
            p.add_argument("--workers", type=int, help="branch-and-bound worker threads")
        if name in ("solve", "run"):
            p.add_argument("--progress", action="store_true", help="stream node,bound,incumbent,gap,time lines")
        if name == "matrix":
            p.add_argument("--seeds", type=int, nargs="+", help="seeds (default: --seed)")
            p.add_argument("--patterns", nargs="+", choices=["uniform", "centric", "bipolar"])
            p.add_argument("--structures", nargs="+", help="LINK/HUB cells (default: all nine)")
            p.add_argument("--link-only", action="store_true", help="the three Default-hub structures")
            p.add_argument("--jobs", type=int, default=1, help="parallel cells")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = Path(args.out_dir)
    try:
        cfg = _config(args)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command][0](args, cfg, out)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
