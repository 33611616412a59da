"""Experiment configuration and the staged pipeline behind the command line.

Stages: network -> demand -> outline capacity -> physical paths -> service
promises -> capacity repair -> container paths -> solve (baseline, then
containerized) -> report. Every stage writes JSON with a fixed key order, so a
fixed seed reproduces byte-identical files.
"""

from __future__ import annotations

import copy
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import analytics
from .capacity import CapacityPlan, PlannerParams, RepairReport, arc_flows, build_mcmcnf, derive_capacities, \
    repair_capacities
from .demand import Category, Commodity, DemandSet, assign_service_promises, builtin_pattern, generate_demand
from .model import IPModel, Solution, build_baseline_ip, build_ip, solution_from_choice, validate
from .network import GridSpec, HubStructure, HubTimes, LinkStructure, Network, all_structures, build_network
from .pathgen import ContainerArcRegistry, ContainerizedPath, PhysicalPath, build_path_set, containerize, \
    enumerate_physical_paths, min_doable
from .solver.bnb import SolveConfig, SolveStats, solve_ip
from .solver.lp import solve_lp

SCHEMA_VERSION = 1


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


def _deep_merge(base: dict, over: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise KeyError(f"unknown config key {k!r}")
        if isinstance(out[k], dict) and isinstance(v, Mapping) and k not in ("category_fractions", "initial_sort_limits"):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    """Every knob of one pipeline run; JSON keys mirror the attribute names."""

    grid: GridSpec = field(default_factory=GridSpec)
    link_structure: str = "HC1"
    hub_structure: str = "Default"
    hub_times: HubTimes = field(default_factory=HubTimes)
    pattern: str = "uniform"
    category_fractions: dict[str, float] | None = None
    n_commodities: int = 1000
    total_volume: int = 10000
    size_shape: str = "wide"
    promises: list[tuple[float, float]] = field(default_factory=lambda: [(300.0, 0.5), (600.0, 0.5)])
    planner: PlannerParams = field(default_factory=PlannerParams)
    max_intermediate: int = 7
    max_deviation: float = 0.05
    max_paths: int = 20
    max_xdock_per_arc: int = 4
    container_size: int = 40
    gap: float = 1e-4
    node_limit: int = 1_000_000
    time_limit: float = 3600.0
    engine: str = "auto"
    handoff_nodes: int = 25
    workers: int = 1
    repair_node_limit: int = 200
    seed: int | None = None

    def __post_init__(self):
        LinkStructure(self.link_structure)
        HubStructure(self.hub_structure)
        self.promises = [(float(m), float(s)) for m, s in self.promises]
        if self.planner.container_size != self.container_size:
            self.planner = PlannerParams(**{**self.planner.__dict__, "container_size": self.container_size})

    @property
    def structure(self) -> str:
        return f"{self.link_structure}/{self.hub_structure}"

    def solve_config(self, progress=None) -> SolveConfig:
        return SolveConfig(gap=self.gap, node_limit=self.node_limit, time_limit=self.time_limit,
                           engine=self.engine, handoff_nodes=self.handoff_nodes, workers=self.workers,
                           progress=progress)

    def repair_config(self) -> SolveConfig:
        return SolveConfig(gap=self.gap, node_limit=self.repair_node_limit, time_limit=self.time_limit,
                           engine=self.engine, handoff_nodes=self.handoff_nodes)

    def demand_pattern(self):
        fr = None
        if self.category_fractions is not None:
            fr = {Category(k): float(v) for k, v in self.category_fractions.items()}
        return builtin_pattern(self.pattern, fr)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(), "link_structure": self.link_structure,
            "hub_structure": self.hub_structure, "hub_times": self.hub_times.to_dict(),
            "pattern": self.pattern, "category_fractions": self.category_fractions,
            "n_commodities": self.n_commodities, "total_volume": self.total_volume,
            "size_shape": self.size_shape, "promises": [list(p) for p in self.promises],
            "planner": self.planner.to_dict(), "max_intermediate": self.max_intermediate,
            "max_deviation": self.max_deviation, "max_paths": self.max_paths,
            "max_xdock_per_arc": self.max_xdock_per_arc, "container_size": self.container_size,
            "gap": self.gap, "node_limit": self.node_limit, "time_limit": self.time_limit,
            "engine": self.engine, "handoff_nodes": self.handoff_nodes, "workers": self.workers,
            "repair_node_limit": self.repair_node_limit, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        full = _deep_merge(cls().to_dict(), d)
        return cls(
            grid=GridSpec.from_dict(full.pop("grid")),
            hub_times=HubTimes.from_dict(full.pop("hub_times")),
            planner=PlannerParams.from_dict(full.pop("planner")),
            **full,
        )

    @classmethod
    def load(cls, path: str | os.PathLike | None, overrides: Mapping | None = None) -> "ExperimentConfig":
        d: dict = {}
        if path:
            with open(path) as fh:
                d = json.load(fh)
            preset = d.pop("preset", None)
            if preset:
                d = preset_dict(preset, d)
        if overrides:
            d = {**d, **overrides}
        return cls.from_dict(d)


# A scaled-down city (8x8 zones, still four urban areas) for laptop-sized runs.
PRESETS: dict[str, dict] = {
    "full": {},
    "desk": {
        "grid": {"zones_per_side": 8, "zone_size_km": 2.0, "zones_per_cell_side": 2, "cells_per_area_side": 2,
                 "embedding_factor": 3},
        "n_commodities": 200, "total_volume": 2000,
    },
    "toy": {
        "grid": {"zones_per_side": 4, "zone_size_km": 2.0, "zones_per_cell_side": 2, "cells_per_area_side": 1,
                 "embedding_factor": 3},
        "n_commodities": 20, "total_volume": 200,
    },
}


def preset_dict(name: str, over: Mapping | None = None) -> dict:
    """Full config dict: defaults, then the named preset, then ``over`` (nested keys merge)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}")
    return _deep_merge(_deep_merge(ExperimentConfig().to_dict(), PRESETS[name]), over or {})


def preset_config(name: str, **overrides) -> ExperimentConfig:
    return ExperimentConfig.from_dict({**PRESETS[name], **overrides})


# --------------------------------------------------------------------------------------------
# serialization helpers


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))


def read_json(path: Path) -> Any:
    with open(path) as fh:
        return json.load(fh)


def physical_to_dict(paths: Mapping[str, Sequence[PhysicalPath]]) -> dict:
    return {cid: [{"nodes": list(p.nodes), "arcs": list(p.arcs), "length_dm": p.length} for p in ps]
            for cid, ps in paths.items()}


def physical_from_dict(d: Mapping) -> dict[str, list[PhysicalPath]]:
    return {cid: [PhysicalPath(cid, tuple(p["nodes"]), tuple(p["arcs"]), int(p["length_dm"])) for p in ps]
            for cid, ps in d.items()}


def _bounds_from_arcs(p: PhysicalPath, arc_ids: Sequence[str], registry: ContainerArcRegistry) -> tuple[int, ...]:
    b = [0]
    for a in arc_ids:
        b.append(b[-1] + len(registry[a].hub_seq) - 1)
    if b[-1] != p.legs:
        raise ValueError(f"container arcs do not cover the path of {p.commodity_id}")
    return tuple(b)


# --------------------------------------------------------------------------------------------
# stages


@dataclass
class PlannedInstance:
    """Everything up to the final capacity plan."""

    config: ExperimentConfig
    network: Network
    demand: DemandSet
    commodities: list[Commodity]
    draft: CapacityPlan
    plan: CapacityPlan
    repair: RepairReport | None
    physical: dict[str, list[PhysicalPath]]
    outline_objective: float

    def to_dict(self) -> dict:
        rep = None
        if self.repair is not None:
            rep = {"sort_added": self.repair.hub_sort_added, "xdock_added": self.repair.hub_xdock_added,
                   "departures_added": self.repair.departures_added, "objective": self.repair.objective}
        return {
            "schema": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "network": self.network.to_dict(),
            "demand_header": self.demand.to_dict()["header"],
            "commodities": [c.to_dict() for c in self.commodities],
            "outline_objective": self.outline_objective,
            "draft_capacity": self.draft.to_dict(),
            "capacity": self.plan.to_dict(),
            "repair": rep,
            "physical_paths": physical_to_dict(self.physical),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PlannedInstance":
        cfg = ExperimentConfig.from_dict(d["config"])
        demand = DemandSet.from_dict({"header": d["demand_header"], "commodities": d["commodities"]})
        rep = None
        if d.get("repair") is not None:
            r = d["repair"]
            rep = RepairReport(r["sort_added"], r["xdock_added"], r["departures_added"], r["objective"])
        return cls(cfg, Network.from_dict(d["network"]), demand, list(demand.commodities),
                   CapacityPlan.from_dict(d["draft_capacity"]), CapacityPlan.from_dict(d["capacity"]), rep,
                   physical_from_dict(d["physical_paths"]), d["outline_objective"])


def stage_network(cfg: ExperimentConfig) -> Network:
    try:
        return build_network(cfg.grid, LinkStructure(cfg.link_structure), HubStructure(cfg.hub_structure),
                             cfg.hub_times)
    except ValueError as e:
        raise PipelineError("network", str(e)) from e


def stage_demand(cfg: ExperimentConfig, network: Network) -> DemandSet:
    if cfg.seed is None:
        raise PipelineError("demand", "a seed is required")
    try:
        return generate_demand(network, cfg.demand_pattern(), cfg.n_commodities, cfg.total_volume,
                               cfg.size_shape, cfg.seed)
    except ValueError as e:
        raise PipelineError("demand", str(e)) from e


def stage_outline(cfg: ExperimentConfig, network: Network, commodities: Sequence[Commodity]):
    """Draft plan, physical paths on it and each commodity's minimum doable time (minutes)."""
    try:
        lp = build_mcmcnf(network, commodities, cfg.planner)
        res = solve_lp(lp)
        draft = derive_capacities(arc_flows(lp, res), network, cfg.planner)
    except ValueError as e:
        raise PipelineError("capacity", str(e)) from e
    physical: dict[str, list[PhysicalPath]] = {}
    md: dict[str, float] = {}
    try:
        for c in commodities:
            ps = enumerate_physical_paths(network, c, draft, cfg.max_intermediate, cfg.max_deviation, cfg.max_paths)
            physical[c.id] = ps
            md[c.id] = min_doable(network, draft, c, shortest=ps[0]) / 10
    except ValueError as e:
        raise PipelineError("paths", str(e)) from e
    return draft, physical, md, float(res.objective)


def stage_promises(cfg: ExperimentConfig, commodities: Sequence[Commodity], md: Mapping[str, float]):
    try:
        return assign_service_promises(commodities, cfg.promises, md, cfg.seed)
    except ValueError as e:
        raise PipelineError("demand", str(e)) from e


def stage_repair(cfg: ExperimentConfig, network: Network, draft: CapacityPlan, commodities, physical):
    try:
        return repair_capacities(network, draft, commodities, physical, cfg.container_size, cfg.repair_config())
    except ValueError as e:
        raise PipelineError("capacity", str(e)) from e


def plan_instance(cfg: ExperimentConfig, network: Network | None = None,
                  demand: DemandSet | None = None) -> PlannedInstance:
    network = network or stage_network(cfg)
    demand = demand or stage_demand(cfg, network)
    draft, physical, md, obj = stage_outline(cfg, network, demand.commodities)
    commodities = stage_promises(cfg, demand.commodities, md)
    plan, rep = stage_repair(cfg, network, draft, commodities, physical)
    return PlannedInstance(cfg, network, demand, commodities, draft, plan, rep, physical, obj)


@dataclass
class PathSets:
    registry: ContainerArcRegistry
    baseline: dict[str, list[ContainerizedPath]]
    containerized: dict[str, list[ContainerizedPath]]

    def to_dict(self) -> dict:
        return {
            "container_arcs": self.registry.to_list(),
            "baseline_paths": {cid: [cp.to_dict() for cp in ps] for cid, ps in self.baseline.items()},
            "paths": {cid: [cp.to_dict() for cp in ps] for cid, ps in self.containerized.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping, inst: PlannedInstance) -> "PathSets":
        reg = ContainerArcRegistry.from_list(inst.network, d["container_arcs"])
        by_nodes = {cid: {p.nodes: p for p in ps} for cid, ps in inst.physical.items()}

        def load(m):
            out = {}
            for cid, ps in m.items():
                lst = []
                for e in ps:
                    p = by_nodes[cid][tuple(e["nodes"])]
                    cp = containerize(p, _bounds_from_arcs(p, e["container_arcs"], reg), inst.network, inst.plan, reg)
                    if abs(cp.time.minutes - e["T_p"]) > 1e-9:
                        raise ValueError(f"stored T_p of {cid} does not match the capacity plan")
                    lst.append(cp)
                out[cid] = lst
            return out

        return cls(reg, load(d["baseline_paths"]), load(d["paths"]))


def stage_paths(inst: PlannedInstance) -> PathSets:
    cfg = inst.config
    reg = ContainerArcRegistry(inst.network)
    base, cont = {}, {}
    try:
        for c in inst.commodities:
            base[c.id] = build_path_set(inst.network, inst.plan, c, inst.physical[c.id], reg, 0)
        for c in inst.commodities:
            cont[c.id] = build_path_set(inst.network, inst.plan, c, inst.physical[c.id], reg, cfg.max_xdock_per_arc)
    except ValueError as e:
        raise PipelineError("paths", str(e)) from e
    return PathSets(reg, base, cont)


@dataclass
class SolvedModel:
    model: IPModel
    solution: Solution
    stats: SolveStats | None
    root_lp: float | None

    def to_dict(self) -> dict:
        d = self.solution.to_dict(self.model)
        d["choice"] = list(self.solution.choice)
        d["model_size"] = self.model.size()
        d["root_lp_bound_parcel_min"] = None if self.root_lp is None else self.root_lp / 10
        d["nodes"] = self.stats.nodes
        d["engine"] = self.stats.engine
        return d


def _solve_one(model: IPModel, cfg: ExperimentConfig, stage: str, initial=None, progress=None) -> SolvedModel:
    root = solve_lp(model.relaxation())
    root_lp = root.objective if root.objective is not None else None
    sol, stats = solve_ip(model, cfg.solve_config(progress), initial=initial)
    if sol is None:
        raise PipelineError(stage, f"no feasible assignment ({stats.status.value})")
    issues = validate(model, sol)
    if issues:
        raise PipelineError(stage, "solution failed validation: " + "; ".join(issues[:5]))
    return SolvedModel(model, sol, stats, root_lp)


def stage_solve(inst: PlannedInstance, paths: PathSets, baseline_only: bool = False, progress=None):
    cfg = inst.config
    try:
        bm = build_ip(inst.network, inst.plan, inst.commodities, paths.baseline, paths.registry,
                      cfg.container_size, kind="baseline")
    except ValueError as e:
        raise PipelineError("model", str(e)) from e
    base = _solve_one(bm, cfg, "solve-baseline", progress=progress)
    if baseline_only:
        return base, None
    try:
        cm = build_ip(inst.network, inst.plan, inst.commodities, paths.containerized, paths.registry,
                      cfg.container_size)
    except ValueError as e:
        raise PipelineError("model", str(e)) from e
    # the fully sorted twin of the baseline choice is feasible in the containerized model
    init = []
    for k, cp in enumerate(base.solution.chosen(bm)):
        init.append(next(i for i, alt in enumerate(cm.paths[k])
                         if alt.physical.nodes == cp.physical.nodes and alt.fully_sorted))
    cont = _solve_one(cm, cfg, "solve-containerized", initial=init, progress=progress)
    return base, cont


def reload_solution(model: IPModel, d: Mapping) -> Solution:
    sol = solution_from_choice(model, d["choice"], bound=d["bound_parcel_min"] * 10, status=d["status"])
    return sol


@dataclass
class Report:
    savings: analytics.SavingsReport | None
    baseline: analytics.SolutionTotals
    containerized: analytics.SolutionTotals | None
    utilization: analytics.UtilizationReport | None
    capacity: dict
    capacity_notes: list[str]

    def row(self, cfg: ExperimentConfig, status: str = "ok") -> dict:
        return analytics.table_row(cfg.pattern, cfg.structure, cfg.seed, self.savings, self.utilization, status)

    def to_dict(self) -> dict:
        return {
            "units": "parcel-minutes per hour",
            "baseline": self.baseline.to_dict(),
            "containerized": None if self.containerized is None else self.containerized.to_dict(),
            "savings": None if self.savings is None else self.savings.to_dict(),
            "utilization_mean": None if self.utilization is None else self.utilization.mean,
            "hub_capacity": {k: {"count": v.count, "min": v.minimum, "mean": v.mean, "max": v.maximum}
                             for k, v in self.capacity.items()},
            "hub_capacity_notes": self.capacity_notes,
        }


def stage_report(inst: PlannedInstance, base: SolvedModel, cont: SolvedModel | None) -> Report:
    bt = analytics.summarize(base.model, base.solution)
    ct = sv = util = None
    if cont is not None:
        ct = analytics.summarize(cont.model, cont.solution)
        sv = analytics.savings(bt, ct)
        util = analytics.container_utilization(analytics.solution_flows(cont.model, cont.solution),
                                               inst.config.container_size)
    stats, notes = analytics.hub_capacity_stats(inst.plan, inst.network)
    return Report(sv, bt, ct, util, stats, notes)


# --------------------------------------------------------------------------------------------
# whole runs


@dataclass
class RunResult:
    instance: PlannedInstance
    paths: PathSets
    baseline: SolvedModel
    containerized: SolvedModel | None
    report: Report
    timings: dict[str, float]


def write_outputs(out_dir: Path, res: RunResult, include_timings: bool = True) -> None:
    """Write every output of a run; a report-only result (no solve stats) keeps the existing solution files."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if res.baseline.stats is not None:
        inst = res.instance.to_dict()
        inst.update(res.paths.to_dict())
        write_json(out_dir / "instance.json", inst)
        sol = {"baseline": res.baseline.to_dict(),
               "containerized": None if res.containerized is None else res.containerized.to_dict()}
        write_json(out_dir / "solution.json", sol)
    write_json(out_dir / "report.json", res.report.to_dict())
    row = res.report.row(res.instance.config)
    with open(out_dir / "report.csv", "w", newline="") as fh:
        analytics.write_table_csv([row], fh)
    if res.report.savings is not None:
        analytics.savings_chart([row], str(out_dir / "savings.svg"))
    if res.report.capacity:
        analytics.capacity_chart(res.report.capacity, str(out_dir / "capacity.svg"))
    # wall-clock figures live apart from the reproducible outputs
    if include_timings:
        write_json(out_dir / "timings.json", {k: round(v, 3) for k, v in res.timings.items()})


def run_pipeline(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None, baseline_only: bool = False,
                 progress=None, planned: PlannedInstance | None = None) -> RunResult:
    timings: dict[str, float] = {}
    t = time.perf_counter()
    inst = planned or plan_instance(cfg)
    timings["plan"] = time.perf_counter() - t
    t = time.perf_counter()
    paths = stage_paths(inst)
    timings["paths"] = time.perf_counter() - t
    t = time.perf_counter()
    base, cont = stage_solve(inst, paths, baseline_only, progress)
    timings["solve"] = time.perf_counter() - t
    report = stage_report(inst, base, cont)
    res = RunResult(inst, paths, base, cont, report, timings)
    if out_dir is not None:
        write_outputs(Path(out_dir), res)
    return res


# ----- experiment matrix


def _structure_phase(cfg_dict: dict):
    """Per structure: network, outline plan, physical paths and minimum doable times."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    net = stage_network(cfg)
    demand = stage_demand(cfg, net)
    draft, physical, md, obj = stage_outline(cfg, net, demand.commodities)
    return net, demand, draft, physical, md, obj


def _cell_phase(args):
    cfg_dict, net, demand, commodities, draft, physical, obj, out_dir, baseline_only = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    t = time.perf_counter()
    try:
        plan, rep = stage_repair(cfg, net, draft, commodities, physical)
        inst = PlannedInstance(cfg, net, demand, commodities, draft, plan, rep, physical, obj)
        res = run_pipeline(cfg, out_dir, baseline_only, planned=inst)
        return res.report.row(cfg), None, time.perf_counter() - t
    except PipelineError as e:
        return analytics.table_row(cfg.pattern, cfg.structure, cfg.seed, None, None, f"error: {e}"), str(e), \
            time.perf_counter() - t


def run_matrix(template: ExperimentConfig, structures: Sequence[tuple[str, str]] | None = None,
               patterns: Sequence[str] | None = None, seeds: Sequence[int] | None = None,
               out_dir: str | os.PathLike | None = None, baseline_only: bool = False,
               max_workers: int | None = None) -> tuple[list[dict], list[str]]:
    """Run every (seed, pattern, structure) cell; returns table rows and error messages.

    Within one seed and pattern every structure sees the same commodities and
    the same service promises; each commodity's promise respects its minimum
    doable time on every structure.
    """
    structures = list(structures or [(l.value, h.value) for l, h in all_structures()])
    patterns = list(patterns or ["uniform", "centric", "bipolar"])
    seeds = list(seeds or [template.seed])
    if any(s is None for s in seeds):
        raise PipelineError("matrix", "a seed is required")
    workers = max_workers or 1
    rows: list[dict] = []
    errors: list[str] = []
    base = template.to_dict()

    def cell_cfg(seed, pattern, st):
        return {**base, "seed": seed, "pattern": pattern, "link_structure": st[0], "hub_structure": st[1]}

    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    mapper = pool.map if pool is not None else map
    try:
        for seed in seeds:
            for pattern in patterns:
                cfgs = [cell_cfg(seed, pattern, st) for st in structures]
                phase1 = []
                for cd, r in zip(cfgs, _safe_map(mapper, _structure_phase, cfgs)):
                    phase1.append(r)
                md: dict[str, float] = {}
                ref_ids = None
                for r in phase1:
                    if isinstance(r, Exception):
                        continue
                    ids = [c.id for c in r[1].commodities]
                    if ref_ids is None:
                        ref_ids = ids
                    elif ids != ref_ids:
                        raise PipelineError("matrix", "structures disagree on the commodity list")
                    for cid, v in r[4].items():
                        md[cid] = max(md.get(cid, 0.0), v)
                jobs, slots = [], []
                for cd, r in zip(cfgs, phase1):
                    c = ExperimentConfig.from_dict(cd)
                    if isinstance(r, Exception):
                        rows.append(analytics.table_row(pattern, c.structure, seed, None, None, f"error: {r}"))
                        errors.append(str(r))
                        slots.append(None)
                        continue
                    net, demand, draft, physical, _, obj = r
                    try:
                        commodities = stage_promises(c, demand.commodities, md)
                    except PipelineError as e:
                        rows.append(analytics.table_row(pattern, c.structure, seed, None, None, f"error: {e}"))
                        errors.append(str(e))
                        slots.append(None)
                        continue
                    cell_dir = None
                    if out_dir is not None:
                        cell_dir = str(Path(out_dir) / f"seed{seed}" / pattern /
                                       f"{c.link_structure}_{c.hub_structure}")
                    jobs.append((cd, net, demand, commodities, draft, physical, obj, cell_dir, baseline_only))
                    slots.append(len(rows))
                    rows.append({})
                for (row, err, _), idx in zip(mapper(_cell_phase, jobs), [s for s in slots if s is not None]):
                    rows[idx] = row
                    if err:
                        errors.append(err)
    finally:
        if pool is not None:
            pool.shutdown()
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "matrix.csv", "w", newline="") as fh:
            analytics.write_table_csv(rows, fh)
        analytics.savings_chart([r for r in rows if r.get("status") == "ok"], str(Path(out_dir) / "matrix.svg"))
    return rows, errors


def _safe_map(mapper, fn, items):
    def wrap(item):
        try:
            return fn(item)
        except PipelineError as e:
            return e

    if mapper is map:
        return [wrap(i) for i in items]
    return list(mapper(_guarded, [(fn, i) for i in items]))


def _guarded(args):
    fn, item = args
    try:
        return fn(item)
    except PipelineError as e:
        return e
