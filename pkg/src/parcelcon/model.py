"""Path-based integer program for joint routing and container consolidation.

Columns: one binary ``x`` per (commodity, containerized path), one integer
``y`` per container arc in use, and optionally non-negative slack columns on
the crossdock, sorting and vehicle rows (used by capacity repair). Costs are
``q_k * T_p`` in parcel-deciminutes, so objectives are exact integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .capacity import CapacityPlan
from .demand import Commodity
from .network import Network
from .pathgen import ContainerArcRegistry, ContainerizedPath, TransitTime, containerize
from .solver.lp import LinearProgram

ROW_XDOCK, ROW_SORT, ROW_CONTAINER, ROW_VEHICLE, ROW_ASSIGN = "xdock", "sort", "container", "vehicle", "assign"


class ModelError(ValueError):
    pass


@dataclass
class IPModel:
    network: Network
    plan: CapacityPlan
    commodities: list[Commodity]
    paths: list[list[ContainerizedPath]]
    registry: ContainerArcRegistry
    q: int
    kind: str
    x_commodity: np.ndarray  # commodity index per x column
    x_path: np.ndarray  # path index within the commodity per x column
    x_start: np.ndarray  # first x column of each commodity (length K + 1)
    x_cost: np.ndarray  # int64 q_k * T_p
    y_arcs: list[str]
    slack_keys: list[tuple[str, str]]
    slack_penalty: int
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    row_kind: list[str]
    row_key: list[str]
    hub_ids: list[str] = field(default_factory=list)
    phys_ids: list[str] = field(default_factory=list)

    @property
    def n_x(self) -> int:
        return len(self.x_commodity)

    @property
    def n_y(self) -> int:
        return len(self.y_arcs)

    @property
    def n_cols(self) -> int:
        return self.n_x + self.n_y + len(self.slack_keys)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def cost(self) -> np.ndarray:
        c = np.zeros(self.n_cols, dtype=np.int64)
        c[: self.n_x] = self.x_cost
        c[self.n_x + self.n_y:] = self.slack_penalty
        return c

    @property
    def y_index(self) -> dict[str, int]:
        return {a: self.n_x + i for i, a in enumerate(self.y_arcs)}

    def linking_rows(self) -> tuple[sp.csr_matrix, list[str]]:
        """Valid rows ``sum_{p of k using a} x_kp - y_a <= 0`` per (commodity, container arc).

        Any flow on a container arc needs at least one container, so these hold
        for every integer solution while cutting off fractional ``y < 1``.
        """
        yi = self.y_index
        rows_i, rows_j, vals, names = [], [], [], []
        r = 0
        for k, plist in enumerate(self.paths):
            by_arc: dict[str, list[int]] = {}
            for p, cp in enumerate(plist):
                for a in cp.container_arcs:
                    by_arc.setdefault(a, []).append(int(self.x_start[k]) + p)
            for a in sorted(by_arc, key=lambda a: int(a[1:])):
                for j in by_arc[a]:
                    rows_i.append(r); rows_j.append(j); vals.append(1.0)  # noqa: E702
                rows_i.append(r); rows_j.append(yi[a]); vals.append(-1.0)  # noqa: E702
                names.append(f"link[{self.commodities[k].id},{a}]")
                r += 1
        return sp.csr_matrix((vals, (rows_i, rows_j)), shape=(r, self.n_cols)), names

    def relaxation(self, strengthen: bool = False) -> LinearProgram:
        """LP relaxation; ``strengthen`` appends the commodity/container-arc linking rows."""
        n = self.n_cols
        ub = np.full(n, np.inf)
        ub[: self.n_x] = 1.0
        names = ([f"x[{self.commodities[k].id},{p}]" for k, p in zip(self.x_commodity, self.x_path)]
                 + [f"y[{a}]" for a in self.y_arcs] + [f"s[{k},{h}]" for k, h in self.slack_keys])
        A, sense, rhs = self.A, self.sense, self.rhs
        row_names = [f"{k}[{h}]" for k, h in zip(self.row_kind, self.row_key)]
        if strengthen:
            L, lnames = self.linking_rows()
            A = sp.vstack([A, L]).tocsr()
            sense = np.concatenate([sense, np.full(L.shape[0], "<")])
            rhs = np.concatenate([rhs, np.zeros(L.shape[0])])
            row_names = row_names + lnames
        lp = LinearProgram(self.cost.astype(float), A, sense, rhs, np.zeros(n), ub,
                           var_names=names, row_names=row_names)
        lp.meta["kind"] = "ip-relaxation"
        return lp

    def path(self, k: int, p: int) -> ContainerizedPath:
        return self.paths[k][p]

    def size(self) -> dict:
        return {"x": self.n_x, "y": self.n_y, "slack": len(self.slack_keys), "rows": self.n_rows,
                "nonzeros": int(self.A.nnz)}

    def kernel_arrays(self) -> dict:
        """CSR arrays describing the model for the compiled feasibility/enumeration kernels."""
        hub_pos = {h: i for i, h in enumerate(self.hub_ids)}
        phys_pos = {a: i for i, a in enumerate(self.phys_ids)}
        y_pos = {a: i for i, a in enumerate(self.y_arcs)}
        arc_ptr, arc_idx, sort_ptr, sort_idx = [0], [], [0], []
        qty = []
        for k, plist in enumerate(self.paths):
            for cp in plist:
                arc_idx.extend(y_pos[a] for a in cp.container_arcs)
                arc_ptr.append(len(arc_idx))
                sort_idx.extend(hub_pos[h] for h in cp.sort_hubs)
                sort_ptr.append(len(sort_idx))
                qty.append(self.commodities[k].quantity)
        xd_ptr, xd_idx, ph_ptr, ph_idx = [0], [], [0], []
        for a in self.y_arcs:
            ca = self.registry[a]
            xd_idx.extend(hub_pos[h] for h in ca.crossdock_hubs)
            xd_ptr.append(len(xd_idx))
            ph_idx.extend(phys_pos[e] for e in ca.physical_arcs)
            ph_ptr.append(len(ph_idx))
        arr = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
        plan = self.plan
        Q = [self.network.arc_by_id[e].vehicle_capacity_containers(self.q) * plan.departures.get(e, 0)
             for e in self.phys_ids]
        return dict(
            radix=arr([len(p) for p in self.paths]), opt_start=arr(self.x_start[:-1]),
            opt_cost=arr(self.x_cost), opt_qty=arr(qty),
            opt_arc_ptr=arr(arc_ptr), opt_arc_idx=arr(arc_idx), opt_sort_ptr=arr(sort_ptr), opt_sort_idx=arr(sort_idx),
            arc_xd_ptr=arr(xd_ptr), arc_xd_idx=arr(xd_idx), arc_phys_ptr=arr(ph_ptr), arc_phys_idx=arr(ph_idx),
            xd_cap=arr([plan.crossdock_capacity.get(h, 0) for h in self.hub_ids]),
            sort_cap=arr([plan.sort_capacity.get(h, 0) for h in self.hub_ids]),
            phys_cap=arr(Q), q=self.q,
            n_arcs=len(self.y_arcs), n_hubs=len(self.hub_ids), n_phys=len(self.phys_ids),
        )


@dataclass
class Solution:
    choice: list[int]  # path index per commodity
    y: dict[str, int]
    objective: int
    bound: float
    status: str = "optimal"
    slack: dict[tuple[str, str], int] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        if self.objective == 0:
            return 0.0
        return max(0.0, (self.objective - self.bound) / abs(self.objective))

    def chosen(self, model: IPModel) -> list[ContainerizedPath]:
        return [model.paths[k][p] for k, p in enumerate(self.choice)]

    def decomposition(self, model: IPModel) -> TransitTime:
        """Quantity-weighted totals (parcel-deciminutes) per time component."""
        tr = wt = so = xd = 0
        for com, cp in zip(model.commodities, self.chosen(model)):
            t = cp.time
            tr += com.quantity * t.transport
            wt += com.quantity * t.wait
            so += com.quantity * t.sort
            xd += com.quantity * t.crossdock
        return TransitTime(tr, wt, so, xd)

    def vector(self, model: IPModel) -> np.ndarray:
        v = np.zeros(model.n_cols)
        for k, p in enumerate(self.choice):
            v[model.x_start[k] + p] = 1.0
        yi = model.y_index
        for a, n in self.y.items():
            v[yi[a]] = n
        for i, key in enumerate(model.slack_keys):
            v[model.n_x + model.n_y + i] = self.slack.get(key, 0)
        return v

    def to_dict(self, model: IPModel) -> dict:
        dec = self.decomposition(model)
        return {
            "status": self.status,
            "objective_parcel_min": self.objective / 10,
            "bound_parcel_min": self.bound / 10,
            "gap": self.gap,
            "decomposition_parcel_min": dec.to_dict(),
            "assignment": {com.id: cp.to_dict() for com, cp in zip(model.commodities, self.chosen(model))},
            "containers": {a: n for a, n in self.y.items() if n > 0},
        }


def _dedupe(paths: Sequence[ContainerizedPath]) -> list[ContainerizedPath]:
    seen = set()
    out = []
    for cp in paths:
        key = (cp.physical.nodes, cp.bounds)
        if key not in seen:
            seen.add(key)
            out.append(cp)
    return out


def build_ip(network: Network, plan: CapacityPlan, commodities: Sequence[Commodity],
             paths: Mapping[str, Sequence[ContainerizedPath]], registry: ContainerArcRegistry, q: int,
             slack: bool = False, kind: str = "containerized") -> IPModel:
    commodities = list(commodities)
    plists = []
    for com in commodities:
        pl = _dedupe(paths.get(com.id, ()))
        if not pl:
            raise ModelError(f"commodity {com.id} has no paths")
        plists.append(pl)

    x_com, x_path, x_cost, x_start = [], [], [], [0]
    for k, (com, pl) in enumerate(zip(commodities, plists)):
        for p, cp in enumerate(pl):
            x_com.append(k)
            x_path.append(p)
            x_cost.append(com.quantity * cp.T_p)
        x_start.append(len(x_com))
    n_x = len(x_com)
    used = sorted({a for pl in plists for cp in pl for a in cp.container_arcs}, key=lambda a: int(a[1:]))
    y_pos = {a: n_x + i for i, a in enumerate(used)}
    n_y = len(used)

    # collect row contributions keyed by (kind, key)
    xdock_rows: dict[str, list[int]] = {}
    sort_rows: dict[str, list[tuple[int, int]]] = {}
    cont_rows: dict[str, list[tuple[int, int]]] = {a: [] for a in used}
    veh_rows: dict[str, list[int]] = {}
    for j in range(n_x):
        k = x_com[j]
        cp = plists[k][x_path[j]]
        qk = commodities[k].quantity
        for h in cp.sort_hubs:
            sort_rows.setdefault(h, []).append((j, qk))
        for a in cp.container_arcs:
            cont_rows[a].append((j, qk))
    for a in used:
        ca = registry[a]
        for h in ca.crossdock_hubs:
            xdock_rows.setdefault(h, []).append(y_pos[a])
        for e in ca.physical_arcs:
            veh_rows.setdefault(e, []).append(y_pos[a])

    hub_order = {h.id: i for i, h in enumerate(network.hubs)}
    arc_order = {a.id: i for i, a in enumerate(network.arcs)}
    rows_i, rows_j, vals = [], [], []
    sense, rhs, row_kind, row_key = [], [], [], []
    slack_keys: list[tuple[str, str]] = []
    slack_rows: list[int] = []

    def new_row(kind_, key, s, b):
        row_kind.append(kind_)
        row_key.append(key)
        sense.append(s)
        rhs.append(b)
        return len(row_kind) - 1

    for h in sorted(xdock_rows, key=hub_order.__getitem__):
        r = new_row(ROW_XDOCK, h, "<", plan.crossdock_capacity.get(h, 0))
        for j in xdock_rows[h]:
            rows_i.append(r); rows_j.append(j); vals.append(1.0)  # noqa: E702
        if slack:
            slack_keys.append((ROW_XDOCK, h)); slack_rows.append(r)  # noqa: E702
    for h in sorted(sort_rows, key=hub_order.__getitem__):
        r = new_row(ROW_SORT, h, "<", plan.sort_capacity.get(h, 0))
        for j, qk in sort_rows[h]:
            rows_i.append(r); rows_j.append(j); vals.append(float(qk))  # noqa: E702
        if slack:
            slack_keys.append((ROW_SORT, h)); slack_rows.append(r)  # noqa: E702
    for a in used:
        r = new_row(ROW_CONTAINER, a, "<", 0)
        for j, qk in cont_rows[a]:
            rows_i.append(r); rows_j.append(j); vals.append(float(qk))  # noqa: E702
        rows_i.append(r); rows_j.append(y_pos[a]); vals.append(-float(q))  # noqa: E702
    for e in sorted(veh_rows, key=arc_order.__getitem__):
        Q = network.arc_by_id[e].vehicle_capacity_containers(q)
        r = new_row(ROW_VEHICLE, e, "<", Q * plan.departures.get(e, 0))
        for j in veh_rows[e]:
            rows_i.append(r); rows_j.append(j); vals.append(1.0)  # noqa: E702
        if slack:
            slack_keys.append((ROW_VEHICLE, e)); slack_rows.append(r)  # noqa: E702
    for k, com in enumerate(commodities):
        r = new_row(ROW_ASSIGN, com.id, "=", 1)
        for j in range(x_start[k], x_start[k + 1]):
            rows_i.append(r); rows_j.append(j); vals.append(1.0)  # noqa: E702
    for i, r in enumerate(slack_rows):
        rows_i.append(r); rows_j.append(n_x + n_y + i); vals.append(-1.0)  # noqa: E702

    n_cols = n_x + n_y + len(slack_keys)
    A = sp.csr_matrix((vals, (rows_i, rows_j)), shape=(len(row_kind), n_cols))
    penalty = 1 + sum(com.quantity * max(cp.T_p for cp in pl) for com, pl in zip(commodities, plists))
    return IPModel(network, plan, commodities, plists, registry, int(q), kind,
                   np.asarray(x_com, dtype=np.int64), np.asarray(x_path, dtype=np.int64),
                   np.asarray(x_start, dtype=np.int64), np.asarray(x_cost, dtype=np.int64),
                   used, slack_keys, int(penalty), A, np.asarray(sense), np.asarray(rhs, dtype=float),
                   row_kind, row_key, [h.id for h in network.hubs], [a.id for a in network.arcs])


def baseline_paths(network: Network, plan: CapacityPlan, commodities: Sequence[Commodity],
                   paths: Mapping[str, Sequence], registry: ContainerArcRegistry,
                   allow_idle: bool = False) -> dict[str, list[ContainerizedPath]]:
    """Fully sorted variant of every distinct physical path, kept only if it meets the promise.

    ``paths`` may hold containerized paths or bare physical paths.
    """
    out = {}
    for com in commodities:
        seen = set()
        lst = []
        for item in paths.get(com.id, ()):
            phys = getattr(item, "physical", item)
            if phys.nodes in seen:
                continue
            seen.add(phys.nodes)
            cp = containerize(phys, tuple(range(phys.legs + 1)), network, plan, registry, allow_idle)
            if com.service_promise is None or cp.T_p <= 10 * com.service_promise:
                lst.append(cp)
        out[com.id] = lst
    return out


def build_baseline_ip(network: Network, plan: CapacityPlan, commodities: Sequence[Commodity],
                      paths: Mapping[str, Sequence], registry: ContainerArcRegistry, q: int,
                      slack: bool = False, allow_idle: bool = False) -> IPModel:
    """The same model restricted to single-leg container arcs (every intermediate hub sorts)."""
    base = baseline_paths(network, plan, commodities, paths, registry, allow_idle=allow_idle or slack)
    return build_ip(network, plan, commodities, base, registry, q, slack=slack, kind="baseline")


def container_counts(model: IPModel, choice: Sequence[int]) -> dict[str, int]:
    """Minimum containers per arc for a path choice: ceil(flow / q)."""
    flow: dict[str, int] = {}
    for k, p in enumerate(choice):
        qk = model.commodities[k].quantity
        for a in model.paths[k][p].container_arcs:
            flow[a] = flow.get(a, 0) + qk
    return {a: -(-flow.get(a, 0) // model.q) for a in model.y_arcs}


def solution_from_choice(model: IPModel, choice: Sequence[int], bound: float | None = None,
                         status: str = "optimal") -> Solution:
    choice = [int(c) for c in choice]
    obj = int(sum(int(model.x_cost[model.x_start[k] + p]) for k, p in enumerate(choice)))
    return Solution(choice, container_counts(model, choice), obj, float(obj if bound is None else bound), status)


def validate(model: IPModel, solution: Solution) -> list[str]:
    """Violations of a solution, recomputed from path metadata rather than the matrix.

    Returns an empty list for a feasible solution whose stated objective matches.
    """
    issues: list[str] = []
    K = len(model.commodities)
    if len(solution.choice) != K:
        issues.append(f"assign: {len(solution.choice)} choices for {K} commodities")
        return issues
    for k, p in enumerate(solution.choice):
        if isinstance(p, (list, tuple, set)):
            if len(p) != 1:
                issues.append(f"assign[{model.commodities[k].id}]: {len(p)} paths selected")
                continue
            p = next(iter(p))
        if not 0 <= p < len(model.paths[k]):
            issues.append(f"assign[{model.commodities[k].id}]: path index {p} out of range")
    if issues:
        return issues
    for a, n in solution.y.items():
        if n != int(n) or n < 0:
            issues.append(f"integrality[{a}]: y = {n}")
    plan = model.plan
    flow: dict[str, int] = {}
    sort_load: dict[str, int] = {}
    obj = 0
    for k, p in enumerate(solution.choice):
        com = model.commodities[k]
        cp = model.paths[k][p]
        t = cp.time
        if t.transport + t.wait + t.sort + t.crossdock != cp.T_p:
            issues.append(f"time[{com.id}]: decomposition does not sum to T_p")
        if com.service_promise is not None and cp.T_p > 10 * com.service_promise:
            issues.append(f"promise[{com.id}]: T_p {cp.T_p / 10} > {com.service_promise}")
        obj += com.quantity * cp.T_p
        for a in cp.container_arcs:
            flow[a] = flow.get(a, 0) + com.quantity
        for h in cp.sort_hubs:
            sort_load[h] = sort_load.get(h, 0) + com.quantity
    xd_load: dict[str, int] = {}
    veh_load: dict[str, int] = {}
    for a in set(flow) | set(solution.y):
        y = int(solution.y.get(a, 0))
        if flow.get(a, 0) > model.q * y:
            issues.append(f"container[{a}]: flow {flow.get(a, 0)} > {model.q} x {y}")
        ca = model.registry[a]
        for h in ca.crossdock_hubs:
            xd_load[h] = xd_load.get(h, 0) + y
        for e in ca.physical_arcs:
            veh_load[e] = veh_load.get(e, 0) + y
    slack = solution.slack
    for h, load in sort_load.items():
        cap = plan.sort_capacity.get(h, 0) + slack.get((ROW_SORT, h), 0)
        if load > cap:
            issues.append(f"sort[{h}]: {load} > {cap}")
    for h, load in xd_load.items():
        cap = plan.crossdock_capacity.get(h, 0) + slack.get((ROW_XDOCK, h), 0)
        if load > cap:
            issues.append(f"xdock[{h}]: {load} > {cap}")
    for e, load in veh_load.items():
        Q = model.network.arc_by_id[e].vehicle_capacity_containers(model.q)
        cap = Q * plan.departures.get(e, 0) + slack.get((ROW_VEHICLE, e), 0)
        if load > cap:
            issues.append(f"vehicle[{e}]: {load} > {cap}")
    obj += model.slack_penalty * sum(slack.get(key, 0) for key in model.slack_keys)
    if obj != solution.objective:
        issues.append(f"objective: stated {solution.objective} != recomputed {obj}")
    return issues


def _lp_name(s: str) -> str:
    return s.replace("[", "(").replace("]", ")").replace(",", "_")


def write_lp(model: IPModel, fh: TextIO) -> None:
    """Write the model in CPLEX LP text format."""
    lp = model.relaxation()
    names = [_lp_name(n) for n in lp.var_names]
    c = model.cost

    def terms(idx, coef):
        parts = []
        for j, v in zip(idx, coef):
            v = int(v) if float(v).is_integer() else float(v)
            parts.append(f"{'-' if v < 0 else '+'} {abs(v)} {names[j]}")
        s = " ".join(parts) or "0 " + names[0]
        return s[2:] if s.startswith("+ ") else s

    fh.write(f"\\ {model.kind} consolidation model\nMinimize\n obj: ")
    nz = np.flatnonzero(c)
    fh.write(terms(nz, c[nz]) + "\nSubject To\n")
    A = model.A
    for r in range(model.n_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        op = {"<": "<=", ">": ">=", "=": "="}[model.sense[r]]
        b = model.rhs[r]
        b = int(b) if float(b).is_integer() else float(b)
        fh.write(f" {_lp_name(model.row_kind[r] + '_' + model.row_key[r])}: {terms(A.indices[lo:hi], A.data[lo:hi])} {op} {b}\n")
    fh.write("Bounds\n")
    for j in range(model.n_x, model.n_cols):
        fh.write(f" {names[j]} >= 0\n")
    fh.write("Binary\n")
    for j in range(model.n_x):
        fh.write(f" {names[j]}\n")
    fh.write("General\n")
    for j in range(model.n_x, model.n_x + model.n_y):
        fh.write(f" {names[j]}\n")
    fh.write("End\n")
