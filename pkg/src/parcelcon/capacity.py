"""Capacity planning: a penalised multi-commodity flow outline, then sizing and repair.

The outline LP spreads each commodity over several routes (arc flow above
``gamma * q_k`` is penalised) and lets hubs exceed an initial sorting limit at
a penalty. Planned capacities are the outline flows scaled by ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .demand import Commodity
from .network import Network
from .solver.lp import LinearProgram, LPResult, LPStatus, solve_lp

DEFAULT_SORT_LIMITS = {"AH": 500, "LH": 2000, "GH": 6000, "RH": 6000}


class ModelBuildError(ValueError):
    pass


@dataclass(frozen=True)
class PlannerParams:
    gamma: float = 0.5
    rho: float = 1.3
    delta: float = 4.0
    big_m: float | None = None
    container_size: int = 40
    initial_sort_limits: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_SORT_LIMITS))

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.container_size < 1:
            raise ValueError("container size must be >= 1")

    def penalty(self, network: Network) -> float:
        floor = 1e6 * max(a.transport_time for a in network.arcs)
        if self.big_m is None:
            return floor
        if self.big_m < floor:
            raise ValueError(f"big_m={self.big_m} below 1e6 * max transport time ({floor:g})")
        return float(self.big_m)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "rho": self.rho, "delta": self.delta, "big_m": self.big_m,
                "container_size": self.container_size,
                "initial_sort_limits": {k: self.initial_sort_limits[k] for k in sorted(self.initial_sort_limits)}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PlannerParams":
        return cls(**{**d, "initial_sort_limits": dict(d["initial_sort_limits"])})


@dataclass
class CapacityPlan:
    """Sorting/crossdock limits per hub and vehicle departures per physical arc."""

    sort_capacity: dict[str, int]
    crossdock_capacity: dict[str, int]
    departures: dict[str, int]

    def __post_init__(self):
        for table in (self.sort_capacity, self.crossdock_capacity, self.departures):
            if any(v < 0 for v in table.values()):
                raise ValueError("capacities must be non-negative")

    def wait_time(self, arc_id: str) -> float:
        """Expected wait in minutes: half the headway between departures."""
        d = self.departures.get(arc_id, 0)
        return 60.0 / (2 * d) if d > 0 else math.inf

    def wait_dm(self, arc_id: str) -> int:
        d = self.departures.get(arc_id, 0)
        if d <= 0:
            raise ValueError(f"arc {arc_id} has no departures")
        return (600 + d) // (2 * d)  # round(300 / d) with halves up

    def arc_active(self, arc_id: str) -> bool:
        return self.departures.get(arc_id, 0) > 0

    def hub_active(self, hub_id: str) -> bool:
        return self.sort_capacity.get(hub_id, 0) > 0

    @property
    def pruned_hubs(self) -> list[str]:
        return sorted(h for h, v in self.sort_capacity.items() if v == 0)

    @property
    def pruned_arcs(self) -> list[str]:
        return sorted(a for a, v in self.departures.items() if v == 0)

    def copy(self) -> "CapacityPlan":
        return CapacityPlan(dict(self.sort_capacity), dict(self.crossdock_capacity), dict(self.departures))

    def to_dict(self) -> dict:
        return {
            "hubs": {h: {"sort": self.sort_capacity[h], "xdock": self.crossdock_capacity[h]}
                     for h in self.sort_capacity},
            "arcs": {a: {"departures_per_hour": d,
                         "wait_min": (round(self.wait_time(a), 6) if d > 0 else None)}
                     for a, d in self.departures.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CapacityPlan":
        return cls({h: int(v["sort"]) for h, v in d["hubs"].items()},
                   {h: int(v["xdock"]) for h, v in d["hubs"].items()},
                   {a: int(v["departures_per_hour"]) for a, v in d["arcs"].items()})


def ceil_product(*factors: float) -> int:
    """Ceiling of a product of decimals, computed exactly (1.3 * 100 -> 130, not 131)."""
    prod = Fraction(1)
    for f in factors:
        prod *= Fraction(repr(round(float(f), 6)))
    return math.ceil(prod)


def commodity_arcs(network: Network, commodity: Commodity) -> list:
    """Arcs a commodity may use: hub-to-hub arcs plus those leaving its origin or reaching its destination."""
    o, d = commodity.origin, commodity.destination
    out = []
    for a in network.arcs:
        if a.head == o or a.tail == d:
            continue
        tail_ok = a.tail == o or network.is_hub(a.tail)
        head_ok = a.head == d or network.is_hub(a.head)
        if tail_ok and head_ok:
            out.append(a)
    return out


def _check_connected(network: Network, commodity: Commodity, arcs) -> None:
    adj: dict[str, list[str]] = {}
    for a in arcs:
        adj.setdefault(a.tail, []).append(a.head)
    seen = {commodity.origin}
    stack = [commodity.origin]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if commodity.destination not in seen:
        raise ModelBuildError(
            f"commodity {commodity.id}: {commodity.destination} unreachable from {commodity.origin}")


def build_mcmcnf(network: Network, commodities: Sequence[Commodity], params: PlannerParams) -> LinearProgram:
    """Outline LP: columns x[k,a], u[k,a] per commodity-arc pair, then v[n] per hub."""
    M = params.penalty(network)
    hubs = [h.id for h in network.hubs]
    hub_col = {}
    x_index: list[tuple[int, str]] = []
    cols_c: list[float] = []
    rows_i: list[int] = []
    rows_j: list[int] = []
    vals: list[float] = []
    sense: list[str] = []
    rhs: list[float] = []
    row_names: list[str] = []

    def add(r, j, v):
        rows_i.append(r)
        rows_j.append(j)
        vals.append(v)

    per_k_arcs = []
    for k, com in enumerate(commodities):
        arcs = commodity_arcs(network, com)
        _check_connected(network, com, arcs)
        per_k_arcs.append(arcs)

    col = 0
    x_cols: list[int] = []
    for k, arcs in enumerate(per_k_arcs):
        for a in arcs:
            x_index.append((k, a.id))
            x_cols.append(col)
            cols_c.append(a.transport_time)
            cols_c.append(M)
            col += 2
    for h in hubs:
        hub_col[h] = col
        cols_c.append(M)
        col += 1
    n_cols = col

    row = 0
    # flow conservation per commodity and touched node
    offset = 0
    for k, arcs in enumerate(per_k_arcs):
        com = commodities[k]
        base = x_cols[offset] if arcs else 0
        offset += len(arcs)
        node_row: dict[str, int] = {}
        for t, a in enumerate(arcs):
            for node in (a.tail, a.head):
                if node not in node_row:
                    node_row[node] = row
                    row += 1
                    supply = com.quantity if node == com.origin else (-com.quantity if node == com.destination else 0)
                    sense.append("=")
                    rhs.append(float(supply))
                    row_names.append(f"flow[{com.id},{node}]")
            add(node_row[a.tail], base + 2 * t, 1.0)
            add(node_row[a.head], base + 2 * t, -1.0)
    # hub throughput (inbound flow)
    hub_row = {}
    for h in hubs:
        hub_row[h] = row
        kind = network.hub_by_id[h].kind.value
        sense.append("<")
        rhs.append(float(params.initial_sort_limits[kind]))
        row_names.append(f"hub[{h}]")
        add(row, hub_col[h], -1.0)
        row += 1
    offset = 0
    for k, arcs in enumerate(per_k_arcs):
        for t, a in enumerate(arcs):
            j = x_cols[offset + t]
            if a.head in hub_row:
                add(hub_row[a.head], j, 1.0)
        offset += len(arcs)
    # split penalty x - u <= gamma q_k
    offset = 0
    for k, arcs in enumerate(per_k_arcs):
        gq = params.gamma * commodities[k].quantity
        for t, a in enumerate(arcs):
            j = x_cols[offset + t]
            add(row, j, 1.0)
            add(row, j + 1, -1.0)
            sense.append("<")
            rhs.append(gq)
            row_names.append(f"split[{commodities[k].id},{a.id}]")
            row += 1
        offset += len(arcs)

    A = sp.csr_matrix((vals, (rows_i, rows_j)), shape=(row, n_cols))
    lp = LinearProgram(np.asarray(cols_c), A, np.asarray(sense), np.asarray(rhs),
                       np.zeros(n_cols), np.full(n_cols, np.inf), row_names=row_names)
    lp.meta.update(kind="mcmcnf", x_index=x_index, x_cols=x_cols, hub_cols=hub_col,
                   commodity_ids=[c.id for c in commodities], penalty=M)
    return lp


def arc_flows(lp: LinearProgram, result: LPResult) -> dict[str, float]:
    """Total flow per physical arc from an outline LP solution."""
    if result.status is not LPStatus.OPTIMAL:
        raise ModelBuildError(f"outline LP is {result.status.value}")
    flows: dict[str, float] = {}
    for (k, arc_id), j in zip(lp.meta["x_index"], lp.meta["x_cols"]):
        v = float(result.x[j])
        if v > 1e-9:
            flows[arc_id] = flows.get(arc_id, 0.0) + v
    return flows


def derive_capacities(flows: Mapping[str, float], network: Network, params: PlannerParams) -> CapacityPlan:
    """Size hubs and arcs from per-arc outline flows.

    Sorting capacity is ``ceil(rho * inbound throughput)``, crossdock capacity
    ``ceil(delta * sort / q)`` containers and departures
    ``ceil(rho * arc flow / vehicle parcels)``. Zero flow prunes the element.
    """
    throughput = {h.id: 0.0 for h in network.hubs}
    for arc_id, f in flows.items():
        head = network.arc_by_id[arc_id].head
        if head in throughput:
            throughput[head] += f
    sort_cap, xd_cap, deps = {}, {}, {}
    for h in network.hubs:
        t = round(throughput[h.id], 6)
        ls = ceil_product(params.rho, t) if t > 0 else 0
        sort_cap[h.id] = ls
        xd_cap[h.id] = math.ceil(Fraction(repr(float(params.delta))) * ls / params.container_size)
    for a in network.arcs:
        f = round(flows.get(a.id, 0.0), 6)
        if f <= 0:
            deps[a.id] = 0
        else:
            deps[a.id] = math.ceil(Fraction(repr(float(params.rho))) * Fraction(repr(f))
                                   / a.vehicle_capacity_parcels)
    return CapacityPlan(sort_cap, xd_cap, deps)


def plan_outline(network: Network, commodities: Sequence[Commodity], params: PlannerParams,
                 method: str = "auto") -> tuple[CapacityPlan, LPResult]:
    lp = build_mcmcnf(network, commodities, params)
    res = solve_lp(lp, method=method)
    return derive_capacities(arc_flows(lp, res), network, params), res


@dataclass
class RepairReport:
    hub_sort_added: dict[str, int]
    hub_xdock_added: dict[str, int]
    departures_added: dict[str, int]
    objective: int

    @property
    def unchanged(self) -> bool:
        return not (self.hub_sort_added or self.hub_xdock_added or self.departures_added)


def repair_capacities(network: Network, plan: CapacityPlan, commodities: Sequence[Commodity],
                      physical_paths: Mapping[str, Sequence], container_size: int,
                      solve_config=None) -> tuple[CapacityPlan, RepairReport]:
    """Raise capacities until a no-consolidation assignment exists.

    Solves the single-leg (fully sorted) path model with penalised slack on the
    crossdock, sorting and vehicle rows; every unit of slack used is added to
    the matching capacity. Arcs with no departures are priced as if one
    vehicle left per hour.
    """
    from .model import build_baseline_ip
    from .pathgen import ContainerArcRegistry
    from .solver.bnb import SolveConfig, solve_ip

    registry = ContainerArcRegistry(network)
    model = build_baseline_ip(network, plan, commodities, physical_paths, registry, container_size, slack=True)
    cfg = solve_config or SolveConfig()
    sol, _ = solve_ip(model, cfg)
    if sol is None:
        raise RuntimeError("capacity repair model has no solution despite slack columns")
    new = plan.copy()
    sort_add, xd_add, dep_add = {}, {}, {}
    for (kind, key), amount in sol.slack.items():
        if amount <= 0:
            continue
        if kind == "sort":
            sort_add[key] = int(amount)
            new.sort_capacity[key] += int(amount)
        elif kind == "xdock":
            xd_add[key] = int(amount)
            new.crossdock_capacity[key] += int(amount)
        else:
            arc = network.arc_by_id[key]
            Q = arc.vehicle_capacity_containers(container_size)
            extra = -(-int(amount) // Q)
            dep_add[key] = extra
            new.departures[key] += extra
    return new, RepairReport(sort_add, xd_add, dep_add, sol.objective)
