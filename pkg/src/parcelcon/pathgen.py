"""Restricted physical path enumeration and container-path expansion.

All times here are integer deciminutes (tenths of a minute); ``to_dm`` rounds a
minute value half-up to that grid.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .demand import Commodity
from .network import Network

if TYPE_CHECKING:
    from .capacity import CapacityPlan

IDLE_WAIT_DM = 300  # wait for an arc with no planned departures, priced as one vehicle per hour


class PathError(ValueError):
    pass


class InfeasibleCommodityError(PathError):
    def __init__(self, commodity_id: str, promise, best_dm: int | None = None):
        self.commodity_id = commodity_id
        msg = f"commodity {commodity_id}: no path meets promise {promise} min"
        if best_dm is not None:
            msg += f" (fastest {best_dm / 10:.1f} min)"
        super().__init__(msg)


@lru_cache(maxsize=65536)
def to_dm(minutes: float) -> int:
    """Minutes to deciminutes, rounding halves up on the exact decimal value."""
    return math.floor(Fraction(repr(float(minutes))) * 10 + Fraction(1, 2))


@dataclass(frozen=True)
class PhysicalPath:
    commodity_id: str
    nodes: tuple[str, ...]
    arcs: tuple[str, ...]
    length: int  # transport + wait, deciminutes

    @property
    def legs(self) -> int:
        return len(self.arcs)

    @property
    def intermediate(self) -> tuple[str, ...]:
        return self.nodes[1:-1]

    def to_dict(self) -> dict:
        return {"commodity": self.commodity_id, "nodes": list(self.nodes), "arcs": list(self.arcs),
                "length_dm": self.length}


@dataclass(frozen=True)
class ContainerArc:
    id: str
    hub_seq: tuple[str, ...]
    physical_arcs: tuple[str, ...]

    @property
    def tail(self) -> str:
        return self.hub_seq[0]

    @property
    def head(self) -> str:
        return self.hub_seq[-1]

    @property
    def crossdock_hubs(self) -> tuple[str, ...]:
        return self.hub_seq[1:-1]

    def to_dict(self) -> dict:
        return {"id": self.id, "hub_seq": list(self.hub_seq), "physical_arcs": list(self.physical_arcs)}


@dataclass(frozen=True)
class TransitTime:
    transport: int
    wait: int
    sort: int
    crossdock: int

    @property
    def total(self) -> int:
        return self.transport + self.wait + self.sort + self.crossdock

    @property
    def minutes(self) -> float:
        return self.total / 10

    def to_dict(self) -> dict:
        return {"transport": self.transport / 10, "wait": self.wait / 10,
                "sort": self.sort / 10, "crossdock": self.crossdock / 10}


@dataclass(frozen=True)
class ContainerizedPath:
    physical: PhysicalPath
    bounds: tuple[int, ...]  # indices into physical.nodes where containers are (re)loaded
    container_arcs: tuple[str, ...]
    time: TransitTime

    @property
    def commodity_id(self) -> str:
        return self.physical.commodity_id

    @property
    def sort_hubs(self) -> tuple[str, ...]:
        return tuple(self.physical.nodes[i] for i in self.bounds[1:-1])

    @property
    def crossdock_hubs(self) -> tuple[str, ...]:
        cut = set(self.bounds)
        return tuple(n for i, n in enumerate(self.physical.nodes) if 0 < i < len(self.physical.nodes) - 1
                     and i not in cut)

    @property
    def T_p(self) -> int:
        return self.time.total

    @property
    def fully_sorted(self) -> bool:
        return len(self.bounds) == len(self.physical.nodes)

    def to_dict(self) -> dict:
        return {"nodes": list(self.physical.nodes), "container_arcs": list(self.container_arcs),
                "T_p": self.time.minutes, "decomposition": self.time.to_dict()}


class ContainerArcRegistry:
    """Global container-arc table, deduplicated by hub sequence, ids in first-registration order."""

    def __init__(self, network: Network):
        self.network = network
        self._by_seq: dict[tuple[str, ...], ContainerArc] = {}
        self._arcs: list[ContainerArc] = []

    def register(self, hub_seq: Sequence[str]) -> ContainerArc:
        seq = tuple(hub_seq)
        arc = self._by_seq.get(seq)
        if arc is None:
            between = self.network.arc_between
            phys = tuple(between[(u, v)].id for u, v in zip(seq, seq[1:]))
            arc = ContainerArc(f"c{len(self._arcs):06d}", seq, phys)
            self._by_seq[seq] = arc
            self._arcs.append(arc)
        return arc

    def __len__(self) -> int:
        return len(self._arcs)

    def __iter__(self):
        return iter(self._arcs)

    def __getitem__(self, arc_id: str) -> ContainerArc:
        return self._arcs[int(arc_id[1:])]

    def to_list(self) -> list[dict]:
        return [a.to_dict() for a in self._arcs]

    @classmethod
    def from_list(cls, network: Network, items: Iterable[Mapping]) -> "ContainerArcRegistry":
        reg = cls(network)
        for it in items:
            arc = reg.register(it["hub_seq"])
            if arc.id != it["id"]:
                raise ValueError(f"container arc ids out of order at {it['id']}")
        return reg


def _arc_usable(plan, arc_id) -> bool:
    return plan is None or plan.arc_active(arc_id)


def _arc_len(network: Network, plan, arc_id: str) -> int:
    t = to_dm(network.arc_by_id[arc_id].transport_time)
    return t if plan is None else t + plan.wait_dm(arc_id)


def enumerate_physical_paths(network: Network, commodity: Commodity, plan: "CapacityPlan | None" = None,
                             max_intermediate: int = 7, max_deviation: float = 0.05,
                             max_paths: int = 20) -> list[PhysicalPath]:
    """Simple origin-destination paths through hubs, shortest first.

    Best-first search keyed on (length, node sequence) with an exact
    reverse-Dijkstra heuristic, so paths emerge in (length, lexicographic)
    order. Only hubs may be intermediate nodes; with a plan, pruned hubs and
    arcs are skipped and wait times count towards length.
    """
    if max_intermediate < 0 or max_paths < 1 or max_deviation < 0:
        raise ValueError("invalid path-restriction parameters")
    o, d = commodity.origin, commodity.destination
    if o == d:
        raise PathError(f"commodity {commodity.id}: origin equals destination")

    def transit_ok(n: str) -> bool:
        return network.is_hub(n) and (plan is None or plan.hub_active(n))

    lengths = {a.id: _arc_len(network, plan, a.id) for a in network.arcs if _arc_usable(plan, a.id)}
    # reverse Dijkstra from the destination over transit-eligible nodes
    dist = {d: 0}
    heap = [(0, d)]
    while heap:
        g, v = heapq.heappop(heap)
        if g > dist.get(v, math.inf):
            continue
        if v != d and v == o:
            continue
        for a in network.in_arcs[v]:
            if a.id not in lengths:
                continue
            u = a.tail
            if u != o and not transit_ok(u):
                continue
            ng = g + lengths[a.id]
            if ng < dist.get(u, math.inf):
                dist[u] = ng
                heapq.heappush(heap, (ng, u))
    if o not in dist:
        raise PathError(f"commodity {commodity.id}: {d} unreachable from {o}")

    dev = Fraction(repr(float(max_deviation)))
    limit = None
    out: list[PhysicalPath] = []
    frontier = [(dist[o], (o,), (), 0)]
    while frontier and len(out) < max_paths:
        f, nodes, arcs, g = heapq.heappop(frontier)
        if limit is not None and f > limit:
            break
        last = nodes[-1]
        if last == d:
            if limit is None:
                limit = math.floor(g * (1 + dev))
            out.append(PhysicalPath(commodity.id, nodes, arcs, g))
            continue
        for a in network.out_arcs[last]:
            h = a.head
            if a.id not in lengths or h in nodes or h not in dist:
                continue
            if h != d:
                if not transit_ok(h) or len(nodes) > max_intermediate:
                    continue
            ng = g + lengths[a.id]
            nf = ng + dist[h]
            if limit is not None and nf > limit:
                continue
            heapq.heappush(frontier, (nf, nodes + (h,), arcs + (a.id,), ng))
    if not out:
        raise PathError(f"commodity {commodity.id}: no path with at most {max_intermediate} intermediate hubs")
    return out


def expand(S: int, K: int) -> tuple[list[tuple[int, ...]], list[tuple[int, int]]]:
    """Container-path expansion over leg indices 0..S.

    From index ``i`` a container may run to any ``j`` in ``i+1 .. min(i+K+1, S)``,
    crossdocking at the hubs in between. Returns the boundary tuples of every
    complete expansion and the (i, j) segments in emission order, deduplicated.
    """
    if K < 0 or S < 1:
        raise ValueError("need S >= 1 and K >= 0")
    paths: list[tuple[int, ...]] = []
    segs: dict[tuple[int, int], None] = {}

    def rec(i: int, prefix: tuple[int, ...]):
        for j in range(i + 1, min(i + K + 1, S) + 1):
            segs.setdefault((i, j), None)
            if j == S:
                paths.append(prefix + (j,))
            else:
                rec(j, prefix + (j,))

    rec(0, (0,))
    return paths, list(segs)


def generate_container_paths(p: PhysicalPath, K: int) -> tuple[list[tuple[int, ...]], list[tuple[str, ...]]]:
    """Boundary tuples of every container path of ``p`` and the hub sequences of their container arcs."""
    bounds, segs = expand(p.legs, K)
    return bounds, [p.nodes[i:j + 1] for i, j in segs]


def transit_time(p: PhysicalPath, bounds: Sequence[int], network: Network, plan: "CapacityPlan",
                 allow_idle: bool = False) -> TransitTime:
    transport = wait = 0
    for a in p.arcs:
        transport += to_dm(network.arc_by_id[a].transport_time)
        if plan.arc_active(a):
            wait += plan.wait_dm(a)
        elif allow_idle:
            wait += IDLE_WAIT_DM
        else:
            raise PathError(f"arc {a} on path of {p.commodity_id} has no departures")
    cut = set(bounds)
    sort = xd = 0
    for i in range(1, len(p.nodes) - 1):
        hub = network.hub_by_id[p.nodes[i]]
        if i in cut:
            sort += to_dm(hub.sort_time)
        else:
            xd += to_dm(hub.crossdock_time)
    return TransitTime(transport, wait, sort, xd)


def containerize(p: PhysicalPath, bounds: Sequence[int], network: Network, plan: "CapacityPlan",
                 registry: ContainerArcRegistry, allow_idle: bool = False) -> ContainerizedPath:
    bounds = tuple(bounds)
    if bounds[0] != 0 or bounds[-1] != p.legs or list(bounds) != sorted(set(bounds)):
        raise ValueError(f"bad container boundaries {bounds} for a {p.legs}-leg path")
    ids = tuple(registry.register(p.nodes[i:j + 1]).id for i, j in zip(bounds, bounds[1:]))
    return ContainerizedPath(p, bounds, ids, transit_time(p, bounds, network, plan, allow_idle))


def build_path_set(network: Network, plan: "CapacityPlan", commodity: Commodity,
                   physical: Sequence[PhysicalPath], registry: ContainerArcRegistry, K: int,
                   feasible_only: bool = True) -> list[ContainerizedPath]:
    """All container variants of the given physical paths, optionally filtered by the promise."""
    out = []
    for p in physical:
        bounds, _ = expand(p.legs, K)
        times = [(b, transit_time(p, b, network, plan)) for b in bounds]
        for b, t in times:
            if feasible_only and commodity.service_promise is not None and t.total > 10 * commodity.service_promise:
                continue
            out.append(containerize(p, b, network, plan, registry))
    if feasible_only and not out:
        raise InfeasibleCommodityError(commodity.id, commodity.service_promise)
    return out


def filter_feasible(paths: Sequence[ContainerizedPath], commodity: Commodity) -> list[ContainerizedPath]:
    if commodity.service_promise is None:
        raise PathError(f"commodity {commodity.id} has no service promise")
    limit = 10 * commodity.service_promise
    kept = [cp for cp in paths if cp.T_p <= limit]
    if not kept:
        best = min((cp.T_p for cp in paths), default=None)
        raise InfeasibleCommodityError(commodity.id, commodity.service_promise, best)
    return kept


def min_doable(network: Network, plan: "CapacityPlan", commodity: Commodity, max_intermediate: int = 7,
               shortest: PhysicalPath | None = None) -> int:
    """Fully-sorted transit time of the shortest physical path, in deciminutes."""
    if shortest is None:
        found = enumerate_physical_paths(network, commodity, plan, max_intermediate, 0.0, 1)
        shortest = found[0]
    return transit_time(shortest, tuple(range(shortest.legs + 1)), network, plan).total
