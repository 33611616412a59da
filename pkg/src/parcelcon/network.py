"""Synthetic multi-tier grid city: hubs, unit zones and physical arcs.

Coordinates are kilometres with x growing east and y growing north. The city
occupies ``[0, L]^2`` with ``L = zones_per_side * zone_size_km``; four regional
hubs sit at the corners of the embedding square around it.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

TIERS = ("UZ", "AH", "LH", "GH", "RH")
_TIER_RANK = {t: r for r, t in enumerate(TIERS)}

# lower-tier endpoint -> (speed 0-10 km, 10-20 km, >20 km in km/h, vehicle capacity in parcels)
MOVERS = {
    "UZ": (12.0, 12.0, 12.0, 60),
    "AH": (20.0, 30.0, 45.0, 300),
    "LH": (30.0, 40.0, 55.0, 1000),
    "GH": (50.0, 60.0, 65.0, 3500),
    "RH": (70.0, 80.0, 100.0, 3500),
}

ARC_KINDS = tuple(
    f"{lo}:{hi}"
    for lo in TIERS
    for hi in TIERS
    if _TIER_RANK[hi] >= _TIER_RANK[lo] and hi != "UZ"
)


class LinkStructure(str, enum.Enum):
    HS = "HS"
    HC1 = "HC1"
    HC2 = "HC2"


class HubStructure(str, enum.Enum):
    DEFAULT = "Default"
    NO_LH = "noLH"
    NO_GH = "noGH"


class HubKind(str, enum.Enum):
    ACCESS = "AH"
    LOCAL = "LH"
    GATEWAY = "GH"
    REGIONAL = "RH"


@dataclass(frozen=True)
class GridSpec:
    zones_per_side: int = 16
    zone_size_km: float = 2.0
    zones_per_cell_side: int = 4
    cells_per_area_side: int = 2
    embedding_factor: int = 3

    def __post_init__(self):
        for name in ("zones_per_side", "zones_per_cell_side", "cells_per_area_side", "embedding_factor"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"GridSpec.{name} must be >= 1")
        if self.zone_size_km <= 0:
            raise ValueError("GridSpec.zone_size_km must be positive")
        if self.zones_per_side % self.area_side_zones:
            raise ValueError(
                f"zones_per_side={self.zones_per_side} is not divisible by "
                f"zones_per_cell_side*cells_per_area_side={self.area_side_zones}"
            )

    @property
    def area_side_zones(self) -> int:
        return self.zones_per_cell_side * self.cells_per_area_side

    @property
    def cells_per_side(self) -> int:
        return self.zones_per_side // self.zones_per_cell_side

    @property
    def areas_per_side(self) -> int:
        return self.zones_per_side // self.area_side_zones

    @property
    def city_side_km(self) -> float:
        return self.zones_per_side * self.zone_size_km

    def to_dict(self) -> dict:
        return {
            "zones_per_side": self.zones_per_side,
            "zone_size_km": self.zone_size_km,
            "zones_per_cell_side": self.zones_per_cell_side,
            "cells_per_area_side": self.cells_per_area_side,
            "embedding_factor": self.embedding_factor,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GridSpec":
        return cls(**d)


@dataclass(frozen=True)
class HubTimes:
    """Per-kind handling times in minutes; crossdock time is ``sort * crossdock_ratio``."""

    sort: Mapping[str, float] = field(
        default_factory=lambda: {"AH": 8.0, "LH": 16.0, "GH": 24.0, "RH": 24.0}
    )
    crossdock_ratio: float = 0.25

    def sort_time(self, kind: str) -> float:
        return float(self.sort[kind])

    def crossdock_time(self, kind: str) -> float:
        return float(self.sort[kind]) * self.crossdock_ratio

    def to_dict(self) -> dict:
        return {"sort": {k: float(self.sort[k]) for k in ("AH", "LH", "GH", "RH")},
                "crossdock_ratio": self.crossdock_ratio}

    @classmethod
    def from_dict(cls, d: Mapping) -> "HubTimes":
        return cls(sort=dict(d["sort"]), crossdock_ratio=d["crossdock_ratio"])


@dataclass(frozen=True)
class Hub:
    id: str
    kind: HubKind
    x: float
    y: float
    sort_time: float
    crossdock_time: float

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind.value, "x": self.x, "y": self.y,
                "sort_time": self.sort_time, "crossdock_time": self.crossdock_time}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Hub":
        return cls(d["id"], HubKind(d["kind"]), d["x"], d["y"], d["sort_time"], d["crossdock_time"])


@dataclass(frozen=True)
class Zone:
    """A unit zone; ``adl`` is its quadrant (1=NW, 2=NE, 3=SW, 4=SE)."""

    id: str
    i: int
    j: int
    x: float
    y: float
    adl: int

    def to_dict(self) -> dict:
        return {"id": self.id, "i": self.i, "j": self.j, "x": self.x, "y": self.y, "adl": self.adl}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Zone":
        return cls(d["id"], d["i"], d["j"], d["x"], d["y"], d["adl"])


@dataclass(frozen=True)
class PhysicalArc:
    id: str
    tail: str
    head: str
    kind: str
    distance_km: float
    transport_time: float
    vehicle_capacity_parcels: int

    def vehicle_capacity_containers(self, container_size: int) -> int:
        return self.vehicle_capacity_parcels // container_size

    def to_dict(self) -> dict:
        return {"id": self.id, "tail": self.tail, "head": self.head, "kind": self.kind,
                "distance_km": self.distance_km, "transport_time": self.transport_time,
                "vehicle_capacity_parcels": self.vehicle_capacity_parcels}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PhysicalArc":
        return cls(d["id"], d["tail"], d["head"], d["kind"], d["distance_km"],
                   d["transport_time"], d["vehicle_capacity_parcels"])


@dataclass(frozen=True)
class Network:
    grid: GridSpec
    link_structure: LinkStructure
    hub_structure: HubStructure
    hubs: tuple[Hub, ...]
    zones: tuple[Zone, ...]
    arcs: tuple[PhysicalArc, ...]

    @property
    def name(self) -> str:
        return f"{self.link_structure.value}-{self.hub_structure.value}"

    @cached_property
    def hub_by_id(self) -> dict[str, Hub]:
        return {h.id: h for h in self.hubs}

    @cached_property
    def zone_by_id(self) -> dict[str, Zone]:
        return {z.id: z for z in self.zones}

    @cached_property
    def arc_by_id(self) -> dict[str, PhysicalArc]:
        return {a.id: a for a in self.arcs}

    @cached_property
    def arc_between(self) -> dict[tuple[str, str], PhysicalArc]:
        return {(a.tail, a.head): a for a in self.arcs}

    @cached_property
    def out_arcs(self) -> dict[str, list[PhysicalArc]]:
        out: dict[str, list[PhysicalArc]] = {n: [] for n in self.node_ids}
        for a in self.arcs:
            out[a.tail].append(a)
        return out

    @cached_property
    def in_arcs(self) -> dict[str, list[PhysicalArc]]:
        inc: dict[str, list[PhysicalArc]] = {n: [] for n in self.node_ids}
        for a in self.arcs:
            inc[a.head].append(a)
        return inc

    @cached_property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(z.id for z in self.zones) + tuple(h.id for h in self.hubs)

    def is_hub(self, node_id: str) -> bool:
        return node_id in self.hub_by_id

    def hubs_of_kind(self, kind: HubKind) -> list[Hub]:
        return [h for h in self.hubs if h.kind is kind]

    def regional_hubs(self) -> list[Hub]:
        return self.hubs_of_kind(HubKind.REGIONAL)

    def position(self, node_id: str) -> tuple[float, float]:
        if node_id in self.hub_by_id:
            h = self.hub_by_id[node_id]
            return h.x, h.y
        z = self.zone_by_id[node_id]
        return z.x, z.y

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "structure": {"links": self.link_structure.value, "hubs": self.hub_structure.value},
            "hubs": [h.to_dict() for h in self.hubs],
            "zones": [z.to_dict() for z in self.zones],
            "arcs": [a.to_dict() for a in self.arcs],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Network":
        return cls(
            grid=GridSpec.from_dict(d["grid"]),
            link_structure=LinkStructure(d["structure"]["links"]),
            hub_structure=HubStructure(d["structure"]["hubs"]),
            hubs=tuple(Hub.from_dict(h) for h in d["hubs"]),
            zones=tuple(Zone.from_dict(z) for z in d["zones"]),
            arcs=tuple(PhysicalArc.from_dict(a) for a in d["arcs"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def rectilinear_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def normalize_arc_kind(kind: str) -> str:
    parts = kind.split(":")
    if len(parts) != 2 or any(p not in _TIER_RANK for p in parts):
        raise ValueError(f"unknown arc kind {kind!r}")
    lo, hi = sorted(parts, key=_TIER_RANK.__getitem__)
    norm = f"{lo}:{hi}"
    if norm not in ARC_KINDS:
        raise ValueError(f"unknown arc kind {kind!r}")
    return norm


def speed_kmh(arc_kind: str, distance_km: float) -> float:
    lo = normalize_arc_kind(arc_kind).split(":")[0]
    bands = MOVERS[lo]
    if distance_km <= 10.0:
        return bands[0]
    if distance_km <= 20.0:
        return bands[1]
    return bands[2]


def travel_time(arc_kind: str, distance_km: float) -> float:
    """Transport time in minutes for ``distance_km`` on an arc of the given kind."""
    if distance_km <= 0:
        raise ValueError("distance must be positive")
    return 60.0 * distance_km / speed_kmh(arc_kind, distance_km)


def _mean_abs_offset(lo: float, hi: float, a: float) -> float:
    # E|U - a| for U ~ Uniform[lo, hi]
    if a <= lo:
        return (lo + hi) / 2.0 - a
    if a >= hi:
        return a - (lo + hi) / 2.0
    return ((a - lo) ** 2 + (hi - a) ** 2) / (2.0 * (hi - lo))


def _r6(v: float) -> float:
    return round(float(v), 6) + 0.0


class _Builder:
    def __init__(self, grid: GridSpec, links: LinkStructure, hubs: HubStructure, times: HubTimes):
        self.grid = grid
        self.links = links
        self.hub_structure = hubs
        self.times = times
        self.s = float(grid.zone_size_km)
        self.hubs: dict[str, Hub] = {}
        # HS keys hubs by zone/cell/area index, HC by integer grid coordinates
        self.lattice: dict[str, dict[tuple[int, int], str]] = {"AH": {}, "LH": {}, "GH": {}}
        self.edges: set[tuple[str, str]] = set()

    def add_hub(self, kind: HubKind, key: tuple[int, int], gx: float, gy: float) -> str:
        hid = f"{kind.value}_{key[0]:03d}_{key[1]:03d}"
        self.hubs[hid] = Hub(hid, kind, _r6(gx * self.s), _r6(gy * self.s),
                             self.times.sort_time(kind.value), self.times.crossdock_time(kind.value))
        self.lattice[kind.value][key] = hid
        return hid

    def link(self, u: str, v: str) -> None:
        if u != v:
            self.edges.add((u, v))
            self.edges.add((v, u))

    def build(self) -> Network:
        g = self.grid
        n = g.zones_per_side
        zpc = g.zones_per_cell_side
        A = g.area_side_zones
        has_lh = self.hub_structure is not HubStructure.NO_LH
        has_gh = self.hub_structure is not HubStructure.NO_GH
        hs = self.links is LinkStructure.HS

        zones = []
        half = n / 2.0
        for j in range(n):
            for i in range(n):
                north = j >= half
                east = i >= half
                adl = (1 if not east else 2) if north else (3 if not east else 4)
                zones.append(Zone(f"UZ_{i:03d}_{j:03d}", i, j, _r6((i + 0.5) * self.s),
                                  _r6((j + 0.5) * self.s), adl))

        # hub placement (grid units)
        if hs:
            for j in range(n):
                for i in range(n):
                    self.add_hub(HubKind.ACCESS, (i, j), i + 0.5, j + 0.5)
            nc = g.cells_per_side
            if has_lh:
                for cj in range(nc):
                    for ci in range(nc):
                        self.add_hub(HubKind.LOCAL, (ci, cj), (ci + 0.5) * zpc, (cj + 0.5) * zpc)
            if has_gh:
                for aj in range(g.areas_per_side):
                    for ai in range(g.areas_per_side):
                        self.add_hub(HubKind.GATEWAY, (ai, aj), (ai + 0.5) * A, (aj + 0.5) * A)
        else:
            if self.links is LinkStructure.HC1:
                for j in range(n + 1):
                    for i in range(n + 1):
                        self.add_hub(HubKind.ACCESS, (i, j), i, j)
            else:
                if n % 2:
                    raise ValueError("HC2 needs an even zones_per_side (2x2 zone blocks)")
                for bj in range(n // 2):
                    for bi in range(n // 2):
                        self.add_hub(HubKind.ACCESS, (2 * bi + 1, 2 * bj + 1), 2 * bi + 1, 2 * bj + 1)
            nc = g.cells_per_side
            if has_lh:
                for cj in range(nc + 1):
                    for ci in range(nc + 1):
                        self.add_hub(HubKind.LOCAL, (ci * zpc, cj * zpc), ci * zpc, cj * zpc)
            if has_gh:
                na = g.areas_per_side
                for aj in range(na + 1):
                    for ai in range(na + 1):
                        self.add_hub(HubKind.GATEWAY, (ai * A, aj * A), ai * A, aj * A)

        L = g.city_side_km
        pad = L * (g.embedding_factor - 1) / 2.0
        lo, hi = -pad, L + pad
        for name, (x, y) in (("NE", (hi, hi)), ("NW", (lo, hi)), ("SE", (hi, lo)), ("SW", (lo, lo))):
            hid = f"RH_{name}"
            self.hubs[hid] = Hub(hid, HubKind.REGIONAL, _r6(x), _r6(y),
                                 self.times.sort_time("RH"), self.times.crossdock_time("RH"))
        rhs = sorted(h for h in self.hubs if h.startswith("RH_"))

        ah = self.lattice["AH"]
        lh = self.lattice["LH"]
        gh = self.lattice["GH"]

        # unit zone <-> access hub
        for z in zones:
            if hs:
                self.link(z.id, ah[(z.i, z.j)])
            elif self.links is LinkStructure.HC1:
                for di in (0, 1):
                    for dj in (0, 1):
                        self.link(z.id, ah[(z.i + di, z.j + dj)])
            else:
                self.link(z.id, ah[(2 * (z.i // 2) + 1, 2 * (z.j // 2) + 1)])

        if hs:
            self._hs_links(ah, lh, gh, rhs, has_lh, has_gh)
        else:
            self._hc_links(ah, lh, gh, rhs, has_lh, has_gh)

        for i, u in enumerate(rhs):
            for v in rhs[i + 1:]:
                self.link(u, v)

        zone_by_id = {z.id: z for z in zones}
        arcs = []
        for idx, (u, v) in enumerate(sorted(self.edges)):
            arcs.append(self._arc(idx, u, v, zone_by_id))
        hubs = tuple(sorted(self.hubs.values(), key=lambda h: (_TIER_RANK[h.kind.value], h.id)))
        return Network(g, self.links, self.hub_structure, hubs, tuple(zones), tuple(arcs))

    def _hs_links(self, ah, lh, gh, rhs, has_lh, has_gh):
        g = self.grid
        zpc = g.zones_per_cell_side
        A = g.area_side_zones
        for (i, j), a in ah.items():
            if has_lh:
                self.link(a, lh[(i // zpc, j // zpc)])
            else:
                self.link(a, gh[(i // A, j // A)])
        if has_lh and has_gh:
            cpa = g.cells_per_area_side
            for (ci, cj), l in lh.items():
                self.link(l, gh[(ci // cpa, cj // cpa)])
        top = sorted(gh.values()) if has_gh else sorted(lh.values())
        for i, u in enumerate(top):
            for v in top[i + 1:]:
                self.link(u, v)
            for r in rhs:
                self.link(u, r)

    def _hc_links(self, ah, lh, gh, rhs, has_lh, has_gh):
        g = self.grid
        zpc = g.zones_per_cell_side
        A = g.area_side_zones
        nc = g.cells_per_side
        na = g.areas_per_side

        def containing(p: float, size: int, count: int) -> range:
            # indices of closed intervals [k*size, (k+1)*size] that contain p
            first = max(0, int(-(-p // size)) - 1)
            last = min(count - 1, int(p // size))
            return range(first, last + 1)

        def common_block(p, q, size, count):
            ri = set(containing(p[0], size, count)) & set(containing(q[0], size, count))
            rj = set(containing(p[1], size, count)) & set(containing(q[1], size, count))
            return bool(ri) and bool(rj)

        def lattice_adjacent(lat: dict, size: int, count: int):
            pts = sorted(lat)
            steps = sorted({abs(p[0] - q[0]) for p in pts for q in pts if p[0] != q[0]})
            step = steps[0] if steps else 1
            for (i, j) in pts:
                for nb in ((i + step, j), (i, j + step)):
                    if nb in lat and common_block((i, j), nb, size, count):
                        self.link(lat[(i, j)], lat[nb])

        def corner_hubs(cell_i: int, cell_j: int, size: int, lat: dict):
            return [lat[(cell_i * size + di * size, cell_j * size + dj * size)]
                    for di in (0, 1) for dj in (0, 1)]

        lattice_adjacent(ah, zpc, nc)
        upper_of_ah = (lh, zpc, nc) if has_lh else (gh, A, na)
        lat, size, count = upper_of_ah
        for (i, j), a in ah.items():
            for ci in containing(i, size, count):
                for cj in containing(j, size, count):
                    for u in corner_hubs(ci, cj, size, lat):
                        self.link(a, u)
        if has_lh:
            lattice_adjacent(lh, A, na)
        if has_lh and has_gh:
            for (i, j), l in lh.items():
                for ai in containing(i, A, na):
                    for aj in containing(j, A, na):
                        for u in corner_hubs(ai, aj, A, gh):
                            self.link(l, u)
        if has_gh:
            lattice_adjacent(gh, A * na, 1)
        top = gh if has_gh else lh
        for u in sorted(top.values()):
            for r in rhs:
                self.link(u, r)

    def _arc(self, idx: int, u: str, v: str, zone_by_id: dict) -> PhysicalArc:
        tu, tv = u[:2], v[:2]
        kind = normalize_arc_kind(f"{tu}:{tv}")
        if tu == "UZ" or tv == "UZ":
            z = zone_by_id[u if tu == "UZ" else v]
            h = self.hubs[v if tu == "UZ" else u]
            zx, zy = z.i * self.s, z.j * self.s
            dist = _mean_abs_offset(zx, zx + self.s, h.x) + _mean_abs_offset(zy, zy + self.s, h.y)
        else:
            hu, hv = self.hubs[u], self.hubs[v]
            dist = max(rectilinear_distance((hu.x, hu.y), (hv.x, hv.y)), self.s / 2.0)
        dist = _r6(dist)
        cap = MOVERS[kind.split(":")[0]][3]
        return PhysicalArc(f"a{idx:05d}", u, v, kind, dist, travel_time(kind, dist), cap)


def build_network(
    grid: GridSpec | None = None,
    link_structure: LinkStructure | str = LinkStructure.HS,
    hub_structure: HubStructure | str = HubStructure.DEFAULT,
    hub_times: HubTimes | None = None,
) -> Network:
    """Build one of the nine grid structures (3 link structures x 3 hub structures)."""
    return _Builder(
        grid or GridSpec(),
        LinkStructure(link_structure),
        HubStructure(hub_structure),
        hub_times or HubTimes(),
    ).build()


def all_structures() -> Iterable[tuple[LinkStructure, HubStructure]]:
    for hs in HubStructure:
        for ls in LinkStructure:
            yield ls, hs
