"""Commodity generation over eight aggregate demand locations (ADLs).

ADL1-4 are the city quadrants (NW, NE, SW, SE) and ADL5-8 the regional hubs
(NW, NE, SW, SE). Intercity commodities start or end at a regional hub; the
city side is always a unit zone.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .network import Network

CITY_ADLS = (1, 2, 3, 4)
REGIONAL_ADLS = (5, 6, 7, 8)
_RH_OF_ADL = {5: "RH_NW", 6: "RH_NE", 7: "RH_SW", 8: "RH_SE"}


class Category(str, enum.Enum):
    INTRACITY = "Intracity"
    INTER_INBOUND = "InterInbound"
    INTER_OUTBOUND = "InterOutbound"


ELIGIBLE = {
    Category.INTRACITY: (CITY_ADLS, CITY_ADLS),
    Category.INTER_INBOUND: (REGIONAL_ADLS, CITY_ADLS),
    Category.INTER_OUTBOUND: (CITY_ADLS, REGIONAL_ADLS),
}


class PatternKind(str, enum.Enum):
    UNIFORM = "uniform"
    CENTRIC = "centric"
    BIPOLAR = "bipolar"


class SizeShape(str, enum.Enum):
    WIDE = "wide"
    NARROW = "narrow"


class InfeasibleDemandError(ValueError):
    def __init__(self, commodity_ids: Sequence[str], loosest: float):
        self.commodity_ids = list(commodity_ids)
        super().__init__(
            f"{len(self.commodity_ids)} commodities cannot meet the loosest promise "
            f"({loosest:g} min): {', '.join(self.commodity_ids)}"
        )


@dataclass(frozen=True)
class Commodity:
    id: str
    origin: str
    destination: str
    quantity: int
    category: Category
    service_promise: float | None = None

    def __post_init__(self):
        if self.origin == self.destination:
            raise ValueError(f"commodity {self.id}: origin equals destination")
        if self.quantity < 1:
            raise ValueError(f"commodity {self.id}: quantity must be >= 1")

    def to_dict(self) -> dict:
        return {"id": self.id, "origin": self.origin, "destination": self.destination,
                "quantity": self.quantity, "category": self.category.value,
                "service_promise_min": self.service_promise}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Commodity":
        return cls(d["id"], d["origin"], d["destination"], int(d["quantity"]),
                   Category(d["category"]), d.get("service_promise_min"))


@dataclass(frozen=True)
class DemandPattern:
    category_fractions: Mapping[Category, float]
    pickup_probs: Mapping[Category, Mapping[int, float]]
    delivery_probs: Mapping[Category, Mapping[int, float]]
    name: str = "custom"

    def __post_init__(self):
        if abs(sum(self.category_fractions.values()) - 1.0) > 1e-9:
            raise ValueError("category fractions must sum to 1")
        for cat in self.category_fractions:
            pick_ok, drop_ok = ELIGIBLE[cat]
            for probs, ok, what in ((self.pickup_probs[cat], pick_ok, "pickup"),
                                    (self.delivery_probs[cat], drop_ok, "delivery")):
                if any(p != 0 and adl not in ok for adl, p in probs.items()):
                    raise ValueError(f"{cat.value}: {what} probability on a non-eligible ADL")
                if abs(sum(probs.values()) - 1.0) > 1e-9:
                    raise ValueError(f"{cat.value}: {what} probabilities must sum to 1")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "category_fractions": {c.value: f for c, f in self.category_fractions.items()},
            "pickup_probs": {c.value: {str(k): v for k, v in p.items()} for c, p in self.pickup_probs.items()},
            "delivery_probs": {c.value: {str(k): v for k, v in p.items()} for c, p in self.delivery_probs.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DemandPattern":
        def probs(m):
            return {Category(c): {int(k): v for k, v in p.items()} for c, p in m.items()}

        return cls({Category(c): f for c, f in d["category_fractions"].items()},
                   probs(d["pickup_probs"]), probs(d["delivery_probs"]), d.get("name", "custom"))


@dataclass(frozen=True)
class SizeDistribution:
    mean: float
    shape: SizeShape = SizeShape.WIDE

    @property
    def params(self) -> tuple[float, float, float]:
        """(min, mode, max) of the triangular law."""
        m = float(self.mean)
        if self.shape is SizeShape.WIDE:
            return 1.0, m, 2.0 * m
        return 0.5 * m, m, 1.5 * m

    @property
    def analytic_mean(self) -> float:
        return sum(self.params) / 3.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        lo, mode, hi = self.params
        if not lo <= mode <= hi or lo >= hi:
            raise ValueError(f"degenerate triangular parameters {self.params}")
        draws = rng.triangular(lo, mode, hi, size=size)
        return np.maximum(np.floor(draws + 0.5), 1).astype(np.int64)


def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def builtin_pattern(kind: PatternKind | str, category_fractions: Mapping[Category, float] | None = None) -> DemandPattern:
    kind = PatternKind(kind)
    if category_fractions is None:
        category_fractions = {c: 1.0 / 3.0 for c in Category}
    hi, lo = 0.79, 0.07
    if kind is PatternKind.UNIFORM:
        pick = {a: 0.25 for a in CITY_ADLS}
        drop = dict(pick)
    elif kind is PatternKind.CENTRIC:
        pick = {1: hi, 2: lo, 3: lo, 4: lo}
        drop = dict(pick)
    else:
        pick = {1: hi, 2: lo, 3: lo, 4: lo}
        drop = {1: lo, 2: lo, 3: lo, 4: hi}
    uniform_city = {a: 0.25 for a in CITY_ADLS}
    uniform_regional = {a: 0.25 for a in REGIONAL_ADLS}
    pickups = {
        Category.INTRACITY: pick,
        Category.INTER_INBOUND: uniform_regional,
        Category.INTER_OUTBOUND: uniform_city,
    }
    deliveries = {
        Category.INTRACITY: drop,
        Category.INTER_INBOUND: uniform_city,
        Category.INTER_OUTBOUND: uniform_regional,
    }
    fractions = {Category(c): float(f) for c, f in category_fractions.items()}
    return DemandPattern(fractions, {c: pickups[c] for c in fractions},
                         {c: deliveries[c] for c in fractions}, name=kind.value)


def cell_count(n: int, fraction: float, p_pick: float, p_drop: float) -> int:
    """Number of commodities for one (category, pickup ADL, delivery ADL) cell."""
    return math.ceil(n * _exact(fraction) * _exact(p_pick) * _exact(p_drop))


def allocate_counts(n: int, pattern: DemandPattern) -> dict[tuple[Category, int, int], int]:
    if n < 1:
        raise ValueError("need at least one commodity")
    counts = {}
    for cat in Category:
        if cat not in pattern.category_fractions:
            continue
        f = pattern.category_fractions[cat]
        for i, po in sorted(pattern.pickup_probs[cat].items()):
            for j, pd in sorted(pattern.delivery_probs[cat].items()):
                counts[(cat, i, j)] = cell_count(n, f, po, pd)
    return counts


def adl_members(network: Network, adl: int) -> list[str]:
    if adl in _RH_OF_ADL:
        rh = _RH_OF_ADL[adl]
        return [rh] if rh in network.hub_by_id else []
    return [z.id for z in network.zones if z.adl == adl]


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent streams for locations, sizes and service promises."""
    ss = np.random.SeedSequence(seed)
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))  # type: ignore[return-value]


def sample_locations(counts: Mapping[tuple[Category, int, int], int], network: Network,
                     rng: np.random.Generator) -> list[tuple[Category, str, str]]:
    members = {adl: adl_members(network, adl) for adl in CITY_ADLS + REGIONAL_ADLS}
    out = []
    for (cat, i, j), c in counts.items():
        if c == 0:
            continue
        for adl in (i, j):
            if not members[adl]:
                raise ValueError(f"ADL{adl} has no member locations")
        if i == j and len(members[i]) < 2:
            raise ValueError(f"ADL{i} needs two members for a same-ADL commodity")
        for _ in range(c):
            o = members[i][rng.integers(len(members[i]))]
            d = members[j][rng.integers(len(members[j]))]
            while d == o:
                d = members[j][rng.integers(len(members[j]))]
            out.append((cat, o, d))
    return out


def sample_commodities(counts: Mapping[tuple[Category, int, int], int], network: Network,
                       size_dist: SizeDistribution, rng_seed: int) -> list[Commodity]:
    """Draw pickup/delivery locations and quantities; service promises are left unset.

    Locations and sizes come from separate seed streams, so changing the size
    distribution keeps every origin and destination in place.
    """
    loc_rng, size_rng, _ = seed_streams(rng_seed)
    locs = sample_locations(counts, network, loc_rng)
    qty = size_dist.sample(size_rng, len(locs))
    width = max(4, len(str(len(locs))))
    return [Commodity(f"k{idx:0{width}d}", o, d, int(qty[idx]), cat)
            for idx, (cat, o, d) in enumerate(locs)]


def assign_service_promises(commodities: Sequence[Commodity], promises: Sequence[tuple[float, float]],
                            min_doable: Mapping[str, float], rng_seed: int | np.random.Generator) -> list[Commodity]:
    """Cascade commodities into promises, tightest first.

    ``promises`` is a list of (minutes, target share). Each promise draws a
    uniform random subset from the not-yet-assigned commodities that can make
    it; the loosest promise takes every remaining commodity.
    """
    promises = sorted(promises)
    if not promises:
        raise ValueError("no service promises given")
    if abs(sum(s for _, s in promises) - 1.0) > 1e-9:
        raise ValueError("promise shares must sum to 1")
    loosest = promises[-1][0]
    bad = [c.id for c in commodities if min_doable[c.id] > loosest]
    if bad:
        raise InfeasibleDemandError(bad, loosest)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else seed_streams(rng_seed)[2]

    total = len(commodities)
    assigned: dict[str, float] = {}
    for idx, (minutes, share) in enumerate(promises):
        pool = [c.id for c in commodities if c.id not in assigned and min_doable[c.id] <= minutes]
        if idx == len(promises) - 1:
            take = pool
        else:
            target = int(math.floor(share * total + 0.5))
            if len(pool) <= target:
                take = pool
            else:
                picks = rng.choice(len(pool), size=target, replace=False)
                take = [pool[p] for p in sorted(picks)]
        for cid in take:
            assigned[cid] = float(minutes)
    return [replace(c, service_promise=assigned[c.id]) for c in commodities]


@dataclass
class DemandSet:
    """Commodities plus the provenance needed to regenerate them."""

    commodities: list[Commodity]
    pattern: DemandPattern
    seed: int
    n: int
    total_volume: int
    shape: SizeShape
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "header": {"pattern": self.pattern.to_dict(), "seed": self.seed, "n": self.n,
                       "total_volume": self.total_volume, "shape": self.shape.value, **self.extra},
            "commodities": [c.to_dict() for c in self.commodities],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DemandSet":
        h = dict(d["header"])
        pattern = DemandPattern.from_dict(h.pop("pattern"))
        seed, n, vol, shape = h.pop("seed"), h.pop("n"), h.pop("total_volume"), SizeShape(h.pop("shape"))
        return cls([Commodity.from_dict(c) for c in d["commodities"]], pattern, seed, n, vol, shape, h)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def generate_demand(network: Network, pattern: DemandPattern, n: int, total_volume: int,
                    shape: SizeShape | str, seed: int) -> DemandSet:
    counts = allocate_counts(n, pattern)
    size = SizeDistribution(total_volume / n, SizeShape(shape))
    comms = sample_commodities(counts, network, size, seed)
    return DemandSet(comms, pattern, seed, n, total_volume, SizeShape(shape))
