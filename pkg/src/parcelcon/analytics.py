"""Savings, container utilization and hub-capacity statistics, plus CSV/SVG output.

Totals are in parcel-minutes per hour (quantity-weighted transit minutes).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

from .capacity import CapacityPlan
from .network import HubKind, Network

TABLE_COLUMNS = (
    "pattern", "structure", "seed",
    "transit_noCont", "transit_withCont", "transit_pct_improvement",
    "handling_noCont", "handling_withCont", "handling_pct_improvement",
    "utilization", "status",
)


@dataclass(frozen=True)
class SolutionTotals:
    """Quantity-weighted time components of one solved model, in parcel-deciminutes."""

    transport: int
    wait: int
    sort: int
    crossdock: int
    commodity_ids: tuple[str, ...] = ()
    by_category: Mapping[str, tuple[int, int]] = field(default_factory=dict)  # category -> (transit, handling)

    @property
    def transit(self) -> int:
        return self.transport + self.wait + self.sort + self.crossdock

    @property
    def handling(self) -> int:
        return self.sort + self.crossdock

    def to_dict(self) -> dict:
        return {"transit": self.transit / 10, "handling": self.handling / 10, "transport": self.transport / 10,
                "wait": self.wait / 10, "sort": self.sort / 10, "crossdock": self.crossdock / 10}


def summarize(model, solution) -> SolutionTotals:
    by_cat: dict[str, list[int]] = {}
    tr = wt = so = xd = 0
    for com, cp in zip(model.commodities, solution.chosen(model)):
        t = cp.time
        q = com.quantity
        tr += q * t.transport
        wt += q * t.wait
        so += q * t.sort
        xd += q * t.crossdock
        acc = by_cat.setdefault(com.category.value, [0, 0])
        acc[0] += q * t.total
        acc[1] += q * (t.sort + t.crossdock)
    return SolutionTotals(tr, wt, so, xd, tuple(c.id for c in model.commodities),
                          {k: (v[0], v[1]) for k, v in sorted(by_cat.items())})


def pct_improvement(base: float, cont: float) -> float:
    if base == 0:
        return 0.0
    return 100.0 * (base - cont) / base


@dataclass(frozen=True)
class SavingsReport:
    baseline_transit: float
    containerized_transit: float
    baseline_handling: float
    containerized_handling: float
    by_category: Mapping[str, tuple[float, float]] = field(default_factory=dict)  # category -> (transit %, handling %)

    @property
    def transit_pct(self) -> float:
        return pct_improvement(self.baseline_transit, self.containerized_transit)

    @property
    def handling_pct(self) -> float:
        return pct_improvement(self.baseline_handling, self.containerized_handling)

    def to_dict(self) -> dict:
        return {
            "units": "parcel-minutes per hour",
            "transit": {"noCont": self.baseline_transit, "withCont": self.containerized_transit,
                        "pct_improvement": round(self.transit_pct, 2)},
            "handling": {"noCont": self.baseline_handling, "withCont": self.containerized_handling,
                         "pct_improvement": round(self.handling_pct, 2)},
            "by_category_pct": {k: {"transit": round(v[0], 2), "handling": round(v[1], 2)}
                                for k, v in self.by_category.items()},
        }


def savings(baseline: SolutionTotals, containerized: SolutionTotals) -> SavingsReport:
    if baseline.commodity_ids != containerized.commodity_ids:
        raise ValueError("baseline and containerized solutions cover different commodities")
    cats = {}
    for cat, (bt, bh) in baseline.by_category.items():
        ct, ch = containerized.by_category.get(cat, (0, 0))
        cats[cat] = (pct_improvement(bt, ct), pct_improvement(bh, ch))
    return SavingsReport(baseline.transit / 10, containerized.transit / 10,
                         baseline.handling / 10, containerized.handling / 10, cats)


@dataclass(frozen=True)
class ArcUtilization:
    arc_id: str
    flow: int
    containers: int
    q: int

    @property
    def utilization(self) -> float:
        return arc_utilization(self.flow, self.q)


@dataclass(frozen=True)
class UtilizationReport:
    q: int
    arcs: tuple[ArcUtilization, ...]

    @property
    def mean(self) -> float:
        """Container-weighted mean utilization."""
        n = sum(a.containers for a in self.arcs)
        if n == 0:
            return math.nan
        return sum(a.flow for a in self.arcs) / (self.q * n)

    def to_dict(self) -> dict:
        return {"q": self.q, "mean": self.mean,
                "arcs": {a.arc_id: {"flow": a.flow, "containers": a.containers,
                                    "utilization": round(a.utilization, 6)} for a in self.arcs}}


def arc_utilization(flow: int, q: int) -> float:
    if flow <= 0:
        raise ValueError("utilization needs positive flow")
    n = -(-flow // q)
    return 1.0 - (n - flow / q) / n


def container_utilization(flows: Mapping[str, int], q: int) -> UtilizationReport:
    arcs = []
    for a, f in flows.items():
        if f <= 0:
            continue
        arcs.append(ArcUtilization(a, int(f), -(-int(f) // q), q))
    return UtilizationReport(q, tuple(arcs))


def solution_flows(model, solution) -> dict[str, int]:
    flow: dict[str, int] = {}
    for com, cp in zip(model.commodities, solution.chosen(model)):
        for a in cp.container_arcs:
            flow[a] = flow.get(a, 0) + com.quantity
    return dict(sorted(flow.items()))


@dataclass(frozen=True)
class CapacityStats:
    kind: str
    count: int
    minimum: int
    mean: float
    maximum: int


def hub_capacity_stats(plan: CapacityPlan, network: Network) -> tuple[dict[str, CapacityStats], list[str]]:
    """Min/mean/max planned sorting capacity per hub kind over non-pruned hubs.

    Kinds with no active hub are left out and reported in the notes list.
    """
    stats, notes = {}, []
    for kind in HubKind:
        hubs = network.hubs_of_kind(kind)
        if not hubs:
            continue
        vals = [plan.sort_capacity[h.id] for h in hubs if plan.sort_capacity.get(h.id, 0) > 0]
        if not vals:
            notes.append(f"all {kind.value} hubs pruned")
            continue
        stats[kind.value] = CapacityStats(kind.value, len(vals), min(vals), sum(vals) / len(vals), max(vals))
    return stats, notes


def table_row(pattern: str, structure: str, seed: int, report: SavingsReport | None,
              util: UtilizationReport | None, status: str = "ok") -> dict:
    row = {"pattern": pattern, "structure": structure, "seed": seed, "status": status}
    if report is not None:
        row.update({
            "transit_noCont": f"{report.baseline_transit:.1f}",
            "transit_withCont": f"{report.containerized_transit:.1f}",
            "transit_pct_improvement": f"{report.transit_pct:.2f}",
            "handling_noCont": f"{report.baseline_handling:.1f}",
            "handling_withCont": f"{report.containerized_handling:.1f}",
            "handling_pct_improvement": f"{report.handling_pct:.2f}",
        })
    if util is not None and util.arcs:
        row["utilization"] = f"{util.mean:.4f}"
    return row


def write_table_csv(rows: Iterable[Mapping], fh: TextIO) -> None:
    w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS, restval="", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in TABLE_COLUMNS})


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "parcelcon"
    return plt


def savings_chart(rows: Sequence[Mapping], path: str) -> None:
    """Grouped bars of transit and handling improvement per table row."""
    plt = _figure()
    ok = [r for r in rows if r.get("transit_pct_improvement", "") != ""]
    labels = [f"{r['structure']}\n{r['pattern']}" + (f" s{r['seed']}" if "seed" in r else "") for r in ok]
    tr = [float(r["transit_pct_improvement"]) for r in ok]
    hd = [float(r["handling_pct_improvement"]) for r in ok]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(ok) + 2), 3.5))
    xs = range(len(ok))
    ax.bar([x - 0.2 for x in xs], tr, width=0.4, label="transit")
    ax.bar([x + 0.2 for x in xs], hd, width=0.4, label="handling")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=6)
    ax.set_ylabel("% improvement with containers")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def capacity_chart(stats: Mapping[str, CapacityStats], path: str) -> None:
    plt = _figure()
    kinds = list(stats)
    fig, ax = plt.subplots(figsize=(4, 3))
    means = [stats[k].mean for k in kinds]
    lo = [stats[k].mean - stats[k].minimum for k in kinds]
    hi = [stats[k].maximum - stats[k].mean for k in kinds]
    ax.bar(kinds, means, yerr=[lo, hi], capsize=4)
    ax.set_ylabel("sorting capacity (parcels/hour)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
