import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import hand_network, toy_network
from parcelcon.capacity import CapacityPlan
from parcelcon.demand import Category, Commodity
from parcelcon.pathgen import (ContainerArcRegistry, InfeasibleCommodityError, PathError, PhysicalPath,
                               build_path_set, containerize, enumerate_physical_paths, expand, filter_feasible,
                               generate_container_paths, min_doable, to_dm, transit_time)


def com(o, d, promise=None, cid="k"):
    return Commodity(cid, o, d, 10, Category.INTRACITY, promise)


def chain(n, minutes=10):
    hubs = [("RH_A", "RH")] + [(f"AH_{i}", "AH") for i in range(n - 1)] + [("RH_B", "RH")]
    ids = [h for h, _ in hubs]
    net = hand_network(hubs, [(u, v, minutes) for u, v in zip(ids, ids[1:])])
    plan = CapacityPlan({h: 100 for h in ids}, {h: 10 for h in ids}, {a.id: 3 for a in net.arcs})
    p = enumerate_physical_paths(net, com("RH_A", "RH_B"), plan, max_intermediate=10, max_paths=1)[0]
    return net, plan, p


# --- container-path expansion -------------------------------------------------------------------

@pytest.mark.parametrize("S", range(1, 7))
def test_expand_counts_with_unbounded_k(S):
    paths, segs = expand(S, S - 1)
    assert len(paths) == 2 ** (S - 1)
    assert len(segs) == S * (S + 1) // 2


@pytest.mark.parametrize("S", range(1, 7))
def test_expand_k0_single_fully_sorted_path(S):
    paths, segs = expand(S, 0)
    assert paths == [tuple(range(S + 1))]
    assert segs == [(i, i + 1) for i in range(S)]


def test_expand_three_legs_hand_trace():
    paths, segs = expand(3, 2)
    assert sorted(paths) == [(0, 1, 2, 3), (0, 1, 3), (0, 2, 3), (0, 3)]
    assert sorted(segs) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_expand_single_leg_any_k():
    for K in range(5):
        assert expand(1, K) == ([(0, 1)], [(0, 1)])


def test_expand_rejects_bad_arguments():
    with pytest.raises(ValueError):
        expand(0, 1)
    with pytest.raises(ValueError):
        expand(2, -1)


def _compositions(S, K):
    """Brute force: every subset of interior cut points whose gaps are at most K + 1 legs."""
    out = []
    for r in range(S):
        for cuts in itertools.combinations(range(1, S), r):
            b = (0, *cuts, S)
            if all(j - i <= K + 1 for i, j in zip(b, b[1:])):
                out.append(b)
    return sorted(out)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(0, 8))
def test_expand_matches_bounded_compositions(S, K):
    paths, segs = expand(S, K)
    assert sorted(paths) == _compositions(S, K)
    assert len(set(paths)) == len(paths)
    used = {(i, j) for b in paths for i, j in zip(b, b[1:])}
    assert used == set(segs)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(0, 6), st.integers(0, 6))
def test_expand_subset_in_k(S, k1, k2):
    lo, hi = sorted((k1, k2))
    p1, s1 = expand(S, lo)
    p2, s2 = expand(S, hi)
    assert set(p1) <= set(p2) and set(s1) <= set(s2)


def test_generate_container_paths_hub_sequences_are_contiguous():
    _, _, p = chain(4)
    bounds, seqs = generate_container_paths(p, 4)
    assert len(bounds) == 8 and len(seqs) == 10
    for seq in seqs:
        i = p.nodes.index(seq[0])
        assert p.nodes[i:i + len(seq)] == seq


def test_registry_deduplicates_across_paths():
    net, plan, p = chain(3)
    reg = ContainerArcRegistry(net)
    a = build_path_set(net, plan, com("RH_A", "RH_B"), [p], reg, 2, feasible_only=False)
    n = len(reg)
    build_path_set(net, plan, com("RH_A", "RH_B", cid="k2"), [p], reg, 2, feasible_only=False)
    assert len(reg) == n == 6
    assert len(a) == 4
    back = ContainerArcRegistry.from_list(net, reg.to_list())
    assert back.to_list() == reg.to_list()


def test_containerized_path_partitions_physical_arcs():
    net, plan, p = chain(4)
    reg = ContainerArcRegistry(net)
    for cp in build_path_set(net, plan, com("RH_A", "RH_B"), [p], reg, 4, feasible_only=False):
        flat = tuple(a for cid in cp.container_arcs for a in reg[cid].physical_arcs)
        assert flat == p.arcs
        assert set(cp.sort_hubs) | set(cp.crossdock_hubs) == set(p.intermediate)
        assert not set(cp.sort_hubs) & set(cp.crossdock_hubs)
        for cid in cp.container_arcs:
            arc = reg[cid]
            assert set(arc.crossdock_hubs) <= set(cp.crossdock_hubs)


def test_containerize_rejects_bad_bounds():
    net, plan, p = chain(3)
    with pytest.raises(ValueError):
        containerize(p, (0, 2), net, plan, ContainerArcRegistry(net))
    with pytest.raises(ValueError):
        containerize(p, (0, 2, 1, 3), net, plan, ContainerArcRegistry(net))


# --- transit time -------------------------------------------------------------------------------

def _two_leg():
    net = hand_network([("RH_A", "RH"), ("AH_X", "AH"), ("RH_B", "RH")],
                       [("RH_A", "AH_X", 30), ("AH_X", "RH_B", 20)], sort_time=16)
    plan = CapacityPlan({"RH_A": 0, "AH_X": 100, "RH_B": 0}, {"RH_A": 0, "AH_X": 10, "RH_B": 0},
                        {"a00000": 3, "a00001": 2})
    p = PhysicalPath("k", ("RH_A", "AH_X", "RH_B"), ("a00000", "a00001"), 0)
    return net, plan, p


def test_transit_time_two_arcs_one_sort():
    net, plan, p = _two_leg()
    t = transit_time(p, (0, 1, 2), net, plan)
    assert (t.transport, t.wait, t.sort, t.crossdock) == (500, 250, 160, 0)
    assert t.total == 910 and t.minutes == 91.0


def test_transit_time_crossdock_variant_is_faster():
    net, plan, p = _two_leg()
    sort = transit_time(p, (0, 1, 2), net, plan)
    xd = transit_time(p, (0, 2), net, plan)
    assert xd.crossdock == 40 and xd.sort == 0
    assert xd.total < sort.total


def test_transit_time_direct_has_no_handling():
    net = hand_network([("RH_A", "RH"), ("RH_B", "RH")], [("RH_A", "RH_B", 12.35)])
    plan = CapacityPlan({}, {}, {"a00000": 4})
    p = PhysicalPath("k", ("RH_A", "RH_B"), ("a00000",), 0)
    t = transit_time(p, (0, 1), net, plan)
    assert (t.sort, t.crossdock) == (0, 0)
    assert t.total == to_dm(12.35) + 75 == 124 + 75


def test_transit_time_pruned_arc_is_an_error():
    net, plan, p = _two_leg()
    plan = CapacityPlan(plan.sort_capacity, plan.crossdock_capacity, {"a00000": 3, "a00001": 0})
    with pytest.raises(PathError, match="a00001"):
        transit_time(p, (0, 1, 2), net, plan)


def test_to_dm_rounds_half_up():
    assert to_dm(0.05) == 1 and to_dm(0.04) == 0 and to_dm(57.6) == 576


def test_fully_sorted_variant_is_slowest_on_toy_paths():
    net = toy_network("HC1")
    zones = [z.id for z in net.zones]
    plan = CapacityPlan({h.id: 1000 for h in net.hubs}, {h.id: 100 for h in net.hubs},
                        {a.id: 3 for a in net.arcs})
    for o, d in [(zones[0], zones[-1]), (zones[1], zones[7])]:
        for p in enumerate_physical_paths(net, com(o, d), plan, max_paths=3):
            variants = build_path_set(net, plan, com(o, d), [p], ContainerArcRegistry(net), 4, feasible_only=False)
            full = [cp for cp in variants if cp.fully_sorted]
            assert len(full) == 1
            assert all(cp.T_p <= full[0].T_p for cp in variants)
            for cp in variants:
                t = cp.time
                assert t.total == t.transport + t.wait + t.sort + t.crossdock


# --- feasibility filter -------------------------------------------------------------------------

def _with_times(net, plan, p, totals):
    from dataclasses import replace

    from parcelcon.pathgen import TransitTime
    cp = containerize(p, (0, 1, 2), net, plan, ContainerArcRegistry(net))
    return [replace(cp, time=TransitTime(t, 0, 0, 0)) for t in totals]


def test_filter_feasible_threshold():
    net, plan, p = _two_leg()
    paths = _with_times(net, plan, p, [2500, 2990, 3010])
    kept = filter_feasible(paths, com("RH_A", "RH_B", 300))
    assert [cp.T_p for cp in kept] == [2500, 2990]


def test_filter_feasible_empty_is_an_error():
    net, plan, p = _two_leg()
    with pytest.raises(InfeasibleCommodityError, match="301.0"):
        filter_feasible(_with_times(net, plan, p, [3010]), com("RH_A", "RH_B", 300))
    with pytest.raises(PathError):
        filter_feasible(_with_times(net, plan, p, [10]), com("RH_A", "RH_B"))


def test_promise_equal_to_min_doable_keeps_a_path():
    net = toy_network("HS")
    zones = [z.id for z in net.zones]
    plan = CapacityPlan({h.id: 1000 for h in net.hubs}, {h.id: 100 for h in net.hubs},
                        {a.id: 2 for a in net.arcs})
    c = com(zones[0], zones[-1])
    md = min_doable(net, plan, c)
    c = Commodity(c.id, c.origin, c.destination, c.quantity, c.category, md / 10)
    phys = enumerate_physical_paths(net, c, plan)
    kept = filter_feasible(build_path_set(net, plan, c, phys, ContainerArcRegistry(net), 4, False), c)
    assert kept and min(cp.T_p for cp in kept) <= md
    # every container variant of the fully-sorted shortest path stays feasible
    variants = build_path_set(net, plan, c, phys[:1], ContainerArcRegistry(net), 4, False)
    assert len(filter_feasible(variants, c)) == len(variants)


# --- physical path enumeration ------------------------------------------------------------------

def test_single_arc_od_returns_itself():
    net = hand_network([("RH_A", "RH"), ("RH_B", "RH")], [("RH_A", "RH_B", 5)])
    out = enumerate_physical_paths(net, com("RH_A", "RH_B"))
    assert [p.nodes for p in out] == [("RH_A", "RH_B")]
    assert out[0].length == 50


def test_disconnected_od_names_commodity():
    net = hand_network([("RH_A", "RH"), ("RH_B", "RH"), ("RH_C", "RH")], [("RH_A", "RH_B", 5)])
    with pytest.raises(PathError, match="k77"):
        enumerate_physical_paths(net, com("RH_A", "RH_C", cid="k77"))


def _grid3(weights):
    """3x3 hub grid, both directions on every lattice edge, with the given minutes per edge."""
    ids = {(i, j): f"AH_{i}{j}" for i in range(3) for j in range(3)}
    edges = []
    w = iter(weights)
    for (i, j), u in sorted(ids.items()):
        for di, dj in ((1, 0), (0, 1)):
            if (i + di, j + dj) in ids:
                m = next(w)
                v = ids[(i + di, j + dj)]
                edges += [(u, v, m), (v, u, m)]
    return hand_network([(h, "AH") for h in sorted(ids.values())], edges), ids


def _brute_force(net, o, d, max_intermediate):
    out = []

    def dfs(nodes, arcs, length):
        last = nodes[-1]
        if last == d:
            out.append((length, nodes, arcs))
            return
        if len(nodes) - 1 > max_intermediate:
            return
        for a in net.out_arcs[last]:
            if a.head not in nodes:
                dfs(nodes + (a.head,), arcs + (a.id,), length + to_dm(a.transport_time))

    dfs((o,), (), 0)
    return sorted(out)


def _expected(net, o, d, dev, max_paths, max_intermediate=7):
    found = _brute_force(net, o, d, max_intermediate)
    limit = math.floor(found[0][0] * (1 + dev))
    return [(L, n) for L, n, _ in found if L <= limit][:max_paths]


def test_grid3_max_paths_keeps_lexicographic_first_of_ties():
    # equal edge times: every monotone lattice route ties, so node order decides
    net, ids = _grid3([10] * 12)
    o, d = ids[(0, 0)], ids[(2, 2)]
    want = _expected(net, o, d, 0.0, 100)
    assert len(want) == 6  # all monotone lattice routes tie at 40
    got = enumerate_physical_paths(net, com(o, d), None, max_deviation=0.0, max_paths=2)
    assert [(p.length, p.nodes) for p in got] == want[:2]


def test_grid3_deviation_bound():
    weights = [10, 11, 12, 13, 10, 14, 10, 10, 15, 11, 12, 10]
    net, ids = _grid3(weights)
    o, d = ids[(0, 0)], ids[(2, 2)]
    got = enumerate_physical_paths(net, com(o, d), None, max_deviation=0.05, max_paths=20)
    shortest = got[0].length
    assert all(p.length <= math.floor(shortest * 1.05) for p in got)
    assert [(p.length, p.nodes) for p in got] == _expected(net, o, d, 0.05, 20)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 30), min_size=12, max_size=12), st.sampled_from([0.0, 0.05, 0.2, 1.0]),
       st.integers(1, 6), st.integers(0, 7), st.sampled_from([((0, 0), (2, 2)), ((0, 1), (2, 1)), ((1, 1), (0, 2))]))
def test_enumeration_matches_brute_force(weights, dev, max_paths, max_intermediate, od):
    net, ids = _grid3(weights)
    o, d = ids[od[0]], ids[od[1]]
    want = _expected(net, o, d, dev, max_paths, max_intermediate) if _brute_force(net, o, d, max_intermediate) else []
    if not want:
        with pytest.raises(PathError):
            enumerate_physical_paths(net, com(o, d), None, max_intermediate, dev, max_paths)
        return
    got = enumerate_physical_paths(net, com(o, d), None, max_intermediate, dev, max_paths)
    assert [(p.length, p.nodes) for p in got] == want
    for p in got:
        assert len(set(p.nodes)) == len(p.nodes)
        assert len(p.intermediate) <= max_intermediate
        for a, (u, v) in zip(p.arcs, zip(p.nodes, p.nodes[1:])):
            assert (net.arc_by_id[a].tail, net.arc_by_id[a].head) == (u, v)


def test_zones_are_never_intermediate():
    net = toy_network("HC1")
    zones = {z.id for z in net.zones}
    zl = sorted(zones)
    for p in enumerate_physical_paths(net, com(zl[0], zl[-1]), None, max_deviation=0.5, max_paths=20):
        assert not set(p.intermediate) & zones


def test_plan_prunes_arcs_and_adds_waits():
    net, plan, p = _two_leg()
    got = enumerate_physical_paths(net, com("RH_A", "RH_B"), plan)
    assert got[0].length == 500 + 250
    plan0 = CapacityPlan(plan.sort_capacity, plan.crossdock_capacity, {"a00000": 0, "a00001": 2})
    with pytest.raises(PathError):
        enumerate_physical_paths(net, com("RH_A", "RH_B"), plan0)


def test_enumeration_argument_validation():
    net, _, _ = _two_leg()
    for kw in (dict(max_intermediate=-1), dict(max_paths=0), dict(max_deviation=-0.1)):
        with pytest.raises(ValueError):
            enumerate_physical_paths(net, com("RH_A", "RH_B"), **kw)


def test_min_doable_is_fully_sorted_shortest():
    net, plan, p = _two_leg()
    assert min_doable(net, plan, com("RH_A", "RH_B")) == 910
