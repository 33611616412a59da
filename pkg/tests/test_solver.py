import importlib
import itertools
import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import hand_network, tiny_instance, tiny_model
from parcelcon.capacity import CapacityPlan
from parcelcon.demand import Category, Commodity
from parcelcon.model import build_ip, validate
from parcelcon.pathgen import ContainerArcRegistry, build_path_set, enumerate_physical_paths
from parcelcon.solver import (COMPILED, EnumerationLimitError, LinearProgram, LPStatus, SolveConfig, SolveStatus,
                              solve_exhaustive, solve_ip, solve_lp)
from parcelcon.solver import _kernels_py

INF = np.inf


def lp_of(c, rows, sense, rhs, lb=None, ub=None):
    c = np.asarray(c, dtype=float)
    n = len(c)
    return LinearProgram(c, sp.csr_matrix(np.asarray(rows, dtype=float).reshape(len(rhs), n)), sense, rhs,
                         np.zeros(n) if lb is None else lb, np.full(n, INF) if ub is None else ub)


# --- LP -----------------------------------------------------------------------------------------

@pytest.mark.parametrize("method", ["simplex", "highs"])
def test_lp_single_lower_bound(method):
    res = solve_lp(lp_of([1], [[1]], [">"], [3]), method)
    assert res.status is LPStatus.OPTIMAL
    assert res.x[0] == pytest.approx(3) and res.objective == pytest.approx(3)


@pytest.mark.parametrize("method", ["simplex", "highs"])
def test_lp_infeasible_pair(method):
    res = solve_lp(lp_of([1], [[1], [1]], ["<", ">"], [1, 2]), method)
    assert res.status is LPStatus.INFEASIBLE and res.x is None


@pytest.mark.parametrize("method", ["simplex", "highs"])
def test_lp_unbounded(method):
    res = solve_lp(lp_of([-1, 0], [[1, -1]], ["<"], [1]), method)
    assert res.status is LPStatus.UNBOUNDED


@pytest.mark.parametrize("method", ["simplex", "highs"])
def test_lp_free_and_bounded_columns(method):
    # min x0 - x1 with x0 free, -2 <= x1 <= 4, x0 + x1 = 1, x0 >= -10
    lp = lp_of([1, -1], [[1, 1], [1, 0]], ["=", ">"], [1, -10], lb=np.array([-INF, -2]), ub=np.array([INF, 4]))
    res = solve_lp(lp, method)
    assert res.status is LPStatus.OPTIMAL
    assert res.x == pytest.approx([-3, 4])
    assert res.objective == pytest.approx(-7)


def test_lp_bound_override_and_crossed_bounds():
    lp = lp_of([1], [[1]], [">"], [0])
    assert solve_lp(lp, "simplex", lb=np.array([2.0])).objective == pytest.approx(2)
    assert solve_lp(lp, "simplex", lb=np.array([2.0]), ub=np.array([1.0])).status is LPStatus.INFEASIBLE


def test_lp_rejects_malformed():
    with pytest.raises(ValueError):
        LinearProgram(np.zeros(2), sp.csr_matrix((1, 2)), ["<"], [0], np.zeros(1), np.zeros(2))
    with pytest.raises(ValueError):
        LinearProgram(np.zeros(1), sp.csr_matrix((1, 1)), ["!"], [0], np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        solve_lp(lp_of([1], [[1]], [">"], [0]), "nope")


def test_degenerate_lp_terminates():
    # a classic cycling example for Dantzig's rule without anti-cycling
    c = [-0.75, 150, -0.02, 6]
    rows = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    res = solve_lp(lp_of(c, rows, ["<", "<", "<"], [0, 0, 1]), "simplex")
    assert res.status is LPStatus.OPTIMAL
    assert res.objective == pytest.approx(-0.05)


@settings(max_examples=120, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_dense_simplex_matches_highs(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(-4, 5, size=(m, n)).astype(float)
    sense = rng.choice(["<", ">", "="], size=m, p=[0.5, 0.3, 0.2])
    x0 = rng.integers(0, 4, size=n).astype(float)
    rhs = A @ x0 + np.where(sense == "<", rng.integers(0, 3, m), np.where(sense == ">", -rng.integers(0, 3, m), 0))
    c = rng.integers(-3, 4, size=n).astype(float)
    ub = np.where(rng.random(n) < 0.5, 6.0, INF)
    lp = LinearProgram(c, sp.csr_matrix(A), sense, rhs, np.zeros(n), ub)
    a = solve_lp(lp, "simplex")
    b = solve_lp(lp, "highs")
    assert a.status is b.status
    if a.status is LPStatus.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, abs=1e-6)
        assert lp.max_violation(a.x) <= 1e-6


# --- exhaustive oracle --------------------------------------------------------------------------

def _diamond(sort_cap=1000, xdock=10):
    # two routes RH_A -> RH_B: via AH_F (fast) and AH_S (slow)
    net = hand_network([("RH_A", "RH"), ("AH_F", "AH"), ("AH_S", "AH"), ("AH_T", "AH"), ("RH_B", "RH")],
                       [("RH_A", "AH_F", 5), ("AH_F", "RH_B", 5), ("RH_A", "AH_S", 8), ("AH_S", "RH_B", 8),
                        ("RH_A", "AH_T", 12), ("AH_T", "RH_B", 12)])
    plan = CapacityPlan({h.id: sort_cap for h in net.hubs}, {h.id: xdock for h in net.hubs},
                        {a.id: 2 for a in net.arcs})
    return net, plan


def _model(net, plan, coms, K=0, max_paths=3, dev=10.0):
    reg = ContainerArcRegistry(net)
    paths = {c.id: build_path_set(net, plan, c, enumerate_physical_paths(net, c, plan, 7, dev, max_paths), reg, K)
             for c in coms}
    return build_ip(net, plan, coms, paths, reg, 40)


def test_exhaustive_one_commodity_three_paths():
    net, plan = _diamond()
    m = _model(net, plan, [Commodity("k", "RH_A", "RH_B", 10, Category.INTRACITY)])
    assert len(m.paths[0]) == 3
    sol = solve_exhaustive(m)
    assert sol.objective == 10 * min(cp.T_p for cp in m.paths[0])
    assert sol.chosen(m)[0].physical.nodes[1] == "AH_F"


def test_exhaustive_skips_capacity_infeasible_assignment():
    net, plan = _diamond()
    plan = CapacityPlan({**plan.sort_capacity, "AH_F": 5}, plan.crossdock_capacity, plan.departures)
    m = _model(net, plan, [Commodity("k", "RH_A", "RH_B", 10, Category.INTRACITY)])
    sol = solve_exhaustive(m)
    assert sol.chosen(m)[0].physical.nodes[1] == "AH_S"


def test_exhaustive_infeasible_returns_none():
    net, plan = _diamond(sort_cap=1)
    m = _model(net, plan, [Commodity("k", "RH_A", "RH_B", 10, Category.INTRACITY)])
    assert solve_exhaustive(m) is None
    sol, stats = solve_ip(m, SolveConfig(gap=0.0))
    assert sol is None and stats.status is SolveStatus.INFEASIBLE


def test_exhaustive_ties_break_lexicographically():
    net = hand_network([("RH_A", "RH"), ("AH_1", "AH"), ("AH_2", "AH"), ("RH_B", "RH")],
                       [("RH_A", "AH_1", 5), ("AH_1", "RH_B", 5), ("RH_A", "AH_2", 5), ("AH_2", "RH_B", 5)])
    plan = CapacityPlan({h.id: 100 for h in net.hubs}, {h.id: 0 for h in net.hubs}, {a.id: 1 for a in net.arcs})
    m = _model(net, plan, [Commodity("k", "RH_A", "RH_B", 10, Category.INTRACITY)])
    assert solve_exhaustive(m).choice == [0]


def test_exhaustive_enumeration_limit():
    m = tiny_model(4)
    with pytest.raises(EnumerationLimitError):
        solve_exhaustive(m, limit=0)


# --- branch and bound ---------------------------------------------------------------------------

def test_integral_root_takes_one_node():
    net, plan = _diamond()
    m = _model(net, plan, [Commodity("k", "RH_A", "RH_B", 10, Category.INTRACITY)])
    sol, stats = solve_ip(m, SolveConfig(gap=0.0))
    assert stats.nodes == 1 and stats.status is SolveStatus.OPTIMAL
    assert sol.objective == stats.root_bound


@pytest.mark.parametrize("seed", range(40))
def test_bnb_matches_exhaustive(seed):
    m = tiny_model(seed)
    want = solve_exhaustive(m)
    got, stats = solve_ip(m, SolveConfig(gap=0.0))
    if want is None:
        assert got is None
        return
    assert got.objective == want.objective
    assert validate(m, got) == []
    assert stats.root_bound <= got.objective + 1e-6


def test_gap_target_reduces_or_keeps_nodes():
    for seed in range(40):
        m = tiny_model(seed)
        a, sa = solve_ip(m, SolveConfig(gap=0.0))
        b, sb = solve_ip(m, SolveConfig(gap=1e-4))
        if a is None:
            assert b is None
            continue
        assert a.objective == b.objective
        assert sb.nodes <= sa.nodes


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_weak_duality(seed):
    m = tiny_model(seed)
    want = solve_exhaustive(m)
    for strengthen in (False, True):
        r = solve_lp(m.relaxation(strengthen=strengthen))
        if want is None:
            continue
        assert r.status is LPStatus.OPTIMAL
        assert r.objective <= want.objective + 1e-6


def test_determinism_single_worker():
    for seed in (1, 6, 9):
        m = tiny_model(seed)
        a, sa = solve_ip(m, SolveConfig(gap=0.0))
        b, sb = solve_ip(m, SolveConfig(gap=0.0))
        assert (a is None) == (b is None)
        if a is not None:
            assert a.choice == b.choice and a.y == b.y
        assert sa.nodes == sb.nodes
        assert [h[:3] for h in sa.history] == [h[:3] for h in sb.history]


def test_multiple_workers_keep_invariants():
    for seed in range(12):
        m = tiny_model(seed)
        want = solve_exhaustive(m)
        got, stats = solve_ip(m, SolveConfig(gap=0.0, workers=3))
        if want is None:
            assert got is None
            continue
        assert got.objective == want.objective
        assert validate(m, got) == []


def test_progress_lines():
    buf = io.StringIO()
    m = tiny_model(7)
    solve_ip(m, SolveConfig(gap=0.0, progress=buf, progress_every=1))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "node,bound,incumbent,gap,time"
    assert len(lines) >= 2
    for ln in lines[1:]:
        parts = ln.split(",")
        assert len(parts) == 5
        int(parts[0]), float(parts[1]), float(parts[3]), float(parts[4])
    got = []
    solve_ip(m, SolveConfig(gap=0.0, progress=got.append, progress_every=1))
    assert got == lines or [g.rsplit(",", 1)[0] for g in got] == [ln.rsplit(",", 1)[0] for ln in lines]


def test_warm_start_is_kept_when_optimal():
    m = tiny_model(10)
    want = solve_exhaustive(m)
    sol, stats = solve_ip(m, SolveConfig(gap=0.0), initial=want.choice)
    assert sol.objective == want.objective
    assert stats.history and stats.history[0][2] == want.objective


@pytest.mark.parametrize("engine", ["highs", "auto"])
def test_engines_agree(engine):
    for seed in range(15):
        m = tiny_model(seed)
        want = solve_exhaustive(m)
        got, stats = solve_ip(m, SolveConfig(gap=0.0, engine=engine, handoff_nodes=1))
        if want is None:
            assert got is None
            continue
        assert got.objective == want.objective
        assert validate(m, got) == []


def test_solve_config_validation():
    for bad in (dict(gap=-1), dict(node_limit=0), dict(time_limit=0), dict(workers=0), dict(engine="cplex")):
        with pytest.raises(ValueError):
            SolveConfig(**bad)


def test_node_limit_reports_status():
    for seed in range(40):
        m = tiny_model(seed)
        _, full = solve_ip(m, SolveConfig(gap=0.0))
        if full.nodes > 1:
            sol, stats = solve_ip(m, SolveConfig(gap=0.0, node_limit=1, heuristics=False))
            assert stats.status in (SolveStatus.NODE_LIMIT, SolveStatus.OPTIMAL)
            assert stats.nodes == 1
            return
    pytest.skip("no instance branched")


# --- compiled kernels against the numpy fallback ------------------------------------------------

compiled = pytest.mark.skipif(not COMPILED, reason="compiled kernels not built")


@pytest.mark.parametrize("impl", ["fallback", "compiled"])
def test_ratio_test_skips_relatively_tiny_pivots(impl):
    if impl == "compiled" and not COMPILED:
        pytest.skip("compiled kernels not built")
    k = _kernels_py if impl == "fallback" else importlib.import_module("parcelcon.solver._kernels")
    basis = np.array([0, 1, 2], dtype=np.int64)
    # row 0 ties at ratio 0 but its 1e-9 pivot is negligible next to 2e4
    T = np.array([[1e-9, 0.0], [2e4, 0.0], [1.0, 5.0], [0.0, 0.0]])
    assert k.leaving_row(T, 0, basis, 1e-9, False) == 1
    assert k.leaving_row(T, 0, basis, 1e-9, True) == 1
    # near-ties within the Harris slack go to the larger pivot; Bland keeps the exact minimum
    T = np.array([[1.0, 1.0], [4.0, 4.0 + 1e-10], [1.0, 3.0], [0.0, 0.0]])
    assert k.leaving_row(T, 0, basis, 1e-9, False) == 1
    assert k.leaving_row(T, 0, basis, 1e-9, True) == 0


def test_badly_scaled_node_lps_stay_feasible():
    # this instance once drove the dense simplex onto 1e-9 pivots and lost feasibility
    net, plan, coms, _, _ = tiny_instance(9099, tight=True)
    reg = ContainerArcRegistry(net)
    paths = {c.id: build_path_set(net, plan, c, enumerate_physical_paths(net, c, plan, 7, 0.25, 2), reg, 2)
             for c in coms}
    m = build_ip(net, plan, coms, paths, reg, 40)
    a, _ = solve_ip(m, SolveConfig(gap=0.0, engine="bnb"))
    b, _ = solve_ip(m, SolveConfig(gap=0.0, engine="highs"))
    assert a.objective == b.objective


@compiled
@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_kernel_pivot_and_ratio_parity(m, n, seed):
    ck = importlib.import_module("parcelcon.solver._kernels")
    rng = np.random.default_rng(seed)
    T = rng.integers(-5, 6, size=(m + 1, n + 1)).astype(float)
    T[:m, -1] = np.abs(T[:m, -1])
    basis = rng.permutation(n + 5)[:m].astype(np.int64)
    cost = np.ascontiguousarray(T[-1, :n])
    assert ck.entering_dantzig(cost, 1e-7) == _kernels_py.entering_dantzig(cost, 1e-7)
    assert ck.entering_bland(cost, 1e-7) == _kernels_py.entering_bland(cost, 1e-7)
    for c, bland in itertools.product(range(n), (False, True)):
        r1 = ck.leaving_row(T, c, basis, 1e-9, bland)
        assert r1 == _kernels_py.leaving_row(T, c, basis, 1e-9, bland)
        if r1 >= 0:
            a, b = T.copy(), T.copy()
            ck.pivot(a, r1, c)
            _kernels_py.pivot(b, r1, c)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@compiled
@pytest.mark.parametrize("seed", range(25))
def test_kernel_exhaustive_parity(seed):
    ck = importlib.import_module("parcelcon.solver._kernels")
    arrs = tiny_model(seed).kernel_arrays()
    a = ck.exhaustive_search(**arrs)
    b = _kernels_py.exhaustive_search(**arrs)
    assert a[0] == b[0] and a[2] == b[2]
    if a[0] >= 0:
        assert list(a[1]) == list(b[1])


def test_fallback_selected_by_environment(monkeypatch):
    import parcelcon.solver.kernels as k
    monkeypatch.setenv("PARCELCON_PURE_PYTHON", "1")
    try:
        k2 = importlib.reload(k)
        assert k2.COMPILED is False and k2.pivot is _kernels_py.pivot
    finally:
        monkeypatch.delenv("PARCELCON_PURE_PYTHON")
        importlib.reload(k)


def test_tiny_instance_limits():
    for seed in range(30):
        net, plan, coms, paths, reg = tiny_instance(seed)
        assert len(coms) <= 6
        assert all(len(p) <= 5 for p in paths.values())
        assert len({a for ps in paths.values() for cp in ps for a in cp.container_arcs}) <= 12
