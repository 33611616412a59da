"""LP-based branch-and-bound for the consolidation IP.

Nodes are processed best-bound first with depth-first plunging. Fractional
path columns are branched by fixing the commodity to that path or banning it;
once every commodity has an integral path the containers are completed as
``ceil(flow / q)``, and container columns are only branched on when that
completion breaks a crossdock or vehicle row the relaxation satisfied.
"""

from __future__ import annotations

import enum
import heapq
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np

from . import kernels
from .lp import LPStatus, solve_lp

INT_TOL = 1e-6


class BranchRule(str, enum.Enum):
    MOST_FRACTIONAL = "most_fractional"
    FIRST_FRACTIONAL = "first_fractional"


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"
    INFEASIBLE = "infeasible"


@dataclass
class SolveConfig:
    gap: float = 1e-4
    node_limit: int = 1_000_000
    time_limit: float = 3600.0
    branching: BranchRule = BranchRule.MOST_FRACTIONAL
    workers: int = 1
    lp_method: str = "auto"
    progress: Callable[[str], None] | TextIO | None = None
    progress_every: int = 100
    heuristics: bool = True
    strengthen: bool = True  # add commodity/container-arc linking rows to the relaxation
    # "bnb": built-in search only; "highs": HiGHS MIP; "auto": built-in search for
    # ``handoff_nodes`` nodes, then HiGHS if the gap is still open
    engine: str = "bnb"
    handoff_nodes: int = 200

    def __post_init__(self):
        if self.gap < 0:
            raise ValueError("gap must be >= 0")
        if self.node_limit < 1 or self.time_limit <= 0 or self.workers < 1:
            raise ValueError("limits and worker count must be positive")
        self.branching = BranchRule(self.branching)
        if self.engine not in ("bnb", "highs", "auto"):
            raise ValueError(f"unknown engine {self.engine!r}")


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0
    seconds: float = 0.0
    root_bound: float | None = None
    bound: float | None = None
    status: SolveStatus = SolveStatus.INFEASIBLE
    engine: str = "bnb"
    history: list[tuple[int, float, int | None, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"nodes": self.nodes, "lp_iterations": self.lp_iterations, "seconds": round(self.seconds, 3),
                "root_bound": self.root_bound, "bound": self.bound, "status": self.status.value,
                "engine": self.engine,
                "incumbent_history": [list(h) for h in self.history]}


def relative_gap(incumbent: float | None, bound: float) -> float:
    if incumbent is None:
        return math.inf
    if incumbent == 0:
        return 0.0 if bound >= 0 else math.inf
    return max(0.0, (incumbent - bound) / abs(incumbent))


def _int_bound(z: float) -> int:
    """Smallest integer objective compatible with an LP value ``z`` (objective coefficients are integers)."""
    return math.ceil(z - 1e-6 - 1e-9 * abs(z))


class _Completion:
    """Turn an integral path choice into containers, slack and an objective using the model matrix."""

    def __init__(self, model):
        self.model = model
        n_x, n_y = model.n_x, model.n_y
        A = model.A.tocsc()
        self.Ax = A[:, :n_x].tocsr()
        self.Ay = A[:, n_x:n_x + n_y].tocsr()
        kinds = np.asarray(model.row_kind)
        self.cont_rows = np.flatnonzero(kinds == "container")
        self.cap_rows = np.flatnonzero((kinds == "xdock") | (kinds == "sort") | (kinds == "vehicle"))
        self.rhs = model.rhs
        self.slack_row = {}
        for i, key in enumerate(model.slack_keys):
            self.slack_row[key] = i
        row_slack = np.full(model.n_rows, -1, dtype=np.int64)
        for r, (kind, key) in enumerate(zip(model.row_kind, model.row_key)):
            if (kind, key) in self.slack_row:
                row_slack[r] = self.slack_row[(kind, key)]
        self.row_slack = row_slack
        self.q = model.q
        self.cost = model.x_cost
        self.penalty = model.slack_penalty
        self._karr = None

    def feasible(self, choice: Sequence[int]) -> bool:
        """Capacity check for a choice without slack, through the compiled kernel."""
        if self._karr is None:
            arr = self.model.kernel_arrays()
            work = {"flow": np.zeros(arr["n_arcs"], dtype=np.int64),
                    "sort_load": np.zeros(arr["n_hubs"], dtype=np.int64),
                    "xd_load": np.zeros(arr["n_hubs"], dtype=np.int64),
                    "phys_load": np.zeros(arr["n_phys"], dtype=np.int64)}
            for key in ("radix", "opt_cost", "n_arcs", "n_hubs", "n_phys"):
                arr.pop(key)
            self._karr = {**arr, **work}
        return bool(kernels.assignment_feasible(np.asarray(choice, dtype=np.int64), **self._karr))

    def evaluate(self, choice: Sequence[int]):
        """Return (objective, y vector, slack vector) or None when a capacity row cannot hold."""
        m = self.model
        cols = m.x_start[:-1] + np.asarray(choice, dtype=np.int64)
        xv = np.zeros(m.n_x)
        xv[cols] = 1.0
        # container rows (one per y column, same order) hold sum q_k x - q y <= 0
        flow = np.rint(self.Ax[self.cont_rows] @ xv).astype(np.int64)
        y = (-(-flow // self.q)).astype(float)
        act = self.Ax @ xv + self.Ay @ y
        act[self.cont_rows] = 0.0
        over = act[self.cap_rows] - self.rhs[self.cap_rows]
        slack = np.zeros(len(m.slack_keys))
        bad = over > 1e-9
        if bad.any():
            rows = self.cap_rows[bad]
            idx = self.row_slack[rows]
            if (idx < 0).any():
                return None
            slack[idx] = np.ceil(over[bad] - 1e-9)
        obj = int(self.cost[cols].sum()) + self.penalty * int(slack.sum())
        return obj, y.astype(np.int64), slack.astype(np.int64)


class _Greedy:
    """LP-guided construction: commodities take their most-selected feasible path one at a time.

    Loads are tracked incrementally, so a partial assignment that already
    breaks a capacity row is never extended (all rows are monotone in the flow).
    """

    def __init__(self, model, completion: "_Completion"):
        a = model.kernel_arrays()
        self.a = a
        self.start = a["opt_start"]
        self.radix = a["radix"]
        self.cost = a["opt_cost"]
        self.model = model
        self.comp = completion
        c = completion
        # x columns and container rows that touch each capacity row
        self.cap_x = c.Ax[c.cap_rows].tocsr()
        self.cap_y = c.Ay[c.cap_rows].tocsr()
        self.cont_x = c.Ax[c.cont_rows].tocsr()
        self.owner = np.repeat(np.arange(len(self.radix)), self.radix)

    def build(self, xs: np.ndarray, budget: int = 500) -> list[int] | None:
        choice = self.backtrack(xs, budget)
        if choice is None:
            choice = self.min_conflicts(xs)
        return choice

    def _excess(self, choice):
        c, m = self.comp, self.model
        cols = m.x_start[:-1] + np.asarray(choice, dtype=np.int64)
        xv = np.zeros(m.n_x)
        xv[cols] = 1.0
        flow = np.rint(self.cont_x @ xv).astype(np.int64)
        y = -(-flow // c.q)
        over = self.cap_x @ xv + self.cap_y @ y - c.rhs[c.cap_rows]
        return np.maximum(over, 0.0), cols

    def min_conflicts(self, xs: np.ndarray, max_steps: int | None = None, seed: int = 0) -> list[int] | None:
        """Local search from the LP rounding that moves one commodity at a time to cut total overload."""
        rng = np.random.default_rng(seed)
        K = len(self.radix)
        choice = [int(np.argmax(xs[self.start[k]:self.start[k] + self.radix[k]])) for k in range(K)]
        steps = max_steps if max_steps is not None else 30 * K
        ex, cols = self._excess(choice)
        cur = float(ex.sum())
        for _ in range(steps):
            if cur <= 1e-9:
                return choice
            bad = np.flatnonzero(ex > 1e-9)
            hot_x = set(self.cap_x[bad].indices.tolist())
            hot_y = np.unique(self.cap_y[bad].indices)
            if len(hot_y):
                hot_x.update(self.cont_x[hot_y].indices.tolist())
            # commodities whose current path loads an overloaded row
            cand = sorted({int(self.owner[j]) for j in hot_x
                           if self.radix[self.owner[j]] > 1 and int(cols[self.owner[j]]) == j})
            if not cand:
                return None
            best = None
            for k in cand:
                old = choice[k]
                for p in range(int(self.radix[k])):
                    if p == old:
                        continue
                    choice[k] = p
                    e, _ = self._excess(choice)
                    key = (float(e.sum()), int(self.cost[self.start[k] + p]), k, p)
                    if best is None or key < best:
                        best = key
                choice[k] = old
            if best is not None and best[0] < cur:
                choice[best[2]] = best[3]
            else:
                k = int(rng.choice(cand))
                alts = [p for p in range(int(self.radix[k])) if p != choice[k]]
                choice[k] = int(rng.choice(alts))
            ex, cols = self._excess(choice)
            cur = float(ex.sum())
        return choice if cur <= 1e-9 else None

    def backtrack(self, xs: np.ndarray, budget: int = 500) -> list[int] | None:
        """Depth-first over commodities with at most ``budget`` rejected options overall."""
        a = self.a
        q = a["q"]
        state = (np.zeros(a["n_arcs"], dtype=np.int64), np.zeros(a["n_hubs"], dtype=np.int64),
                 np.zeros(a["n_hubs"], dtype=np.int64), np.zeros(a["n_phys"], dtype=np.int64))
        K = len(self.radix)
        certainty = [float(xs[self.start[k]:self.start[k] + self.radix[k]].max()) for k in range(K)]
        # forced commodities first, then the ones the relaxation is surest about, large before small
        order = sorted(range(K), key=lambda k: (self.radix[k] > 1, -certainty[k],
                                                -int(a["opt_qty"][self.start[k]]), k))
        opts = []
        for k in order:
            s = int(self.start[k])
            opts.append(sorted(range(int(self.radix[k])),
                               key=lambda p: (-round(float(xs[s + p]), 9), int(self.cost[s + p]), p)))
        choice = [0] * K
        pos = [0] * K  # next option index to try at each depth
        placed: list = [None] * K
        i, misses = 0, 0
        while 0 <= i < K:
            k = order[i]
            if placed[i] is not None:
                self._undo(placed[i], state)
                placed[i] = None
            while pos[i] < len(opts[i]):
                p = opts[i][pos[i]]
                pos[i] += 1
                delta = self._try(int(self.start[k]) + p, q, state)
                if delta is not None:
                    placed[i] = delta
                    choice[k] = p
                    break
                misses += 1
                if misses > budget:
                    return None
            if placed[i] is None:
                pos[i] = 0
                i -= 1
            else:
                i += 1
        return choice if i == K else None

    def _try(self, o, q, state):
        """Add option ``o`` to the loads and return the change, or None if a row would break."""
        a = self.a
        flow, sort_load, xd_load, phys_load = state
        qk = int(a["opt_qty"][o])
        sh = a["opt_sort_idx"][a["opt_sort_ptr"][o]:a["opt_sort_ptr"][o + 1]]
        if np.any(sort_load[sh] + qk > a["sort_cap"][sh]):
            return None
        arcs = a["opt_arc_idx"][a["opt_arc_ptr"][o]:a["opt_arc_ptr"][o + 1]]
        dy = -(-(flow[arcs] + qk) // q) - (-(-flow[arcs] // q))
        xd_add: dict[int, int] = {}
        ph_add: dict[int, int] = {}
        for arc, d in zip(arcs.tolist(), dy.tolist()):
            if d == 0:
                continue
            for h in a["arc_xd_idx"][a["arc_xd_ptr"][arc]:a["arc_xd_ptr"][arc + 1]].tolist():
                xd_add[h] = xd_add.get(h, 0) + d
            for e in a["arc_phys_idx"][a["arc_phys_ptr"][arc]:a["arc_phys_ptr"][arc + 1]].tolist():
                ph_add[e] = ph_add.get(e, 0) + d
        if any(xd_load[h] + d > a["xd_cap"][h] for h, d in xd_add.items()):
            return None
        if any(phys_load[e] + d > a["phys_cap"][e] for e, d in ph_add.items()):
            return None
        delta = (qk, sh, arcs, xd_add, ph_add)
        self._apply(delta, state, 1)
        return delta

    def _undo(self, delta, state):
        self._apply(delta, state, -1)

    @staticmethod
    def _apply(delta, state, sign):
        flow, sort_load, xd_load, phys_load = state
        qk, sh, arcs, xd_add, ph_add = delta
        sort_load[sh] += sign * qk
        flow[arcs] += sign * qk
        for h, d in xd_add.items():
            xd_load[h] += sign * d
        for e, d in ph_add.items():
            phys_load[e] += sign * d


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    depth: int = field(compare=False)
    fixes: tuple = field(compare=False, default=())


class _Search:
    def __init__(self, model, cfg: SolveConfig):
        self.model = model
        self.cfg = cfg
        self.lp = model.relaxation(strengthen=cfg.strengthen)
        self.root_lb = self.lp.lb.copy()
        self.root_ub = self.lp.ub.copy()
        self.completion = _Completion(model)
        self.greedy = _Greedy(model, self.completion) if cfg.heuristics and not model.slack_keys else None
        self.lock = threading.Lock()
        self.cv = threading.Condition(self.lock)
        self.heap: list[_Node] = []
        self.seq = 0
        self.active = 0
        self.stats = SolveStats()
        self.incumbent = None  # (obj, choice, y, slack)
        self.t0 = time.perf_counter()
        self.stop_status: SolveStatus | None = None
        self.gap_pruned = math.inf  # lowest bound among nodes dropped by the gap test
        self.inflight: dict[int, float] = {}  # bounds of nodes being processed, per thread
        self._emit = self._make_emitter(cfg.progress)

    @staticmethod
    def _make_emitter(progress):
        if progress is None:
            return None
        if callable(progress) and not hasattr(progress, "write"):
            return progress
        return lambda line: (progress.write(line + "\n"), progress.flush())

    # ----- helpers -----
    def _bounds(self, fixes):
        lb = self.root_lb.copy()
        ub = self.root_ub.copy()
        m = self.model
        for fx in fixes:
            tag = fx[0]
            if tag == "path":
                _, k, j = fx
                lo, hi = m.x_start[k], m.x_start[k + 1]
                ub[lo:hi] = 0.0
                ub[j] = 1.0
                lb[j] = 1.0
            elif tag == "ban":
                ub[fx[1]] = 0.0
            elif tag == "ylo":
                lb[fx[1]] = max(lb[fx[1]], fx[2])
            elif tag == "yhi":
                ub[fx[1]] = min(ub[fx[1]], fx[2])
        return lb, ub

    def _inc_value(self):
        return None if self.incumbent is None else self.incumbent[0]

    def _prunable(self, z: float) -> bool:
        inc = self._inc_value()
        if inc is None or not math.isfinite(z):
            return False
        zb = _int_bound(z)
        if zb >= inc:
            return True
        if inc - zb <= self.cfg.gap * abs(inc):
            self.gap_pruned = min(self.gap_pruned, zb)
            return True
        return False

    def _offer(self, choice, polish: bool = False):
        ev = self.completion.evaluate(choice)
        if ev is None:
            return False
        if polish:
            choice, ev = self._one_opt(list(choice), ev)
        obj, y, slack = ev
        with self.lock:
            if self.incumbent is None or obj < self.incumbent[0]:
                self.incumbent = (obj, [int(c) for c in choice], y, slack)
                self._record(force=True)
                return True
        return False

    def _one_opt(self, choice: list[int], ev, passes: int = 3):
        """First-improvement local search moving one commodity to another path at a time."""
        m = self.model
        if m.slack_keys:
            return self._one_opt_slack(choice, ev, passes)
        feasible = self.completion.feasible
        cost = m.x_cost
        for _ in range(passes):
            improved = False
            for k in range(len(m.paths)):
                base = int(m.x_start[k])
                cur = choice[k]
                order = np.argsort(cost[base:int(m.x_start[k + 1])], kind="stable")
                for p in order:
                    p = int(p)
                    if cost[base + p] >= cost[base + cur]:
                        break
                    choice[k] = p
                    if feasible(choice):
                        cur, improved = p, True
                        break
                    choice[k] = cur
            if not improved:
                break
        return choice, self.completion.evaluate(choice)

    def _one_opt_slack(self, choice, ev, passes):
        m = self.model
        ev_fn = self.completion.evaluate
        for _ in range(passes):
            improved = False
            for k in range(len(m.paths)):
                cur = choice[k]
                for p in range(len(m.paths[k])):
                    if p == cur:
                        continue
                    choice[k] = p
                    cand = ev_fn(choice)
                    if cand is not None and cand[0] < ev[0]:
                        ev, cur, improved = cand, p, True
                    else:
                        choice[k] = cur
                choice[k] = cur
            if not improved:
                break
        return choice, ev

    def _global_bound(self, extra: float | None = None) -> float:
        vals = [n.bound for n in self.heap[:1]] + list(self.inflight.values())
        if extra is not None:
            vals.append(extra)
        inc = self._inc_value()
        b = float(self.gap_pruned)
        for v in vals:
            b = min(b, float(_int_bound(v)) if math.isfinite(v) else -math.inf)
        return min(b, inc) if inc is not None else b

    def _record(self, force=False, extra=None):
        s = self.stats
        if not force and (self.cfg.progress_every <= 0 or s.nodes % self.cfg.progress_every):
            return
        inc = self._inc_value()
        b = self._global_bound(extra)
        rec = (s.nodes, b, inc, relative_gap(inc, b), round(time.perf_counter() - self.t0, 3))
        if force:
            s.history.append(rec)
        if self._emit is not None:
            self._emit(",".join(str(v) for v in rec))

    def _choice_of(self, xs: np.ndarray) -> list[int]:
        m = self.model
        return [int(np.argmax(xs[m.x_start[k]:m.x_start[k + 1]])) for k in range(len(m.paths))]

    def _pick_x(self, xs: np.ndarray):
        frac = np.abs(xs - np.rint(xs))
        cand = np.flatnonzero(frac > INT_TOL)
        if cand.size == 0:
            return None
        if self.cfg.branching is BranchRule.FIRST_FRACTIONAL:
            return int(cand[0])
        dist = np.abs(xs[cand] - 0.5)
        return int(cand[np.argmin(dist)])  # argmin returns the first minimum: lowest index

    def _pick_y(self, x: np.ndarray, choice):
        """Fractional container column inside a capacity row broken by rounding containers up."""
        m = self.model
        comp = self.completion
        ys = x[m.n_x:m.n_x + m.n_y]
        frac = np.abs(ys - np.rint(ys)) > INT_TOL
        if not frac.any():
            return None
        cols = m.x_start[:-1] + np.asarray(choice)
        xv = np.zeros(m.n_x)
        xv[cols] = 1.0
        flow = comp.Ax[comp.cont_rows] @ xv
        yc = np.ceil(np.rint(flow) / m.q - 1e-12)
        act = comp.Ax @ xv + comp.Ay @ yc
        rows = comp.cap_rows[act[comp.cap_rows] - comp.rhs[comp.cap_rows] > 1e-9]
        cand = set()
        for r in rows:
            lo, hi = comp.Ay.indptr[r], comp.Ay.indptr[r + 1]
            cand.update(int(j) for j in comp.Ay.indices[lo:hi] if frac[j])
        if not cand:
            cand = set(np.flatnonzero(frac).tolist())
        best = max(sorted(cand), key=lambda j: (min(ys[j] - math.floor(ys[j]), math.ceil(ys[j]) - ys[j]), -j))
        return best

    # ----- node processing -----
    def _solve_node(self, node: _Node):
        """Returns list of child nodes (preferred first) for plunging."""
        m = self.model
        lb, ub = self._bounds(node.fixes)
        res = solve_lp(self.lp, self.cfg.lp_method, lb, ub)
        with self.lock:
            self.stats.nodes += 1
            self.stats.lp_iterations += res.iterations
            if self.stats.root_bound is None and node.depth == 0 and res.status is LPStatus.OPTIMAL:
                self.stats.root_bound = res.objective
        if res.status is LPStatus.UNBOUNDED:
            raise RuntimeError("relaxation unbounded; objective coefficients must be non-negative")
        if res.status is not LPStatus.OPTIMAL:
            return []
        z = res.objective
        with self.lock:
            if self._prunable(z):
                return []
        x = res.x
        xs = x[:m.n_x]
        j = self._pick_x(xs)
        if j is None:
            choice = self._choice_of(xs)
            ev = self.completion.evaluate(choice)
            if ev is not None:
                self._offer(choice)
                if ev[0] <= _int_bound(z):
                    return []
            yj = self._pick_y(x, choice)
            if yj is None:
                return []
            v = x[m.n_x + yj]
            down = _Node(z, 0, node.depth + 1, node.fixes + (("yhi", m.n_x + yj, float(math.floor(v))),))
            up = _Node(z, 0, node.depth + 1, node.fixes + (("ylo", m.n_x + yj, float(math.ceil(v))),))
            return [up, down]
        if self.cfg.heuristics:
            self._offer(self._choice_of(xs), polish=node.depth == 0)
            # the construction is costly; without an incumbent retry it every 64 nodes
            if self.greedy is not None and (node.depth == 0 or (self.incumbent is None and node.seq % 64 == 0)):
                built = self.greedy.build(xs)
                if built is not None:
                    self._offer(built, polish=True)
            with self.lock:
                if self._prunable(z):
                    return []
        k = int(m.x_commodity[j])
        fix = _Node(z, 0, node.depth + 1, node.fixes + (("path", k, j),))
        ban = _Node(z, 0, node.depth + 1, node.fixes + (("ban", j),))
        return [fix, ban] if xs[j] >= 0.5 else [ban, fix]

    def _push(self, node: _Node):
        self.seq += 1
        node.seq = self.seq
        heapq.heappush(self.heap, node)

    def _limits_hit(self) -> SolveStatus | None:
        if self.stats.nodes >= self.cfg.node_limit:
            return SolveStatus.NODE_LIMIT
        if time.perf_counter() - self.t0 >= self.cfg.time_limit:
            return SolveStatus.TIME_LIMIT
        return None

    def worker(self):
        dive: _Node | None = None
        while True:
            with self.cv:
                if dive is not None and self._prunable(dive.bound):
                    dive = None
                if dive is None:
                    while True:
                        if self.stop_status is not None:
                            self.cv.notify_all()
                            return
                        lim = self._limits_hit()
                        if lim is not None:
                            self.stop_status = lim
                            continue
                        # heap is bound-ordered: once its best node is prunable, so is every node
                        if self.heap and self._prunable(self.heap[0].bound):
                            self.heap.clear()
                        if self.heap:
                            dive = heapq.heappop(self.heap)
                            break
                        if self.active == 0:
                            self.cv.notify_all()
                            return
                        self.cv.wait()
                else:
                    lim = self._limits_hit()
                    if lim is not None:
                        self.stop_status = lim
                        self._push(dive)
                        self.cv.notify_all()
                        return
                self.active += 1
                self.inflight[threading.get_ident()] = dive.bound
            children = None
            try:
                children = self._solve_node(dive)
            finally:
                with self.cv:
                    self.active -= 1
                    del self.inflight[threading.get_ident()]
                    self._record(extra=dive.bound if children else None)
            with self.cv:
                if children:
                    for c in children[1:]:
                        self._push(c)
                    dive = children[0]
                else:
                    dive = None
                self.cv.notify_all()


def solve_ip(model, cfg: SolveConfig | None = None, initial: Sequence[int] | None = None):
    """Solve ``model`` to the configured relative gap.

    Returns ``(solution, stats)``; ``solution`` is ``None`` when the model is
    infeasible (or no incumbent was found before a limit). ``initial`` is an
    optional warm-start path choice per commodity.
    """
    from ..model import Solution

    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    search = _Search(model, cfg)
    if search._emit is not None:
        search._emit("node,bound,incumbent,gap,time")
    if initial is not None:
        search._offer(initial, polish=cfg.heuristics)
    stats = search.stats
    if cfg.engine in ("bnb", "auto"):
        if cfg.engine == "auto":
            search.cfg = SolveConfig(**{**cfg.__dict__, "node_limit": min(cfg.node_limit, cfg.handoff_nodes)})
        search._push(_Node(-math.inf, 0, 0, ()))
        if cfg.workers == 1:
            search.worker()
        else:
            threads = [threading.Thread(target=search.worker, daemon=True) for _ in range(cfg.workers)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        search.cfg = cfg
        bound = search._global_bound()
        if search.stop_status is None:
            stats.status = SolveStatus.OPTIMAL if search.incumbent is not None else SolveStatus.INFEASIBLE
        else:
            stats.status = search.stop_status
    else:
        root = solve_lp(search.lp, cfg.lp_method)
        stats.root_bound = root.objective if root.status is LPStatus.OPTIMAL else None
        bound = -math.inf
        stats.status = SolveStatus.NODE_LIMIT

    handoff = cfg.engine == "highs" or (cfg.engine == "auto" and stats.status in
                                         (SolveStatus.NODE_LIMIT, SolveStatus.TIME_LIMIT))
    if handoff:
        from .mip_highs import solve_highs_mip

        stats.engine = "highs" if cfg.engine == "highs" else "bnb+highs"
        remaining = cfg.time_limit - (time.perf_counter() - t0)
        choice, hbound, hstatus, _ = solve_highs_mip(model, cfg.gap, remaining)
        if choice is not None:
            search._offer(choice, polish=False)
        bound = max(bound, hbound)
        if hstatus == "infeasible" and search.incumbent is None:
            stats.status = SolveStatus.INFEASIBLE
        elif hstatus == "optimal":
            stats.status = SolveStatus.OPTIMAL
        else:
            stats.status = SolveStatus.TIME_LIMIT
    else:
        stats.engine = "bnb"

    inc = search._inc_value()
    if inc is not None:
        bound = min(bound, inc)
        if stats.status is not SolveStatus.OPTIMAL and relative_gap(inc, bound) <= cfg.gap:
            stats.status = SolveStatus.OPTIMAL
    stats.seconds = time.perf_counter() - t0
    stats.bound = bound
    if inc is not None or search._emit is not None:
        rec = (stats.nodes, bound, inc, relative_gap(inc, bound), round(stats.seconds, 3))
        stats.history.append(rec)
        if search._emit is not None:
            search._emit(",".join(str(v) for v in rec))
    if inc is None:
        return None, stats
    obj, choice, y, slack = search.incumbent
    sol = Solution(choice, {a: int(v) for a, v in zip(model.y_arcs, y)}, int(obj), float(bound),
                   stats.status.value,
                   {key: int(v) for key, v in zip(model.slack_keys, slack)})
    return sol, stats
