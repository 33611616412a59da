"""Linear programs: container type, dense two-phase primal simplex, HiGHS dispatch."""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels

FEAS_TOL = 1e-6
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
# dense tableau cells above which ``method="auto"`` hands the LP to HiGHS
DENSE_LIMIT = 400_000


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericalError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """``min c.x  s.t.  A x (sense) rhs,  lb <= x <= ub``; sense entries are '<', '>' or '='."""

    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    var_names: list[str] | None = None
    row_names: list[str] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.sense = np.asarray(self.sense, dtype="<U1")
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("column dimension mismatch")
        if self.sense.shape != (m,) or self.rhs.shape != (m,):
            raise ValueError("row dimension mismatch")
        if not set(self.sense.tolist()) <= {"<", ">", "="}:
            raise ValueError("row sense must be '<', '>' or '='")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def max_violation(self, x: np.ndarray) -> float:
        """Largest row or bound violation of ``x`` (0 when feasible)."""
        act = self.A @ x
        viol = 0.0
        if act.size:
            le = self.sense == "<"
            ge = self.sense == ">"
            eq = self.sense == "="
            if le.any():
                viol = max(viol, float(np.max(act[le] - self.rhs[le], initial=0.0)))
            if ge.any():
                viol = max(viol, float(np.max(self.rhs[ge] - act[ge], initial=0.0)))
            if eq.any():
                viol = max(viol, float(np.max(np.abs(act[eq] - self.rhs[eq]), initial=0.0)))
        viol = max(viol, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        return viol


@dataclass
class LPResult:
    status: LPStatus
    x: np.ndarray | None
    objective: float | None
    iterations: int
    method: str
    seconds: float = 0.0


def solve_lp(lp: LinearProgram, method: str = "auto", lb: np.ndarray | None = None,
             ub: np.ndarray | None = None) -> LPResult:
    """Solve ``lp``, optionally with overriding variable bounds.

    ``method`` is "simplex" (dense two-phase primal simplex in this package),
    "highs" (scipy's HiGHS) or "auto", which picks the dense simplex whenever
    its tableau stays under ``DENSE_LIMIT`` cells.
    """
    lb = lp.lb if lb is None else lb
    ub = lp.ub if ub is None else ub
    if np.any(lb > ub + FEAS_TOL):
        return LPResult(LPStatus.INFEASIBLE, None, None, 0, "bounds")
    if method == "auto":
        m, n = lp.shape
        extra = int(np.isfinite(ub).sum())
        method = "simplex" if (m + extra + 1) * (n + 2 * m + extra + 1) <= DENSE_LIMIT else "highs"
    t0 = time.perf_counter()
    if method == "simplex":
        res = _solve_dense(lp, lb, ub)
    elif method == "highs":
        res = _solve_highs(lp, lb, ub)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    res.seconds = time.perf_counter() - t0
    return res


def _solve_highs(lp: LinearProgram, lb, ub) -> LPResult:
    from scipy.optimize import linprog

    le = lp.sense == "<"
    ge = lp.sense == ">"
    eq = lp.sense == "="
    A_ub = sp.vstack([lp.A[le], -lp.A[ge]]).tocsr() if (le.any() or ge.any()) else None
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]]) if A_ub is not None else None
    A_eq = lp.A[eq] if eq.any() else None
    b_eq = lp.rhs[eq] if eq.any() else None
    bounds = np.column_stack([np.where(np.isfinite(lb), lb, -np.inf), np.where(np.isfinite(ub), ub, np.inf)])
    r = linprog(lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs-ds")
    iters = int(getattr(r, "nit", 0) or 0)
    if r.status == 0:
        return LPResult(LPStatus.OPTIMAL, r.x, float(r.fun), iters, "highs")
    if r.status in (2, 3):
        # HiGHS presolve may report "infeasible or unbounded"; a zero-cost solve decides
        f = linprog(np.zeros_like(lp.c), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                    method="highs-ds")
        status = LPStatus.UNBOUNDED if f.status == 0 else LPStatus.INFEASIBLE
        return LPResult(status, None, None, iters, "highs")
    raise NumericalError(f"HiGHS stopped with status {r.status}: {r.message}")


class _Tableau:
    """Dense two-phase primal simplex on a standard-form tableau."""

    def __init__(self, T: np.ndarray, basis: np.ndarray, max_iter: int):
        self.T = T
        self.basis = basis
        self.max_iter = max_iter
        self.iterations = 0

    def run(self, ncols: int) -> bool:
        """Optimise over the first ``ncols`` columns; False when unbounded."""
        T = self.T
        stall = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalError(f"simplex iteration limit {self.max_iter} reached")
            cost = np.ascontiguousarray(T[-1, :ncols])
            j = kernels.entering_bland(cost, OPT_TOL) if bland else kernels.entering_dantzig(cost, OPT_TOL)
            if j < 0:
                return True
            r = kernels.leaving_row(T, j, self.basis, PIVOT_TOL, bland)
            if r < 0:
                return False
            step = T[r, -1] / T[r, j]
            kernels.pivot(T, r, j)
            self.basis[r] = j
            self.iterations += 1
            # Bland's rule only while pivots are degenerate
            if step <= FEAS_TOL * 1e-3:
                stall += 1
                if stall >= 5:
                    bland = True
            else:
                stall = 0
                bland = False


def _solve_dense(lp: LinearProgram, lb: np.ndarray, ub: np.ndarray) -> LPResult:
    A = lp.A.toarray()
    m, n = A.shape
    c = lp.c

    # column map: x_j = shift_j + sign_j * z_col  (+ second column for free vars)
    cols_A = []
    cols_c = []
    shift = np.zeros(n)
    recover = []  # (var, col, sign)
    ub_rows = []  # (col, bound)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        a = A[:, j]
        if np.isfinite(lo):
            shift[j] = lo
            col = len(cols_A)
            cols_A.append(a)
            cols_c.append(c[j])
            recover.append((j, col, 1.0))
            if np.isfinite(hi):
                ub_rows.append((col, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            col = len(cols_A)
            cols_A.append(-a)
            cols_c.append(-c[j])
            recover.append((j, col, -1.0))
        else:
            col = len(cols_A)
            cols_A.append(a)
            cols_c.append(c[j])
            cols_A.append(-a)
            cols_c.append(-c[j])
            recover.append((j, col, 1.0))
            recover.append((j, col + 1, -1.0))
    nz = len(cols_A)
    Az = np.column_stack(cols_A) if nz else np.zeros((m, 0))
    cz = np.asarray(cols_c, dtype=float)
    b = lp.rhs - A @ shift
    sense = list(lp.sense)
    rows = [Az[i] for i in range(m)]
    for col, bound in ub_rows:
        row = np.zeros(nz)
        row[col] = 1.0
        rows.append(row)
        b = np.append(b, bound)
        sense.append("<")
    M = len(rows)
    Ar = np.array(rows).reshape(M, nz)
    b = np.asarray(b, dtype=float)
    neg = b < 0
    Ar[neg] *= -1
    b[neg] *= -1
    sense = [({"<": ">", ">": "<"}.get(s, s) if flip else s) for s, flip in zip(sense, neg)]

    n_slack = sum(s != "=" for s in sense)
    n_art = sum(s != "<" for s in sense)
    width = nz + n_slack + n_art
    T = np.zeros((M + 1, width + 1))
    T[:M, :nz] = Ar
    T[:M, -1] = b
    basis = np.zeros(M, dtype=np.int64)
    s_col = nz
    a_col = nz + n_slack
    art_rows = []
    for i, s in enumerate(sense):
        if s == "<":
            T[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        elif s == ">":
            T[i, s_col] = -1.0
            s_col += 1
            T[i, a_col] = 1.0
            basis[i] = a_col
            art_rows.append(i)
            a_col += 1
        else:
            T[i, a_col] = 1.0
            basis[i] = a_col
            art_rows.append(i)
            a_col += 1

    max_iter = 50 * (M + width) + 1000
    tab = _Tableau(T, basis, max_iter)
    first_art = nz + n_slack
    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        T[-1, first_art:width] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        tab.run(width)
        if -T[-1, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LPResult(LPStatus.INFEASIBLE, None, None, tab.iterations, "simplex")
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = np.ones(M, dtype=bool)
        for i in range(M):
            if basis[i] >= first_art:
                cand = np.flatnonzero(np.abs(T[i, :first_art]) > PIVOT_TOL)
                if cand.size:
                    kernels.pivot(T, i, int(cand[0]))
                    basis[i] = int(cand[0])
                else:
                    keep[i] = False
        rows_keep = np.append(np.flatnonzero(keep), M)
        T = np.ascontiguousarray(T[np.ix_(rows_keep, np.r_[0:first_art, width])])
        basis = np.ascontiguousarray(basis[keep])
        tab = _Tableau(T, basis, max_iter - tab.iterations)
        tab.iterations = 0
        iters_phase1 = max_iter - tab.max_iter
    else:
        T = np.ascontiguousarray(T[:, np.r_[0:first_art, width]])
        tab = _Tableau(T, basis, max_iter)
        iters_phase1 = 0

    # phase 2
    T = tab.T
    cost = np.zeros(T.shape[1])
    cost[:nz] = cz
    T[-1] = cost
    for i, bj in enumerate(tab.basis):
        if T[-1, bj] != 0.0:
            T[-1] -= T[-1, bj] * T[i]
    bounded = tab.run(T.shape[1] - 1)
    iters = iters_phase1 + tab.iterations
    if not bounded:
        return LPResult(LPStatus.UNBOUNDED, None, None, iters, "simplex")

    z = np.zeros(T.shape[1] - 1)
    z[tab.basis] = T[:-1, -1]
    x = shift.copy()
    for j, col, sign in recover:
        x[j] += sign * z[col]
    x = np.where(np.abs(x) < 1e-12, 0.0, x)
    if lp.max_violation(x) > 1e3 * FEAS_TOL:
        raise NumericalError(
            f"dense simplex lost feasibility (max violation {lp.max_violation(x):.3g}, "
            f"{T.shape[0] - 1} rows x {T.shape[1] - 1} cols)"
        )
    return LPResult(LPStatus.OPTIMAL, x, float(c @ x), iters, "simplex")
