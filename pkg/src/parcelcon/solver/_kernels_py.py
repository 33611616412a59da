"""Pure-Python/numpy versions of the hot kernels.

Signatures mirror ``_kernels.pyx`` exactly; ``kernels.py`` picks one at import.
"""

from __future__ import annotations

import numpy as np

COMPILED = False
HARRIS_TOL = 1e-9  # feasibility slack allowed by the first ratio pass


def pivot(T: np.ndarray, r: int, c: int) -> None:
    """Gauss-Jordan pivot of the dense tableau ``T`` on entry (r, c), in place."""
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    nz = np.flatnonzero(col)
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])


def entering_dantzig(cost: np.ndarray, tol: float) -> int:
    j = int(np.argmin(cost))
    return j if cost[j] < -tol else -1


def entering_bland(cost: np.ndarray, tol: float) -> int:
    idx = np.flatnonzero(cost < -tol)
    return int(idx[0]) if idx.size else -1


def leaving_row(T: np.ndarray, c: int, basis: np.ndarray, tol: float, bland: bool = False) -> int:
    """Leaving row for entering column ``c`` (two-pass Harris ratio test).

    Pivots below ``tol`` times the column's largest entry are never taken.
    Among rows within the relaxed minimum ratio the largest pivot wins; under
    Bland's rule the exact minimum ratio is used and ties go to the smallest
    basic index.
    """
    m = T.shape[0] - 1
    col = T[:m, c]
    rhs = T[:m, -1]
    cmax = col.max(initial=0.0)
    rows = np.flatnonzero(col > tol * max(1.0, cmax))
    if rows.size == 0:
        return -1
    ratios = rhs[rows] / col[rows]
    if bland:
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        return int(tied[np.argmin(basis[tied])])
    bound = ((np.maximum(rhs[rows], 0.0) + HARRIS_TOL) / col[rows]).min()
    cand = rows[ratios <= bound]
    return int(cand[np.argmax(col[cand])])


def assignment_feasible(choice, opt_start, opt_qty, opt_arc_ptr, opt_arc_idx, opt_sort_ptr, opt_sort_idx,
                        arc_xd_ptr, arc_xd_idx, arc_phys_ptr, arc_phys_idx,
                        xd_cap, sort_cap, phys_cap, q, flow, sort_load, xd_load, phys_load) -> bool:
    """Check crossdock, sorting and vehicle rows for one path choice per commodity.

    ``choice[k]`` is the option offset within commodity ``k``; container counts
    are ``ceil(flow / q)``. Work arrays are overwritten.
    """
    flow[:] = 0
    sort_load[:] = 0
    xd_load[:] = 0
    phys_load[:] = 0
    for k in range(len(choice)):
        o = opt_start[k] + choice[k]
        qk = opt_qty[o]
        for t in range(opt_arc_ptr[o], opt_arc_ptr[o + 1]):
            flow[opt_arc_idx[t]] += qk
        for t in range(opt_sort_ptr[o], opt_sort_ptr[o + 1]):
            sort_load[opt_sort_idx[t]] += qk
    for h in range(len(sort_load)):
        if sort_load[h] > sort_cap[h]:
            return False
    for a in range(len(flow)):
        f = flow[a]
        if f == 0:
            continue
        y = (f + q - 1) // q
        for t in range(arc_xd_ptr[a], arc_xd_ptr[a + 1]):
            xd_load[arc_xd_idx[t]] += y
        for t in range(arc_phys_ptr[a], arc_phys_ptr[a + 1]):
            phys_load[arc_phys_idx[t]] += y
    for h in range(len(xd_load)):
        if xd_load[h] > xd_cap[h]:
            return False
    for e in range(len(phys_load)):
        if phys_load[e] > phys_cap[e]:
            return False
    return True


def exhaustive_search(radix, opt_start, opt_cost, opt_qty, opt_arc_ptr, opt_arc_idx, opt_sort_ptr, opt_sort_idx,
                      arc_xd_ptr, arc_xd_idx, arc_phys_ptr, arc_phys_idx,
                      xd_cap, sort_cap, phys_cap, q, n_arcs, n_hubs, n_phys):
    """Enumerate every assignment in lexicographic order; return (best_cost, best_choice, evaluated).

    Strict improvement only, so among equal-cost optima the lexicographically
    smallest assignment wins. ``best_cost`` is -1 when nothing is feasible.
    """
    K = len(radix)
    choice = np.zeros(K, dtype=np.int64)
    best = np.zeros(K, dtype=np.int64)
    best_cost = -1
    flow = np.zeros(n_arcs, dtype=np.int64)
    sort_load = np.zeros(n_hubs, dtype=np.int64)
    xd_load = np.zeros(n_hubs, dtype=np.int64)
    phys_load = np.zeros(n_phys, dtype=np.int64)
    evaluated = 0
    while True:
        cost = 0
        for k in range(K):
            cost += opt_cost[opt_start[k] + choice[k]]
        if best_cost < 0 or cost < best_cost:
            evaluated += 1
            if assignment_feasible(choice, opt_start, opt_qty, opt_arc_ptr, opt_arc_idx, opt_sort_ptr,
                                   opt_sort_idx, arc_xd_ptr, arc_xd_idx, arc_phys_ptr, arc_phys_idx,
                                   xd_cap, sort_cap, phys_cap, q, flow, sort_load, xd_load, phys_load):
                best_cost = cost
                best[:] = choice
        # mixed-radix increment, last commodity fastest
        k = K - 1
        while k >= 0:
            choice[k] += 1
            if choice[k] < radix[k]:
                break
            choice[k] = 0
            k -= 1
        if k < 0:
            break
    return best_cost, best, evaluated
