# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the simplex and exhaustive-search kernels.

Signatures match ``_kernels_py``; see that module for the contracts.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

COMPILED = True

ctypedef cnp.int64_t i64

cdef double HARRIS_TOL = 1e-9  # feasibility slack allowed by the first ratio pass


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t c):
    cdef Py_ssize_t m = T.shape[0], n = T.shape[1], i, j
    cdef double p = T[r, c], f
    with nogil:
        for j in range(n):
            T[r, j] /= p
        for i in range(m):
            if i == r:
                continue
            f = T[i, c]
            if f == 0.0:
                continue
            for j in range(n):
                T[i, j] -= f * T[r, j]


def entering_dantzig(double[::1] cost, double tol):
    cdef Py_ssize_t j, best = -1, n = cost.shape[0]
    cdef double v = -tol
    for j in range(n):
        if cost[j] < v:
            v = cost[j]
            best = j
    return best


def entering_bland(double[::1] cost, double tol):
    cdef Py_ssize_t j, n = cost.shape[0]
    for j in range(n):
        if cost[j] < -tol:
            return j
    return -1


def leaving_row(double[:, ::1] T, Py_ssize_t c, i64[::1] basis, double tol, bint bland=False):
    cdef Py_ssize_t m = T.shape[0] - 1, last = T.shape[1] - 1, i, best = -1
    cdef double ratio, best_ratio = 0.0, cut, cmax = 0.0, thr, r
    cdef bint found = False
    for i in range(m):
        if T[i, c] > cmax:
            cmax = T[i, c]
    thr = tol * (cmax if cmax > 1.0 else 1.0)
    for i in range(m):
        if T[i, c] > thr:
            if bland:
                ratio = T[i, last] / T[i, c]
            else:
                r = T[i, last] if T[i, last] > 0.0 else 0.0
                ratio = (r + HARRIS_TOL) / T[i, c]
            if not found or ratio < best_ratio:
                best_ratio = ratio
                found = True
    if not found:
        return -1
    if bland:
        cut = best_ratio + 1e-12 * (fabs(best_ratio) if fabs(best_ratio) > 1.0 else 1.0)
        for i in range(m):
            if T[i, c] > thr and T[i, last] / T[i, c] <= cut:
                if best < 0 or basis[i] < basis[best]:
                    best = i
        return best
    for i in range(m):
        if T[i, c] > thr and T[i, last] / T[i, c] <= best_ratio:
            if best < 0 or T[i, c] > T[best, c]:
                best = i
    return best


cdef bint _feasible(i64[::1] choice, i64[::1] opt_start, i64[::1] opt_qty,
                    i64[::1] opt_arc_ptr, i64[::1] opt_arc_idx, i64[::1] opt_sort_ptr, i64[::1] opt_sort_idx,
                    i64[::1] arc_xd_ptr, i64[::1] arc_xd_idx, i64[::1] arc_phys_ptr, i64[::1] arc_phys_idx,
                    i64[::1] xd_cap, i64[::1] sort_cap, i64[::1] phys_cap, i64 q,
                    i64[::1] flow, i64[::1] sort_load, i64[::1] xd_load, i64[::1] phys_load) nogil:
    cdef Py_ssize_t k, t, h, a, e, o
    cdef i64 qk, f, y
    flow[:] = 0
    sort_load[:] = 0
    xd_load[:] = 0
    phys_load[:] = 0
    for k in range(choice.shape[0]):
        o = opt_start[k] + choice[k]
        qk = opt_qty[o]
        for t in range(opt_arc_ptr[o], opt_arc_ptr[o + 1]):
            flow[opt_arc_idx[t]] += qk
        for t in range(opt_sort_ptr[o], opt_sort_ptr[o + 1]):
            sort_load[opt_sort_idx[t]] += qk
    for h in range(sort_load.shape[0]):
        if sort_load[h] > sort_cap[h]:
            return False
    for a in range(flow.shape[0]):
        f = flow[a]
        if f == 0:
            continue
        y = (f + q - 1) // q
        for t in range(arc_xd_ptr[a], arc_xd_ptr[a + 1]):
            xd_load[arc_xd_idx[t]] += y
        for t in range(arc_phys_ptr[a], arc_phys_ptr[a + 1]):
            phys_load[arc_phys_idx[t]] += y
    for h in range(xd_load.shape[0]):
        if xd_load[h] > xd_cap[h]:
            return False
    for e in range(phys_load.shape[0]):
        if phys_load[e] > phys_cap[e]:
            return False
    return True


def assignment_feasible(i64[::1] choice, i64[::1] opt_start, i64[::1] opt_qty,
                        i64[::1] opt_arc_ptr, i64[::1] opt_arc_idx, i64[::1] opt_sort_ptr, i64[::1] opt_sort_idx,
                        i64[::1] arc_xd_ptr, i64[::1] arc_xd_idx, i64[::1] arc_phys_ptr, i64[::1] arc_phys_idx,
                        i64[::1] xd_cap, i64[::1] sort_cap, i64[::1] phys_cap, i64 q,
                        i64[::1] flow, i64[::1] sort_load, i64[::1] xd_load, i64[::1] phys_load):
    return _feasible(choice, opt_start, opt_qty, opt_arc_ptr, opt_arc_idx, opt_sort_ptr, opt_sort_idx,
                     arc_xd_ptr, arc_xd_idx, arc_phys_ptr, arc_phys_idx, xd_cap, sort_cap, phys_cap, q,
                     flow, sort_load, xd_load, phys_load)


def exhaustive_search(i64[::1] radix, i64[::1] opt_start, i64[::1] opt_cost, i64[::1] opt_qty,
                      i64[::1] opt_arc_ptr, i64[::1] opt_arc_idx, i64[::1] opt_sort_ptr, i64[::1] opt_sort_idx,
                      i64[::1] arc_xd_ptr, i64[::1] arc_xd_idx, i64[::1] arc_phys_ptr, i64[::1] arc_phys_idx,
                      i64[::1] xd_cap, i64[::1] sort_cap, i64[::1] phys_cap, i64 q,
                      Py_ssize_t n_arcs, Py_ssize_t n_hubs, Py_ssize_t n_phys):
    cdef Py_ssize_t K = radix.shape[0], k
    choice_arr = np.zeros(K, dtype=np.int64)
    best_arr = np.zeros(K, dtype=np.int64)
    flow_arr = np.zeros(n_arcs, dtype=np.int64)
    sort_arr = np.zeros(n_hubs, dtype=np.int64)
    xd_arr = np.zeros(n_hubs, dtype=np.int64)
    phys_arr = np.zeros(n_phys, dtype=np.int64)
    cdef i64[::1] choice = choice_arr, best = best_arr
    cdef i64[::1] flow = flow_arr, sort_load = sort_arr, xd_load = xd_arr, phys_load = phys_arr
    cdef i64 best_cost = -1, cost, evaluated = 0
    with nogil:
        while True:
            cost = 0
            for k in range(K):
                cost += opt_cost[opt_start[k] + choice[k]]
            if best_cost < 0 or cost < best_cost:
                evaluated += 1
                if _feasible(choice, opt_start, opt_qty, opt_arc_ptr, opt_arc_idx, opt_sort_ptr, opt_sort_idx,
                             arc_xd_ptr, arc_xd_idx, arc_phys_ptr, arc_phys_idx, xd_cap, sort_cap, phys_cap, q,
                             flow, sort_load, xd_load, phys_load):
                    best_cost = cost
                    best[:] = choice
            k = K - 1
            while k >= 0:
                choice[k] += 1
                if choice[k] < radix[k]:
                    break
                choice[k] = 0
                k -= 1
            if k < 0:
                break
    return best_cost, best_arr, evaluated
