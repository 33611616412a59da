"""Hand-off of the consolidation IP to HiGHS's MIP solver (through scipy)."""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp


def solve_highs_mip(model, gap: float, time_limit: float):
    """Return ``(choice, dual_bound, status)``; ``choice`` is None when HiGHS found nothing.

    Path choices are read off the MIP solution; containers and objective are
    recomputed exactly by the caller.
    """
    lp = model.relaxation()
    lo = np.where(lp.sense == "<", -np.inf, lp.rhs)
    hi = np.where(lp.sense == ">", np.inf, lp.rhs)
    integrality = np.ones(model.n_cols)
    integrality[model.n_x + model.n_y:] = 0  # slack columns are integral whenever x and y are
    t0 = time.perf_counter()
    res = milp(lp.c, constraints=LinearConstraint(lp.A, lo, hi), integrality=integrality,
               bounds=Bounds(lp.lb, lp.ub),
               options={"mip_rel_gap": gap, "time_limit": max(1e-3, time_limit), "disp": False})
    elapsed = time.perf_counter() - t0
    bound = getattr(res, "mip_dual_bound", None)
    bound = -math.inf if bound is None or not np.isfinite(bound) else float(bound)
    if res.x is None:
        status = "infeasible" if res.status == 2 else "time_limit"
        return None, bound, status, elapsed
    xs = res.x[: model.n_x]
    choice = [int(np.argmax(xs[model.x_start[k]:model.x_start[k + 1]])) for k in range(len(model.paths))]
    status = "optimal" if res.status == 0 else "time_limit"
    return choice, bound, status, elapsed
