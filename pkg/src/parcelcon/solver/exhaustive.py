"""Brute-force oracle: try every path assignment of a small model."""

from __future__ import annotations

import math

from . import kernels

ENUMERATION_LIMIT = 10**6


class EnumerationLimitError(ValueError):
    pass


def solve_exhaustive(model, limit: int = ENUMERATION_LIMIT):
    """Best assignment by full enumeration, containers set to ceil(flow / q).

    Among equal-cost optima the lexicographically smallest assignment vector
    wins. Returns ``None`` when no assignment satisfies the capacity rows.
    """
    from ..model import solution_from_choice

    if model.slack_keys:
        raise ValueError("exhaustive search does not handle slack columns")
    total = math.prod(len(p) for p in model.paths)
    if total > limit:
        raise EnumerationLimitError(f"{total} assignments exceed the enumeration limit {limit}")
    arrs = model.kernel_arrays()
    best_cost, best, _ = kernels.exhaustive_search(**arrs)
    if best_cost < 0:
        return None
    sol = solution_from_choice(model, best)
    assert sol.objective == best_cost
    return sol
