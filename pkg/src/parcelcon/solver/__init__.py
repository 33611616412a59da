"""LP and IP solvers: dense simplex / HiGHS for LPs, branch-and-bound and an exhaustive oracle for the IP."""

from .bnb import BranchRule, SolveConfig, SolveStats, SolveStatus, solve_ip
from .exhaustive import EnumerationLimitError, solve_exhaustive
from .kernels import COMPILED
from .lp import LinearProgram, LPResult, LPStatus, NumericalError, solve_lp

__all__ = [
    "BranchRule", "SolveConfig", "SolveStats", "SolveStatus", "solve_ip",
    "EnumerationLimitError", "solve_exhaustive", "COMPILED",
    "LinearProgram", "LPResult", "LPStatus", "NumericalError", "solve_lp",
]
