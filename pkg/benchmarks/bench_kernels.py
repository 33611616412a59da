"""Compiled kernels vs the pure-Python fallback on the same workloads.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--seeds N]

Each backend runs in its own interpreter (the backend is chosen at import
time), on the tiny randomized instances used by the test-suite:

* simplex   dense two-phase simplex on every LP relaxation
* bnb       built-in branch-and-bound at gap 0
* exhaustive  full enumeration oracle
"""

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent / "tests"))


def _workload(seeds: int, repeat: int) -> dict:
    from _instances import tiny_model
    from parcelcon.solver import COMPILED, SolveConfig, solve_exhaustive, solve_ip, solve_lp

    models = [tiny_model(s) for s in range(seeds)]
    lps = [m.relaxation() for m in models]
    jobs = {
        "simplex": lambda: [solve_lp(lp, method="simplex") for lp in lps],
        "bnb": lambda: [solve_ip(m, SolveConfig(gap=0.0, engine="bnb")) for m in models],
        "exhaustive": lambda: [solve_exhaustive(m) for m in models],
    }
    out = {"compiled": COMPILED}
    for name, fn in jobs.items():
        fn()  # warm-up
        best = float("inf")
        for _ in range(repeat):
            t = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t)
        out[name] = best
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seeds", type=int, default=40)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        print(json.dumps(_workload(args.seeds, args.repeat)))
        return 0

    results = {}
    for label, pure in (("compiled", False), ("fallback", True)):
        env = dict(os.environ)
        env.pop("PARCELCON_PURE_PYTHON", None)
        if pure:
            env["PARCELCON_PURE_PYTHON"] = "1"
        r = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat),
                            "--seeds", str(args.seeds)], env=env, capture_output=True, text=True, check=True)
        results[label] = json.loads(r.stdout.strip().splitlines()[-1])
    if not results["compiled"]["compiled"]:
        print("warning: extension not built; both columns use the fallback", file=sys.stderr)
    print(f"{'workload':<12}{'compiled s':>12}{'fallback s':>12}{'speed-up':>10}")
    for name in ("simplex", "bnb", "exhaustive"):
        c, f = results["compiled"][name], results["fallback"][name]
        print(f"{name:<12}{c:>12.4f}{f:>12.4f}{f / c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
