#!/usr/bin/env python3
"""Check closed-form costs and variances against full enumeration, strategy by strategy."""
import sys, pathlib

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent / "src"))

# Dependency checks
try:
    import numpy
except ImportError:
    print("ERROR: pip install numpy")
    sys.exit(1)

from pool_planner.cost import cost
from pool_planner.simulate import enumerate_exact
from pool_planner.strategies import iter_strategies

TOL = 1e-10
DEFAULT_P = (0.01, 0.05, 0.1, 0.3, 0.5)


def validate_formulas(max_m1, prevalences):
    ok = True
    for s in iter_strategies(max_m1):
        passed = True
        for p in prevalences:
            report = cost(s, p)
            mean, var, stages = enumerate_exact(s, p)

            if abs(mean / s.m1 - report.cost) > TOL:
                print(f"  {s} p={p}: FAIL – cost {report.cost!r}, enumeration {mean / s.m1!r}")
                passed = False
                break
            bad = [
                i + 1
                for i, (a, b) in enumerate(zip(stages, report.stage_means))
                if abs(a / s.m1 - b) > TOL
            ]
            if bad:
                print(f"  {s} p={p}: FAIL – stage means differ at stages {bad}")
                passed = False
                break
            if report.variance_per_pool is not None and abs(var - report.variance_per_pool) > TOL * max(1.0, var):
                print(f"  {s} p={p}: FAIL – variance {report.variance_per_pool!r}, enumeration {var!r}")
                passed = False
                break

        if passed:
            print(f"  {s}: OK")
        ok = ok and passed
    return ok

if __name__ == "__main__":
    if len(sys.argv) < 2:
        print("Usage: validate_formulas.py <max_m1 (<= 20)> [p ...]")
        sys.exit(1)
    prevalences = tuple(float(x) for x in sys.argv[2:]) or DEFAULT_P
    sys.exit(0 if validate_formulas(int(sys.argv[1]), prevalences) else 2)
