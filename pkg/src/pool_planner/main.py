#!/usr/bin/env python3
"""
CLI for planning nested pool tests: optimal strategies, costs, transition
tables, cost sweeps, simulation and the check of the two-candidate conjecture.

Data goes to stdout (JSON for single results, CSV for tables); diagnostics and
progress bars go to stderr.
"""
import argparse
import json
import logging
import math
import pathlib
import sys
from dataclasses import asdict
from logging.handlers import RotatingFileHandler
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .constants import RHO0, TREE_MAX_NODES, Family
from .cost import cost
from .errors import OutOfRangeError, PoolingError
from .linearized import linear_stage_cost, optimal_linear_stages
from .optimizer import (
    INDIVIDUAL,
    conjecture_sweep,
    conjectured_optimal,
    exhaustive_optimal,
    four_candidate_optimal,
    stage_count,
    theorem_bounds,
    transition_table,
)
from .simulate import monte_carlo
from .strategies import NestedStrategy, family

LOG = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_UNCERTIFIED = 3
EXIT_VIOLATION = 4
CSV_FLOAT_FORMAT = "%.12g"


def init_logging(verbose: bool, log_file: Optional[pathlib.Path] = None):
    level = logging.DEBUG if verbose else logging.INFO
    fmt = "%(asctime)s | %(levelname)s | %(message)s"
    datefmt = "%H:%M:%S"
    logging.basicConfig(
        level=level,
        format=fmt,
        datefmt=datefmt,
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        fh = RotatingFileHandler(log_file, maxBytes=5_000_000, backupCount=3)
        fh.setFormatter(logging.Formatter(fmt, datefmt))
        logging.getLogger().addHandler(fh)


class _OneLineParser(argparse.ArgumentParser):
    """Usage errors as a single stderr line, exit status 2."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_pools(text: str) -> NestedStrategy:
    text = text.strip()
    if not text:
        return INDIVIDUAL
    try:
        pools = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise PoolingError(f"pool list must be comma-separated integers, got {text!r}") from None
    return NestedStrategy(pools)


def _check_open_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise OutOfRangeError(f"--p must lie in (0, 1), got {p!r}")


def render_tree(s: NestedStrategy, max_nodes: int = TREE_MAX_NODES) -> str:
    """Indented pool labels (1), (1,i2), ... with sizes, at most ``max_nodes`` lines."""
    if s.k == 0:
        return "individual testing"
    total = sum(s.m1 // m for m in s.pools)
    lines = []
    for label, size in s.pool_labels():
        if len(lines) == max_nodes:
            lines.append(f"... ({total - max_nodes} more pools)")
            break
        indent = "  " * (len(label) - 1)
        lines.append(f"{indent}({','.join(map(str, label))}) size {size}")
    return "\n".join(lines)


def _family_label(s: NestedStrategy) -> str:
    if s.k == 0:
        return "none"
    return Family.M33.value if s == family(Family.M33, s.k) else Family.M34.value


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")


def _emit_csv(frame: pd.DataFrame) -> None:
    frame.to_csv(sys.stdout, index=False, float_format=CSV_FLOAT_FORMAT)


# --------------------------------------------------------------------------- #
# Commands                                                                    #
# --------------------------------------------------------------------------- #
def cmd_plan(args) -> int:
    p = args.p
    _check_open_p(p)
    if args.mode == "conjecture":
        s, report = conjectured_optimal(p)
    elif args.mode == "four_candidate":
        if p >= RHO0:
            s, report = INDIVIDUAL, cost(INDIVIDUAL, p)
        else:
            s, report, record = four_candidate_optimal(p)
            LOG.info("phi(%g) = %.6g (certified: %s)", p, record.phi, record.sign_certified)
    else:
        s, report = exhaustive_optimal(p, args.max_pool)
    _emit_json(
        {
            "p": p,
            "mode": args.mode,
            "k": s.k,
            "pools": list(s.pools),
            "cost": report.cost,
            "stage_means": list(report.stage_means),
            "tree": render_tree(s),
        }
    )
    return 0


def cmd_cost(args) -> int:
    s = parse_pools(args.pools)
    report = cost(s, args.p)
    _emit_json(
        {
            "cost": report.cost,
            "stage_means": list(report.stage_means),
            "variance_per_pool": report.variance_per_pool,
        }
    )
    return 0


def cmd_transitions(args) -> int:
    _emit_csv(transition_table(args.kmax).to_frame())
    return 0


def cmd_sweep(args) -> int:
    if not 0.0 < args.pmin < args.pmax < 1.0:
        raise OutOfRangeError(f"need 0 < pmin < pmax < 1, got pmin={args.pmin}, pmax={args.pmax}")
    if args.points < 1:
        raise OutOfRangeError(f"--points must be >= 1, got {args.points}")
    space = np.geomspace if args.log else np.linspace
    rows = []
    for p in space(args.pmin, args.pmax, args.points):
        s, report = conjectured_optimal(float(p))
        rows.append((float(p), report.cost, s.k, _family_label(s)))
    _emit_csv(pd.DataFrame(rows, columns=["p", "cost", "k", "family"]))
    return 0


def cmd_simulate(args) -> int:
    s = parse_pools(args.pools)
    report = monte_carlo(s, args.p, args.replications, args.seed, threads=args.threads)
    payload = asdict(report)
    # m1 is implied by --pools
    del payload["m1"]
    _emit_json(payload)
    return 0


def cmd_conjecture(args) -> int:
    records = conjecture_sweep(args.jmin, args.jmax)
    frame = pd.DataFrame(
        [
            (j, r.p, r.phi, r.sign_certified, r.winner.value)
            for j, r in zip(range(args.jmin, args.jmax + 1), records)
        ],
        columns=["j", "p", "phi", "sign_certified", "winner"],
    )
    _emit_csv(frame)
    if any(r.sign_certified and r.phi >= 0.0 for r in records):
        LOG.error("certified phi >= 0: the four-candidate optimum has multiplier 2")
        return EXIT_VIOLATION
    if not all(r.sign_certified for r in records):
        return EXIT_UNCERTIFIED
    return 0


def cmd_linearize(args) -> int:
    plan = optimal_linear_stages(args.p)
    ks = sorted({math.floor(plan.k_sharp), math.ceil(plan.k_sharp)})
    _emit_json(
        {
            "k_sharp": plan.k_sharp,
            "L_sharp": plan.L_sharp,
            "m_sharp": list(plan.m_sharp),
            "integer_comparison": [{"k": k, "L": linear_stage_cost(k, args.p)} for k in ks],
        }
    )
    return 0


def cmd_bounds(args) -> int:
    p = args.p
    if not 0.0 < p < RHO0:
        raise OutOfRangeError(f"--p must lie in (0, {RHO0:.6f}), got {p!r}")
    k3 = stage_count(Family.M33, p)
    _, optimal, _ = four_candidate_optimal(p)
    bounds = theorem_bounds(p)
    _emit_json(
        {
            "p": p,
            "k3": k3,
            "k3_cost": cost(family(Family.M33, k3), p).cost,
            "optimal_cost": optimal.cost,
            "upper": bounds.upper,
            "lower": bounds.lower,
            "gap_bound": bounds.gap_bound,
        }
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _OneLineParser(prog="pool-plan", description="Plan nested pool tests")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--log-file", type=pathlib.Path, help="Also log to this rotating file")
    parser.add_argument(
        "--threads", type=int, default=None, help="Worker threads for simulation (default: all cores)"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_OneLineParser)

    plan = sub.add_parser("plan", help="Optimal strategy for a prevalence")
    plan.add_argument("--p", type=float, required=True)
    plan.add_argument(
        "--mode", choices=["conjecture", "four_candidate", "exhaustive"], default="conjecture"
    )
    plan.add_argument("--max-pool", type=int, default=81, help="Largest m1 for --mode exhaustive")
    plan.set_defaults(func=cmd_plan)

    cst = sub.add_parser("cost", help="Cost and variance of a pool chain")
    cst.add_argument("--p", type=float, required=True)
    cst.add_argument("--pools", required=True, help="Comma-separated pool sizes, e.g. 27,9,3")
    cst.set_defaults(func=cmd_cost)

    trans = sub.add_parser("transitions", help="Transition points lambda_k, rho_{k-1} as CSV")
    trans.add_argument("--kmax", type=int, default=6)
    trans.set_defaults(func=cmd_transitions)

    sweep = sub.add_parser("sweep", help="Conjectured optimal cost over a p grid as CSV")
    sweep.add_argument("--pmin", type=float, required=True)
    sweep.add_argument("--pmax", type=float, required=True)
    sweep.add_argument("--points", type=int, default=100)
    sweep.add_argument("--log", action="store_true", help="Log-spaced grid")
    sweep.set_defaults(func=cmd_sweep)

    sim = sub.add_parser("simulate", help="Monte Carlo estimate of the test count")
    sim.add_argument("--p", type=float, required=True)
    sim.add_argument("--pools", required=True)
    sim.add_argument("--replications", type=int, default=100_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.set_defaults(func=cmd_simulate)

    conj = sub.add_parser("conjecture", help="Sign of phi at p = 2**-j as CSV")
    conj.add_argument("--jmin", type=int, default=2)
    conj.add_argument("--jmax", type=int, default=51)
    conj.set_defaults(func=cmd_conjecture)

    lin = sub.add_parser("linearize", help="Optimum of the linearized cost")
    lin.add_argument("--p", type=float, required=True)
    lin.set_defaults(func=cmd_linearize)

    bnd = sub.add_parser("bounds", help="Upper/lower bounds on the optimal cost")
    bnd.add_argument("--p", type=float, required=True)
    bnd.set_defaults(func=cmd_bounds)
    return parser


def cli(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    init_logging(args.verbose, args.log_file)
    try:
        return args.func(args)
    except PoolingError as exc:
        sys.stderr.write(f"pool-plan {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except Exception:
        LOG.exception("%s failed", args.command)
        raise


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
