"""Coarse-grained entropy of piecewise-linear interval maps.

Exit codes: 0 success, 2 validation failure, 3 some N failed in a sweep.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import conjugacy as cj
from .chain import build_transition_matrix, verify_doubly_stochastic
from .entropy import LOG2, shannon_entropy
from .maps import MapError, verify_lebesgue_invariance
from .noise import COUPLINGS, empirical_entropy, max_entry_distance, simulate_chain
from .partition import uniform_partition
from .sweep import (
    SweepConfig,
    ValidationFailure,
    load_map,
    parse_n_list,
    parse_schedule,
    parse_simulate,
    run_simulation_check,
    run_sweep,
    write_simulation_csv,
    write_sweep_csv,
)

EXIT_OK, EXIT_VALIDATION, EXIT_PARTIAL = 0, 2, 3


def _n_values(args) -> list:
    if args.n_list:
        return parse_n_list(args.n_list)
    return parse_schedule(args.n_schedule)


def cmd_sweep(args) -> int:
    cfg = SweepConfig(
        args.map,
        _n_values(args),
        mode=args.mode,
        out=args.out,
        threads=args.threads,
        simulate=parse_simulate(args.simulate) if args.simulate else None,
        bits=args.bits,
        timing=not args.no_timing,
    )
    result = run_sweep(cfg)
    if not args.out:
        write_sweep_csv(result, sys.stdout, bits=args.bits, timing=cfg.timing)
    if cfg.simulate:
        checks = run_simulation_check(cfg)
        if args.out:
            path = args.out.rsplit(".", 1)[0] + "_sim.csv"
            with open(path, "w", newline="") as fh:
                write_simulation_csv(checks, fh, bits=args.bits)
        else:
            write_simulation_csv(checks, sys.stdout, bits=args.bits)
    for row in result.failed:
        print(f"N={row.N}: {row.error}", file=sys.stderr)
    return EXIT_PARTIAL if result.failed else EXIT_OK


def cmd_simulate(args) -> int:
    f = load_map(args.map)
    delta = uniform_partition(args.N)
    traj = simulate_chain(f, delta, args.steps, args.seed, coupling=args.coupling)
    if args.out:
        traj.write_csv(args.out)
    est = empirical_entropy(traj)
    summary = {"N": args.N, "T": traj.T, "seed": args.seed, "coupling": args.coupling,
               "H_empirical": est.value, "unobserved_rows": len(est.unobserved)}
    print(json.dumps(summary), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_matrix(args) -> int:
    f = load_map(args.map)
    P = build_transition_matrix(f, uniform_partition(args.N), mode=args.mode)
    if args.out:
        P.write_triplets(args.out)
    H = shannon_entropy(P)
    print(json.dumps({
        "N": P.N, "mode": P.mode, "nnz": P.nnz,
        "straddling_rows": list(P.straddling),
        "doubly_stochastic": verify_doubly_stochastic(P),
        "H_delta": H / LOG2 if args.bits else H,
    }))
    return EXIT_OK


def cmd_validate(args) -> int:
    f = load_map(args.map)
    rep = verify_lebesgue_invariance(f)
    print(json.dumps({
        "holds": rep.holds,
        "witness": None if rep.witness is None else [str(v) for v in rep.witness],
        "covering_sum": None if rep.covering_sum is None else str(rep.covering_sum),
        "min_slope": str(rep.min_slope),
        "unchecked": list(rep.unchecked),
    }))
    return EXIT_OK if rep.holds else EXIT_VALIDATION


def cmd_conjugacy(args) -> int:
    f = load_map(args.map)
    hom = cj.get_homeomorphism(args.conjugacy)
    direct = None
    if hom is cj.SINE_SQUARED and f == cj.logistic_system().base:
        direct = cj.logistic_system().direct
    sys_ = cj.ConjugateSystem(f, hom, direct)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["N", "conjugacy", "H_base", "H_conjugate", "matrix_identical", "T", "seed", "mc_max_entry_distance"])
        for N in parse_n_list(args.n_list):
            delta = uniform_partition(N)
            P = build_transition_matrix(f, delta)
            Q = cj.transition_matrix_conjugate(sys_, delta)
            dist = ""
            if args.steps:
                M = cj.monte_carlo_conjugate_matrix(sys_, delta, args.steps, args.seed)
                observed = [n for n in range(1, N + 1) if n not in M.unobserved]
                dist = repr(max_entry_distance(P, M, observed))
            w.writerow([N, hom.label, repr(shannon_entropy(P)), repr(shannon_entropy(Q)),
                        P == Q, args.steps, args.seed, dist])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coarsegrain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="entropy of the induced chain over a schedule of N")
    s.add_argument("--map", required=True, help="map-spec JSON file, tent:m=<slope> or doubling")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--n-schedule", help="geometric schedule, e.g. 2x:4..65536")
    g.add_argument("--n-list", help="comma-separated N values")
    s.add_argument("--mode", choices=("exact", "float"))
    s.add_argument("--out", help="CSV output path (stdout if omitted)")
    s.add_argument("--bits", action="store_true", help="report entropies in bits")
    s.add_argument("--simulate", help="T=<steps>,seed=<seed>: compare with simulated chains")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--no-timing", action="store_true", help="leave build_ms empty for reproducible output")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("simulate", help="sample a trajectory of the induced chain")
    s.add_argument("--map", required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--coupling", choices=COUPLINGS, default="marginal")
    s.add_argument("--out", help="trajectory CSV (t,state)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("matrix", help="build one transition matrix")
    s.add_argument("--map", required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--mode", choices=("exact", "float"))
    s.add_argument("--out", help="sparse triplet CSV")
    s.add_argument("--bits", action="store_true")
    s.set_defaults(func=cmd_matrix)

    s = sub.add_parser("validate", help="check Lebesgue invariance of a map")
    s.add_argument("--map", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("conjugacy", help="compare a map with its conjugate")
    s.add_argument("--map", default="tent:m=2")
    s.add_argument("--conjugacy", default="sine-squared", choices=sorted(cj.HOMEOMORPHISMS))
    s.add_argument("--n-list", default="3,8,16")
    s.add_argument("--steps", type=int, default=0, help="Monte Carlo steps (0 disables)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_conjugacy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationFailure as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (MapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
