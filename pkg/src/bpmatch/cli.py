"""Command line: ``bpmatch gen | solve | verify | bench``.

Exit codes: 0 success (solve: converged), 1 input or usage error (verify: a
failed check), 2 solve did not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import statistics
import sys
from fractions import Fraction

import numpy as np

from . import auction, comptree, dense, scalar
from .convergence import StopPolicy, write_trace
from .instance import (Instance, InstanceFormatError, derive_seed, gen_random_instance,
                       load_instance, matching_weight, serialize_instance)
from .oracle import check_cs, check_dual_feasible, hungarian, instance_stats

BP_ALGORITHMS = (dense.MAX_PRODUCT, dense.MIN_SUM, scalar.SIMPLIFIED)
AUCTION_ALGORITHMS = ("auction", "msa1", "msa2")
ALGORITHMS = BP_ALGORITHMS + AUCTION_ALGORITHMS
CHECKS = ("lemma1", "note5", "msa-equivalence", "dual-certificate", "fast-step")
BENCH_HEADER = ["n", "trial", "iters", "bound", "ops_per_iter", "converged", "weight_gap"]


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("sizes must be >= 1")
    return values


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return f"{float(x):.12g}"


def default_max_iters(n: int, bound: int | None) -> int:
    """min(bound, 10 n), or 10 n when no bound is known."""
    return min(bound, 10 * n) if bound is not None else 10 * n


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    inst = gen_random_instance(args.n, args.seed)
    text = serialize_instance(inst)
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
        return 0
    try:
        with open(args.out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- solve


def _solve_bp(inst: Instance, args, stats, out) -> int:
    n = inst.n
    if args.max_iters is None:
        # The default cap leaves room to confirm stability at the bound.
        policy = StopPolicy(default_max_iters(n, stats.bound), args.stability_window, stats.bound)
    else:
        policy = StopPolicy(args.max_iters, args.stability_window)
    if args.algorithm == scalar.SIMPLIFIED:
        report = scalar.sms_run(inst, policy, stats.best)
    else:
        if args.algorithm == dense.MAX_PRODUCT and n > dense.MAXPROD_MAX_N:
            raise dense.GuardError(f"max-product is limited to n <= {dense.MAXPROD_MAX_N}")
        report = dense.run_dense(inst, args.algorithm, policy, stats.best, exact=True)
    final = report.final
    if report.converged:
        print("matching: " + " ".join(str(c) for c in final.one_based()), file=out)
        print(f"weight: {_fmt(matching_weight(inst, final))}", file=out)
    else:
        print("estimate: " + " ".join(str(c) for c in final.one_based()), file=out)
    print(f"iterations: {report.iterations_run}", file=out)
    if stats.bound is not None:
        print(f"bound: {stats.bound}", file=out)
    print("converged" if report.converged else "not converged", file=out)
    if args.trace:
        with open(args.trace, "w") as fh:
            write_trace(report.history, fh)
    return 0 if report.converged else 2


def _default_delta(inst: Instance, stats) -> float:
    if stats.epsilon > 0 and math.isfinite(stats.epsilon):
        return stats.epsilon / (2 * inst.n)
    return max(inst.w_star, 1.0) / (2 * inst.n)


def _solve_auction(inst: Instance, args, stats, out) -> int:
    if args.trace:
        raise ValueError("--trace records message-passing estimates; "
                         "it is not available for auction algorithms")
    cap = args.max_iters if args.max_iters is not None else auction.DEFAULT_CAP
    if args.algorithm == "auction":
        delta = args.delta if args.delta is not None else _default_delta(inst, stats)
        try:
            res = auction.auction_run(inst, delta, cap=cap, exact=True)
        except auction.AuctionCapExceeded as exc:
            print(f"delta: {_fmt(delta)}", file=out)
            print(f"iterations: {exc.state.round}", file=out)
            print("not converged", file=out)
            return 2
        matching, rounds, prices = res.matching, res.rounds, res.prices
    else:
        delta = args.delta if args.delta is not None else 0.0
        if args.algorithm == "msa1":
            res = auction.msa1_run(inst, delta, keep_condition=not args.no_msa1_condition, cap=cap,
                                   exact=True, record=False)
        else:
            res = auction.msa2_run(inst, delta, cap=cap, exact=True, record=False)
        matching, rounds, prices = res.matching, res.rounds, res.prices
    print(f"delta: {_fmt(delta)}", file=out)
    if matching is None:
        print(f"iterations: {rounds}", file=out)
        print("not converged", file=out)
        return 2
    print("matching: " + " ".join(str(c) for c in matching.one_based()), file=out)
    print(f"weight: {_fmt(matching_weight(inst, matching))}", file=out)
    print(f"iterations: {rounds}", file=out)
    print("prices: " + " ".join(_fmt(p) for p in prices), file=out)
    print("converged", file=out)
    if args.algorithm == "msa2" and delta == 0:
        dual = auction.extract_dual(inst, prices, matching)
        print("dual certificate:", file=out)
        print("  r: " + " ".join(_fmt(x) for x in dual.r), file=out)
        print("  p: " + " ".join(_fmt(x) for x in dual.p), file=out)
        print(f"  feasible: {'yes' if check_dual_feasible(inst, dual) else 'no'}", file=out)
        print(f"  complementary slackness: {'yes' if check_cs(inst, dual, matching) else 'no'}",
              file=out)
    return 0


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.path)
    except OSError as exc:
        print(f"error: cannot read {args.path}: {exc}", file=sys.stderr)
        return 1
    except InstanceFormatError as exc:
        print(f"error: {args.path}: {exc}", file=sys.stderr)
        return 1
    stats = instance_stats(inst, allow_tie=True)
    out = sys.stdout
    print(f"algorithm: {args.algorithm}", file=out)
    try:
        if args.algorithm in BP_ALGORITHMS:
            return _solve_bp(inst, args, stats, out)
        return _solve_auction(inst, args, stats, out)
    except (dense.GuardError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


# ---------------------------------------------------------------- verify


def _check_msa_equivalence(inst: Instance, rounds: int, delta: float) -> bool:
    a = auction.msa1_run(inst, delta, cap=rounds)
    b = auction.msa2_run(inst, delta, cap=rounds)
    if len(a.trace) != len(b.trace):
        return False
    return all(np.array_equal(x.bids, y.bids) and np.array_equal(x.prices, y.prices)
               for x, y in zip(a.trace, b.trace))


def _check_dual_certificate(inst: Instance, rounds: int):
    res = auction.msa2_run(inst, 0.0, cap=rounds, exact=True, record=False)
    if not res.terminated:
        return None, f"min-sum auction did not terminate within {rounds} rounds"
    dual = auction.extract_dual(inst, res.prices, res.matching)
    optimum = auction.exact_weight(inst, hungarian(inst))
    ok = (check_dual_feasible(inst, dual) and check_cs(inst, dual, res.matching)
          and auction.exact_weight(inst, res.matching) == optimum)
    return ok, ""


def _check_fast_step(inst: Instance, k: int) -> bool:
    msgs = scalar.sms_init(inst)
    for _ in range(k):
        ref = scalar.sms_step(inst, msgs)
        fast = scalar.sms_step_fast(inst, msgs)
        if not (np.array_equal(ref.a2b, fast.a2b) and np.array_equal(ref.b2a, fast.b2a)):
            return False
        msgs = fast
    return True


def run_check(name: str, inst: Instance, k: int, rounds: int, delta: float):
    """(passed or None when skipped, notice)."""
    try:
        if name == "lemma1":
            return comptree.check_belief_tree_identity(inst, k), ""
        if name == "note5":
            return comptree.check_message_tree_difference(inst, k), ""
        if name == "msa-equivalence":
            return _check_msa_equivalence(inst, rounds, delta), ""
        if name == "dual-certificate":
            return _check_dual_certificate(inst, rounds)
        if name == "fast-step":
            return _check_fast_step(inst, k), ""
    except dense.GuardError as exc:
        return None, str(exc)
    raise ValueError(f"unknown check {name!r}")


def _checks_list(text: str) -> list[str]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    bad = [x for x in names if x not in CHECKS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown check(s) {bad}; choose from {', '.join(CHECKS)}")
    return names


def cmd_verify(args) -> int:
    try:
        inst = load_instance(args.path)
    except (OSError, InstanceFormatError) as exc:
        print(f"error: {args.path}: {exc}", file=sys.stderr)
        return 1
    failed = False
    for name in args.checks:
        ok, notice = run_check(name, inst, args.k, args.rounds, args.delta)
        if ok is None:
            print(f"{name}: skipped ({notice})")
        else:
            print(f"{name}: {'pass' if ok else 'FAIL'}")
            failed |= not ok
    return 1 if failed else 0


# ---------------------------------------------------------------- bench


def bench_rows(sizes, trials: int, seed: int, stability_window: int = 3):
    """One dict per (n, trial) from the simplified min-sum solver."""
    rows = []
    for n in sizes:
        for trial in range(trials):
            inst = gen_random_instance(n, derive_seed(seed, n, trial))
            stats = instance_stats(inst, allow_tie=True)
            policy = StopPolicy(default_max_iters(n, stats.bound), stability_window, stats.bound)
            report = scalar.sms_run(inst, policy, stats.best)
            final = report.final
            if report.converged:
                iters = report.first_stable_iteration()
                gap = stats.best_weight - matching_weight(inst, final)
            else:
                iters, gap = report.iterations_run, math.nan
            rows.append({
                "n": n, "trial": trial, "iters": iters, "bound": stats.bound,
                "ops_per_iter": report.ops_per_iteration, "converged": report.converged,
                "weight_gap": gap,
            })
    return rows


def _quantile(values, q: float) -> float:
    return float(np.quantile(np.asarray(values, dtype=float), q)) if values else math.nan


def bench_summary(rows) -> list[list]:
    header = ["n", "trials", "converged", "mean_iters", "max_iters", "mean_iters_over_bound",
              "iters_over_bound_p50", "iters_over_bound_p90", "iters_over_bound_max",
              "ops_per_iter"]
    out = [header]
    for n in sorted({r["n"] for r in rows}):
        sub = [r for r in rows if r["n"] == n]
        iters = [r["iters"] for r in sub]
        ratios = [r["iters"] / r["bound"] for r in sub if r["bound"]]
        out.append([
            n, len(sub), sum(r["converged"] for r in sub), f"{statistics.mean(iters):.3f}",
            max(iters), f"{statistics.mean(ratios):.4g}" if ratios else "nan",
            f"{_quantile(ratios, 0.5):.4g}", f"{_quantile(ratios, 0.9):.4g}",
            f"{max(ratios):.4g}" if ratios else "nan", f"{sub[0]['ops_per_iter']:.1f}",
        ])
    return out


def format_bench(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    for r in rows:
        writer.writerow([
            r["n"], r["trial"], r["iters"], "" if r["bound"] is None else r["bound"],
            f"{r['ops_per_iter']:.1f}", int(r["converged"]),
            "nan" if math.isnan(r["weight_gap"]) else f"{r['weight_gap']:.6g}",
        ])
    for line in bench_summary(rows):
        buf.write("# " + ",".join(str(x) for x in line) + "\n")
    return buf.getvalue()


def cmd_bench(args) -> int:
    rows = bench_rows(args.n, args.trials, args.seed, args.stability_window)
    text = format_bench(rows)
    sys.stdout.write(text)
    if args.csv:
        try:
            with open(args.csv, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.csv}: {exc}", file=sys.stderr)
            return 1
    return 0


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bpmatch", description="Max-weight bipartite matching by message passing.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a seeded random instance")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="run one solver on an instance file")
    p.add_argument("path")
    p.add_argument("--algorithm", choices=ALGORITHMS, default=scalar.SIMPLIFIED)
    p.add_argument("--max-iters", type=_nonneg_int, default=None,
                   help="iteration (or round) cap; default min(bound, 10n) for message passing")
    p.add_argument("--delta", type=float, default=None,
                   help="bid increment (auction default eps/2n, min-sum auctions default 0)")
    p.add_argument("--stability-window", type=_positive_int, default=3)
    p.add_argument("--trace", help="write the per-iteration estimate trace as CSV")
    p.add_argument("--no-msa1-condition", action="store_true",
                   help="drop the previous-price test from min-sum auction I (experimental)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run certificate checks on an instance file")
    p.add_argument("path")
    p.add_argument("--checks", type=_checks_list, default=list(CHECKS),
                   help=f"comma separated subset of {','.join(CHECKS)}")
    p.add_argument("--k", type=_nonneg_int, default=3, help="iterations for the tree and step checks")
    p.add_argument("--rounds", type=_positive_int, default=200, help="rounds for auction checks")
    p.add_argument("--delta", type=float, default=0.0, help="delta for msa-equivalence")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="simplified min-sum sweep against the iteration bound")
    p.add_argument("--n", type=_int_list, default=[4, 8])
    p.add_argument("--trials", type=_positive_int, default=50)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--stability-window", type=_positive_int, default=3)
    p.add_argument("--csv", help="also write the table to this file")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else 1
    if getattr(args, "delta", None) is not None and (args.delta < 0 or not math.isfinite(args.delta)):
        print("error: --delta must be a finite number >= 0", file=sys.stderr)
        return 1
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
