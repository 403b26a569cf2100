"""Acceptance sweeps.  Each test prints one PASS/FAIL line with its numbers.

Run with ``pytest tests/test_acceptance.py -v`` (the lines appear even
without ``-s``).
"""

from __future__ import annotations

import io
import math
from contextlib import redirect_stdout
from fractions import Fraction

import numpy as np
import pytest

from bpmatch.auction import (auction_run, exact_weight, extract_dual, msa1_run, msa2_run,
                             termination_rate, weight_within)
from bpmatch.cli import main as cli_main
from bpmatch.comptree import check_belief_tree_identity, check_message_tree_difference
from bpmatch.convergence import HARD_ITERATION_CAP, StopPolicy
from bpmatch.dense import (MIN_SUM, estimate, log_messages, maxprod_beliefs, maxprod_init,
                           maxprod_step, minsum_beliefs, minsum_init, minsum_step, dense_history)
from bpmatch.instance import Instance, gen_random_instance
from bpmatch.oracle import check_cs, check_dual_feasible, instance_stats
from bpmatch.scalar import (ScalarMessages, batch_last_disagreement, sms_history, sms_init,
                            sms_run, sms_step, sms_step_fast)

from _oracles import brute_edge_difference
from conftest import random_instances

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def _report(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"
    return _report


def _bits_equal(a, b):
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def test_simplified_minsum_reaches_optimum_within_bound(report):
    window = StopPolicy().stability_window
    failures, capped, total, worst = 0, 0, 0, 0.0
    for n in range(2, 9):
        insts = [inst for _, inst in random_instances(101, 1000, [n])]
        stats = [instance_stats(inst) for inst in insts]
        bounds = np.array([s.bound for s in stats])
        horizons = np.minimum(bounds + window - 1, HARD_ITERATION_CAP)
        capped += int(np.sum(bounds + window - 1 > HARD_ITERATION_CAP))
        last_wrong = batch_last_disagreement(np.stack([i.w for i in insts]),
                                             np.array([s.best.pi for s in stats]), horizons)
        first_stable = last_wrong + 1
        ok = (first_stable <= bounds) & (last_wrong < horizons)
        failures += int(np.sum(~ok))
        total += len(insts)
        worst = max(worst, float(np.max(first_stable / bounds)))
    report("simplified min-sum converges to the brute-force optimum, stable from an "
           "iteration <= ceil(2 n w*/eps)", failures == 0,
           f"{total - failures}/{total} instances (n=2..8); max first_stable/bound={worst:.3f}; "
           f"{capped} runs confirmed only up to {HARD_ITERATION_CAP} iterations")


def test_dense_and_simplified_estimates_coincide(report):
    iterations = 30
    mismatched = 0
    for n, inst in random_instances(102, 500, range(1, 7)):
        if dense_history(inst, MIN_SUM, iterations) != sms_history(inst, iterations, exact=True):
            mismatched += 1
    report("dense min-sum and simplified min-sum give identical assignments every iteration",
           mismatched == 0, f"{500 - mismatched}/500 instances (n<=6, k=0..{iterations}, exact)")


def test_beliefs_are_twice_tree_optima(report):
    bad = 0
    cases = 0
    for n, inst in random_instances(103, 100, range(1, 5)):
        for k in range(5):
            cases += 1
            bad += not check_belief_tree_identity(inst, k)
    report("dense beliefs equal 2 x computation-tree T-matching optima", bad == 0,
           f"{cases - bad}/{cases} (instance, k) pairs, n<=4, k<=4, tolerance 0")


def test_scalar_messages_are_tree_differences(report):
    bad = 0
    cases = 0
    for n, inst in random_instances(104, 100, range(1, 4)):
        msgs = sms_init(inst, exact=True)
        for k in range(4):
            if k:
                msgs = sms_step(inst, msgs)
            cases += 1
            ref = [[brute_edge_difference(inst.w.tolist(), i, j, k) * msgs.scale
                    for j in range(n)] for i in range(n)]
            ok = msgs.b2a.tolist() == ref and check_message_tree_difference(inst, k)
            bad += not ok
    report("scalar message beta_j -> alpha_i equals use minus not-use on the edge subtree",
           bad == 0, f"{cases - bad}/{cases} (instance, k) pairs, n<=3, k<=3, exact")


def test_maxprod_log_matches_minsum(report):
    worst = 0.0
    est_bad = 0
    for n, inst in random_instances(105, 100, range(1, 6)):
        mp, ms = maxprod_init(inst), minsum_init(inst, exact=True)
        for k in range(21):
            la, lb = log_messages(mp)
            for got, want in ((la, ms.values("a2b")), (lb, ms.values("b2a"))):
                for g, x in zip(got.ravel(), want.ravel()):
                    if x == 0:
                        err = 0.0 if g == 0 else math.inf
                    else:
                        err = abs(float(g) - float(x)) / abs(float(x))
                    worst = max(worst, err)
            if estimate(maxprod_beliefs(inst, mp)).choice != estimate(minsum_beliefs(inst, ms)).choice:
                est_bad += 1
            if k < 20:
                mp, ms = maxprod_step(inst, mp), minsum_step(inst, ms)
    report("max-product in log form equals min-sum", worst <= 1e-9 and est_bad == 0,
           f"100 instances n<=5, k<=20: max relative log-message error {worst:.2e} "
           f"(limit 1e-9), {est_bad} estimate mismatches")


def test_min_sum_auctions_are_identical(report):
    rounds = 100
    bad = 0
    for n, inst in random_instances(106, 1000, range(1, 7)):
        for delta in (0.0, 1e-3):
            a = msa1_run(inst, delta, cap=rounds)
            b = msa2_run(inst, delta, cap=rounds)
            same = (a.rounds == b.rounds and a.matching == b.matching
                    and len(a.trace) == len(b.trace)
                    and all(_bits_equal(x.bids, y.bids) and _bits_equal(x.prices, y.prices)
                            for x, y in zip(a.trace, b.trace)))
            bad += not same
    report("min-sum auction I and II agree bit for bit on bids and prices each round",
           bad == 0, f"{2000 - bad}/2000 runs (1000 instances n<=6, delta in {{0, 1e-3}}, "
           f"up to {rounds} rounds)")


def test_unrelaxed_termination_is_certified_optimal(report):
    terminated, bad = 0, 0
    count = 0
    for n, inst in random_instances(107, 400, range(1, 9)):
        stats = instance_stats(inst)
        for run in (msa1_run, msa2_run):
            res = run(inst, 0.0, cap=500, exact=True, record=False)
            count += 1
            if not res.terminated:
                continue
            terminated += 1
            dual = extract_dual(inst, res.prices, res.matching)
            ok = (check_dual_feasible(inst, dual) and check_cs(inst, dual, res.matching)
                  and exact_weight(inst, res.matching) == exact_weight(inst, stats.best))
            bad += not ok
    report("every delta=0 min-sum auction termination carries a feasible CS dual and is optimal",
           bad == 0 and terminated > 0,
           f"{terminated - bad}/{terminated} terminations certified ({terminated} of {count} "
           f"runs terminated within 500 rounds; n<=8)")


def test_termination_rate_without_price_test_is_reported(capsys):
    insts = [inst for _, inst in random_instances(108, 200, range(2, 7))]
    kept = termination_rate(insts, keep_condition=True, cap=500)
    dropped = termination_rate(insts, keep_condition=False, cap=500)
    with capsys.disabled():
        print(f"\n[INFO] min-sum auction I termination within 500 rounds on 200 instances: "
              f"{kept:.1%} with the price test, {dropped:.1%} without it (report only)")


def test_classic_auction_is_optimal_and_monotone(report):
    bad, runs, max_rounds = 0, 0, 0
    for n, inst in random_instances(109, 700, range(2, 9)):
        stats = instance_stats(inst)
        res = auction_run(inst, stats.epsilon / (2 * n), exact=True)
        prices = np.array(res.price_history, dtype=object)
        sizes = res.assigned_history
        ok = (res.matching == stats.best and bool(np.all(prices[1:] >= prices[:-1]))
              and all(b >= a for a, b in zip(sizes, sizes[1:])))
        bad += not ok
        runs += 1
        max_rounds = max(max_rounds, res.rounds)
    report("classic auction with delta = eps/2n returns the optimum; prices and |S| never drop",
           bad == 0, f"{runs - bad}/{runs} instances (n=2..8, exact), max {max_rounds} rounds")


def test_relaxed_auction_is_within_n_delta(report):
    bad, terminated, runs = 0, 0, 0
    for n, inst in random_instances(110, 300, range(2, 9)):
        stats = instance_stats(inst)
        for scale in (0.5, 1.0, 2.0):
            delta = scale * stats.epsilon / n
            res = msa2_run(inst, delta, cap=500, exact=True, record=False)
            runs += 1
            if not res.terminated:
                continue
            terminated += 1
            bad += not weight_within(inst, res.matching, stats.best, n * Fraction(delta))
    report("delta-relaxed min-sum auction result weighs at least W* - n delta",
           bad == 0 and terminated > 0,
           f"{terminated - bad}/{terminated} terminated runs satisfy the bound exactly "
           f"({terminated} of {runs} runs terminated within 500 rounds; "
           f"delta in {{eps/2n, eps/n, 2eps/n}}, n=2..8)")


def test_per_iteration_cost_is_quadratic(report):
    def ops(n):
        inst = gen_random_instance(n, 1000 + n)
        return sms_run(inst, StopPolicy(40), horizon=40).ops_per_iteration

    sizes = [8, 16, 32, 64]
    per = {n: ops(n) for n in sizes}
    ratios = {n: per[2 * n] / per[n] for n in sizes[:-1]}
    ratio_ok = all(3.6 <= r <= 4.4 for r in ratios.values())

    rng = np.random.default_rng(20240611)
    bad = 0
    states = 10_000
    for t in range(states):
        n = int(rng.integers(1, 7))
        if t % 2:
            mats = [rng.integers(-2, 3, (n, n)).astype(np.float64) for _ in range(3)]
        else:
            mats = [rng.uniform(-3, 3, (n, n)) for _ in range(3)]
        inst, msgs = Instance(mats[0]), ScalarMessages(mats[1], mats[2])
        ref, fast = sms_step(inst, msgs), sms_step_fast(inst, msgs)
        bad += not (_bits_equal(ref.a2b, fast.a2b) and _bits_equal(ref.b2a, fast.b2a))
    detail = ", ".join(f"ops({2 * n})/ops({n})={r:.3f}" for n, r in ratios.items())
    report("simplified min-sum costs O(n^2) per iteration and the top-2 step is exact",
           ratio_ok and bad == 0,
           f"{detail} (limits [3.6, 4.4]); fast step bitwise equal on {states - bad}/{states} "
           f"random states (half tie-prone)")


def test_bench_reports_iterations_over_bound(report):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(["bench", "--n", "4,8", "--trials", "20", "--seed", "11"])
    lines = buf.getvalue().splitlines()
    summary = [l[2:].split(",") for l in lines if l.startswith("# ")]
    header = summary[0] if summary else []
    columns = [c for c in header if c.startswith("iters_over_bound") or c == "mean_iters_over_bound"]
    ok = code == 0 and bool(columns) and len(summary) == 3
    detail = "; ".join(
        "n=" + row[0] + " " + " ".join(f"{c}={row[header.index(c)]}" for c in columns)
        for row in summary[1:])
    report("bench output carries the iterations/bound distribution (report only)", ok, detail)
