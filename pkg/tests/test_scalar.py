import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpmatch.convergence import StopPolicy
from bpmatch.dense import MIN_SUM, dense_history
from bpmatch.instance import Instance, Matching, gen_random_instance
from bpmatch.oracle import instance_stats
from bpmatch.scalar import (ScalarMessages, batch_last_disagreement, fast_step_with_count,
                            sms_estimate, sms_history, sms_init, sms_run, sms_step, sms_step_fast,
                            top2_scan)

from conftest import random_instances


def _naive_top2_comparisons(values):
    """Comparison count of the textbook scan: one test against the running
    max, a second against the runner-up when the first fails."""
    mx1, mx2, count = values[0], float("-inf"), 0
    for x in values[1:]:
        count += 1
        if x > mx1:
            mx1, mx2 = x, mx1
        else:
            count += 1
            mx2 = max(mx2, x)
    return count


def test_top2_scan_examples():
    assert top2_scan([5, 3, 1]) == (0, 5, 3, 4)
    assert top2_scan([1, 5, 5]) == (1, 5, 5, 3)
    assert top2_scan([7]) == (0, 7, 0, 0)
    assert top2_scan([-1.0, -2.0])[:3] == (0, -1.0, -2.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=9))
def test_top2_scan_against_sorting(values):
    i1, mx1, mx2, comparisons = top2_scan(values)
    assert mx1 == max(values) and i1 == values.index(mx1)
    rest = values[:i1] + values[i1 + 1:]
    assert mx2 == (max(rest) if rest else 0)
    assert comparisons == _naive_top2_comparisons(values)


def test_first_iteration_by_hand(inst_a):
    msgs = sms_step(inst_a, sms_init(inst_a))
    assert msgs.a2b.tolist() == [[2, -2], [-2, 2]]
    assert msgs.b2a.tolist() == [[2, -2], [-2, 2]]


def test_single_node_messages_are_the_weight():
    inst = Instance([[0.7]])
    msgs = sms_init(inst)
    for _ in range(3):
        msgs = sms_step(inst, msgs)
        assert msgs.a2b.tolist() == [[0.7]]
    assert sms_estimate(msgs).choice == (0,)


def _random_state(data, n, tie_prone):
    if tie_prone:
        vals = st.integers(-2, 2).map(float)
    else:
        vals = st.floats(-5, 5, allow_nan=False, allow_subnormal=False)
    mats = [np.array(data.draw(st.lists(st.lists(vals, min_size=n, max_size=n), min_size=n,
                                        max_size=n)), dtype=np.float64) for _ in range(3)]
    return Instance(mats[0]), ScalarMessages(mats[1], mats[2])


@settings(max_examples=300, deadline=None)
@given(st.data(), st.integers(1, 6), st.booleans())
def test_fast_step_is_bitwise_naive(data, n, tie_prone):
    inst, msgs = _random_state(data, n, tie_prone)
    ref = sms_step(inst, msgs)
    fast = sms_step_fast(inst, msgs)
    assert np.array_equal(ref.a2b, fast.a2b) and np.array_equal(ref.b2a, fast.b2a)


def test_exact_fast_step_is_naive():
    for _, inst in random_instances(31, 10, range(1, 6)):
        msgs = sms_init(inst, exact=True)
        for _ in range(5):
            ref, fast = sms_step(inst, msgs), sms_step_fast(inst, msgs)
            assert np.array_equal(ref.a2b, fast.a2b) and np.array_equal(ref.b2a, fast.b2a)
            msgs = fast


def test_op_count_matches_scan_model():
    inst = gen_random_instance(7, 2)
    msgs = sms_step_fast(inst, sms_init(inst))
    _, ops = fast_step_with_count(inst, msgs)
    n = inst.n
    expected = sum(_naive_top2_comparisons(list(row)) for row in msgs.b2a)
    expected += sum(_naive_top2_comparisons(list(col)) for col in msgs.a2b.T)
    assert ops == expected + 2 * n * n


def test_op_count_is_quadratic():
    def per_iter(n):
        return sms_run(gen_random_instance(n, 5), StopPolicy(30), horizon=30).ops_per_iteration
    assert 3.6 <= per_iter(40) / per_iter(20) <= 4.4


def test_estimates_match_dense_engine():
    for n, inst in random_instances(32, 20, range(1, 6)):
        dense = dense_history(inst, MIN_SUM, 8)
        scal = sms_history(inst, 8, exact=True)
        assert dense == scal


def test_float_engine_matches_exact_engine_on_estimates():
    for n, inst in random_instances(33, 20, range(2, 7)):
        assert [a.choice for a in sms_history(inst, 30)] == \
            [a.choice for a in sms_history(inst, 30, exact=True)]


def test_run_converges_to_optimum(inst_a):
    report = sms_run(inst_a, StopPolicy(20), Matching((0, 1)))
    assert report.converged and report.matched_oracle
    assert report.iterations_run == 2
    assert report.op_counts[0] == 0 and report.ops_per_iteration > 0


def test_run_on_tie_hits_cap(inst_tie):
    report = sms_run(inst_tie, StopPolicy(12))
    assert not report.converged and report.iterations_run == 12


def test_horizon_keeps_iterating():
    inst = gen_random_instance(4, 1)
    stats = instance_stats(inst)
    report = sms_run(inst, StopPolicy(10), stats.best, horizon=50)
    assert report.iterations_run == 50
    assert len(report.history) == 51


def test_batch_runner_agrees_with_single_runs():
    insts = [inst for _, inst in random_instances(34, 30, [4])]
    stats = [instance_stats(i) for i in insts]
    horizons = [min(s.bound, 150) for s in stats]
    last = batch_last_disagreement(np.stack([i.w for i in insts]),
                                   np.array([s.best.pi for s in stats]), horizons)
    for inst, s, h, got in zip(insts, stats, horizons, last):
        wrong = [a.iteration for a in sms_history(inst, h) if a.choice != s.best.pi]
        assert got == (max(wrong) if wrong else -1)
