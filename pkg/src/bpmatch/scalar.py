"""Simplified min-sum: one number per directed edge, O(n) work per node.

``a2b[i, j]`` is the message alpha_i -> beta_j and ``b2a[i, j]`` the message
beta_j -> alpha_i.  Both start at w.  With n = 1 the max over an empty set of
other neighbours is taken as 0.

The engine works on float64 by default; ``exact=True`` runs on scaled Python
ints like the dense engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .convergence import ConvergenceReport, StopPolicy, drive
from .dense import argmax_rows
from .instance import Assignment, Instance, Matching, exact_weights, is_matching, to_exact

SIMPLIFIED = "simplified"


@dataclass(frozen=True)
class ScalarMessages:
    a2b: np.ndarray
    b2a: np.ndarray
    iteration: int = 0
    scale: int = 1

    @property
    def exact(self) -> bool:
        return self.a2b.dtype == object


def _weights_for(inst: Instance, msgs: ScalarMessages) -> np.ndarray:
    if msgs.exact:
        return to_exact(inst.w, msgs.scale)
    return inst.w


def sms_init(inst: Instance, exact: bool = False) -> ScalarMessages:
    if exact:
        w, scale = exact_weights(inst)
        return ScalarMessages(w.copy(), w.copy(), 0, scale)
    return ScalarMessages(inst.w.copy(), inst.w.copy(), 0, 1)


def _max_excluding(row, skip: int):
    vals = [v for t, v in enumerate(row) if t != skip]
    return max(vals) if vals else 0 * row[0]


def sms_step(inst: Instance, msgs: ScalarMessages) -> ScalarMessages:
    """Reference update: w_ij minus the max over the other incoming messages."""
    w = _weights_for(inst, msgs)
    n = inst.n
    a2b = np.empty_like(msgs.a2b)
    b2a = np.empty_like(msgs.b2a)
    for i in range(n):
        for j in range(n):
            a2b[i, j] = w[i, j] - _max_excluding(msgs.b2a[i, :], j)
            b2a[i, j] = w[i, j] - _max_excluding(msgs.a2b[:, j], i)
    return ScalarMessages(a2b, b2a, msgs.iteration + 1, msgs.scale)


def top2_scan(values) -> tuple[int, object, object, int]:
    """Single pass returning (i1, Mx1, Mx2, comparisons).

    i1 is the lowest index attaining the maximum; Mx2 is the largest value at
    any other index (equal to Mx1 on ties, 0 when there is only one value).
    """
    vals = list(values)
    i1, mx1, mx2 = 0, vals[0], float("-inf")
    comparisons = 0
    for t in range(1, len(vals)):
        x = vals[t]
        comparisons += 1
        if x > mx1:
            mx2, mx1, i1 = mx1, x, t
            continue
        comparisons += 1
        if x > mx2:
            mx2 = x
    if len(vals) == 1:
        mx2 = 0 * mx1
    return i1, mx1, mx2, comparisons


def _top2_rows(mat: np.ndarray):
    """Vectorised top2_scan over the rows of a float matrix."""
    n_rows, m = mat.shape
    rows = np.arange(n_rows)
    i1 = np.argmax(mat, axis=1)
    mx1 = mat[rows, i1]
    if m == 1:
        return i1, mx1, np.zeros_like(mx1), 0
    rest = mat.copy()
    rest[rows, i1] = -np.inf
    mx2 = rest.max(axis=1)
    # top2_scan spends one comparison on a new running max and two otherwise.
    prev_max = np.maximum.accumulate(mat, axis=1)[:, :-1]
    non_record = int((mat[:, 1:] <= prev_max).sum())
    comparisons = (m - 1) * n_rows + non_record
    return i1, mx1, mx2, comparisons


def _fast_side(w: np.ndarray, incoming: np.ndarray) -> tuple[np.ndarray, int]:
    """Messages out of every node of one side from its incoming row.

    ``incoming[s, t]`` is the message into node s from neighbour t and
    ``w[s, t]`` the weight of that edge; returns ``out[s, t]``.
    """
    n = w.shape[0]
    if incoming.dtype == object:
        out = np.empty_like(incoming)
        comparisons = 0
        for s in range(n):
            i1, mx1, mx2, c = top2_scan(incoming[s])
            comparisons += c
            for t in range(n):
                out[s, t] = w[s, t] - (mx2 if t == i1 else mx1)
        return out, comparisons + n * n
    i1, mx1, mx2, comparisons = _top2_rows(incoming)
    rows = np.arange(n)
    out = w - mx1[:, None]
    out[rows, i1] = w[rows, i1] - mx2
    return out, comparisons + n * n


def fast_step_with_count(inst: Instance, msgs: ScalarMessages) -> tuple[ScalarMessages, int]:
    """Top-2 update plus its count of comparisons and subtractions."""
    w = _weights_for(inst, msgs)
    a2b, ca = _fast_side(w, msgs.b2a)
    b2a_t, cb = _fast_side(w.T, msgs.a2b.T)
    return ScalarMessages(a2b, b2a_t.T.copy(), msgs.iteration + 1, msgs.scale), ca + cb


def sms_step_fast(inst: Instance, msgs: ScalarMessages) -> ScalarMessages:
    return fast_step_with_count(inst, msgs)[0]


def sms_estimate(msgs: ScalarMessages) -> Assignment:
    choice, tie = argmax_rows(msgs.b2a)
    return Assignment(choice, msgs.iteration, tie)


def _sms_estimates(inst: Instance, exact: bool) -> Iterator[tuple[Assignment, int]]:
    n = inst.n
    msgs = sms_init(inst, exact=exact)
    yield sms_estimate(msgs), 0
    while True:
        msgs, ops = fast_step_with_count(inst, msgs)
        yield sms_estimate(msgs), ops + n * (n - 1)


def sms_history(inst: Instance, iterations: int, exact: bool = False) -> list[Assignment]:
    out = []
    for a, _ in _sms_estimates(inst, exact):
        out.append(a)
        if a.iteration >= iterations:
            break
    return out


def sms_run(inst: Instance, policy: StopPolicy | None = None, reference: Matching | None = None,
            exact: bool = False, horizon: int | None = None) -> ConvergenceReport:
    """Iterate the top-2 update under ``policy``.

    ``op_counts[k]`` counts the comparisons and subtractions of iteration k,
    including the argmax scan of the estimate.  ``horizon`` keeps iterating
    past the early stop, which lets callers confirm the estimate stays put.
    """
    policy = policy or StopPolicy()
    return drive(SIMPLIFIED, _sms_estimates(inst, exact), policy, reference, horizon)


def _batch_side(w: np.ndarray, incoming: np.ndarray) -> np.ndarray:
    """``_fast_side`` over a stack of instances: ``out[b, s, t]``."""
    n = w.shape[-1]
    i1 = np.argmax(incoming, axis=-1)
    mx1 = np.take_along_axis(incoming, i1[..., None], axis=-1)
    if n == 1:
        mx2 = np.zeros_like(mx1)
    else:
        rest = incoming.copy()
        np.put_along_axis(rest, i1[..., None], -np.inf, axis=-1)
        mx2 = rest.max(axis=-1, keepdims=True)
    out = w - mx1
    np.put_along_axis(out, i1[..., None], np.take_along_axis(w, i1[..., None], axis=-1) - mx2, axis=-1)
    return out


def batch_last_disagreement(weights: np.ndarray, targets: np.ndarray, horizons) -> np.ndarray:
    """Float top-2 iteration on a stack of same-size instances.

    ``weights`` has shape (b, n, n), ``targets[b]`` is a choice vector and
    instance b is iterated up to ``horizons[b]``.  Returns, per instance, the
    last iteration k <= horizon whose estimate differs from the target, or -1
    when every estimate matched.  The arithmetic is the same elementwise
    subtract/max sequence as ``sms_step_fast``, so results are bitwise those
    of the single-instance engine.
    """
    w = np.asarray(weights, dtype=np.float64)
    targets = np.asarray(targets)
    horizons = np.asarray(horizons, dtype=np.int64)
    last = np.full(len(w), -1, dtype=np.int64)
    active = np.arange(len(w))
    a2b = w.copy()
    b2a = w.copy()
    k = 0
    while active.size:
        est = np.argmax(b2a, axis=-1)
        wrong = np.any(est != targets[active], axis=1)
        last[active[wrong]] = k
        keep = horizons[active] > k
        if not keep.all():
            active, w, a2b, b2a = active[keep], w[keep], a2b[keep], b2a[keep]
            if not active.size:
                break
        new_a2b = _batch_side(w, b2a)
        b2a = np.swapaxes(_batch_side(np.swapaxes(w, 1, 2), np.swapaxes(a2b, 1, 2)), 1, 2)
        a2b = new_a2b
        k += 1
    return last
