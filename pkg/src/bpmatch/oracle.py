"""Ground truth: brute force, Hungarian, top-2 weights and LP-dual certificates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .instance import Instance, InstanceStats, Matching, matching_weight

BRUTE_FORCE_MAX_N = 10
_CHUNK = 1 << 17


class TieError(ValueError):
    """The maximum weight matching is not unique (epsilon = 0)."""


@dataclass(frozen=True)
class DualSolution:
    """Buyer profits ``r`` and object prices ``p`` of the assignment LP dual."""

    r: tuple
    p: tuple

    def __post_init__(self):
        if len(self.r) != len(self.p):
            raise ValueError("r and p must have the same length")
        object.__setattr__(self, "r", tuple(self.r))
        object.__setattr__(self, "p", tuple(self.p))


@lru_cache(maxsize=None)
def _permutation_table(n: int) -> np.ndarray:
    perms = np.fromiter(itertools.chain.from_iterable(itertools.permutations(range(n))),
                        dtype=np.int8, count=math.factorial(n) * n)
    perms = perms.reshape(-1, n)
    perms.setflags(write=False)
    return perms


def _permutation_chunks(n: int):
    if n <= 9:
        yield _permutation_table(n)
        return
    it = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.int8)


def brute_force_top2(inst: Instance) -> tuple[Matching, float, float]:
    """Enumerate every permutation; return (argmax, best weight, runner-up weight).

    The runner-up is the best weight among all *other* permutations, so a tie
    at the top gives ``second == best``.  For n = 1 the runner-up is -inf.
    Ties for the argmax resolve to the lexicographically first permutation.
    """
    n = inst.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for n={n} > {BRUTE_FORCE_MAX_N} (n! blowup)")
    rows = np.arange(n)
    best_w = -math.inf
    second_w = -math.inf
    best_pi = None
    for perms in _permutation_chunks(n):
        weights = inst.w[rows, perms].sum(axis=1)
        k = int(np.argmax(weights))
        top = float(weights[k])
        if len(weights) > 1:
            rest = np.delete(weights, k)
            runner = float(rest.max())
        else:
            runner = -math.inf
        if top > best_w:
            second_w = max(best_w, runner)
            best_w, best_pi = top, tuple(int(x) for x in perms[k])
        else:
            second_w = max(second_w, top)
    return Matching(best_pi), best_w, second_w


def hungarian(inst: Instance) -> Matching:
    rows, cols = linear_sum_assignment(inst.w, maximize=True)
    pi = np.empty(inst.n, dtype=int)
    pi[rows] = cols
    return Matching(tuple(pi))


def exclusion_sentinel(inst: Instance) -> float:
    return -inst.w_star * (2 * inst.n + 1)


def second_best_by_exclusion(inst: Instance, best: Matching | None = None) -> float:
    """Runner-up weight via n Hungarian solves, each banning one edge of the optimum.

    Every other perfect matching misses at least one optimal edge, so the
    largest of the n restricted optima is the runner-up weight.
    """
    if best is None:
        best = hungarian(inst)
    if inst.n == 1:
        return -math.inf
    sentinel = exclusion_sentinel(inst)
    second = -math.inf
    for i, j in enumerate(best.pi):
        w = inst.w.copy()
        w[i, j] = sentinel
        m = hungarian(Instance(w))
        second = max(second, matching_weight(inst, m))
    return second


def iteration_bound(n: int, w_star: float, epsilon: float) -> int:
    """ceil(2 n w* / epsilon), evaluated in exact rational arithmetic."""
    if math.isinf(epsilon):
        return 1
    if epsilon <= 0:
        raise TieError("epsilon must be positive")
    return max(1, math.ceil(Fraction(2 * n) * Fraction(w_star) / Fraction(epsilon)))


def instance_stats(inst: Instance, allow_tie: bool = False) -> InstanceStats:
    """Optimum, runner-up, epsilon, w* and the iteration bound.

    Raises TieError when the optimum is not unique unless ``allow_tie``, in
    which case epsilon is 0 and ``bound`` is None.
    """
    n = inst.n
    if n <= BRUTE_FORCE_MAX_N:
        best, best_w, second_w = brute_force_top2(inst)
    else:
        best = hungarian(inst)
        best_w = matching_weight(inst, best)
        second_w = second_best_by_exclusion(inst, best)
    w_star = inst.w_star
    epsilon = best_w - second_w
    if epsilon <= 0:
        if not allow_tie:
            raise TieError(f"maximum weight matching is not unique (best={best_w}, second={second_w})")
        return InstanceStats(best, best_w, second_w, 0.0, w_star, None)
    return InstanceStats(best, best_w, second_w, epsilon, w_star, iteration_bound(n, w_star, epsilon))


def _q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


def check_dual_feasible(inst: Instance, d: DualSolution) -> bool:
    """r_i + p_j >= w_ij for every i, j, compared in exact rational arithmetic."""
    n = inst.n
    if len(d.r) != n:
        raise ValueError("dual dimension mismatch")
    r = [_q(x) for x in d.r]
    p = [_q(x) for x in d.p]
    w = inst.w
    return all(r[i] + p[j] >= _q(w[i, j]) for i in range(n) for j in range(n))


def check_cs(inst: Instance, d: DualSolution, m: Matching | Sequence[int], delta=0) -> bool:
    """r_i + p_{m(i)} <= w_{i,m(i)} + delta on every matched edge (exact)."""
    pi = m.pi if isinstance(m, Matching) else tuple(m)
    if len(pi) != inst.n or len(d.r) != inst.n:
        raise ValueError("dimension mismatch")
    delta = _q(delta)
    return all(_q(d.r[i]) + _q(d.p[j]) <= _q(inst.w[i, j]) + delta for i, j in enumerate(pi))
