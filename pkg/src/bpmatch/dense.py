"""Vector-message max-product and min-sum on the matching graphical model.

Layout of the message tensors (all 0-based)::

    a2b[i, j, r] = m_{alpha_i -> beta_j}(r)   r ranges over alpha indices,
                                              the distinguished value is r == i
    b2a[i, j, q] = m_{beta_j -> alpha_i}(q)   q ranges over beta indices,
                                              the distinguished value is q == j

Min-sum messages grow roughly like (n-1)**k, so float64 loses the O(1)
belief differences after a handful of iterations.  The min-sum engine is
therefore generic over the element type and defaults to exact mode: weights
are scaled by a common power of two into Python ints (see
``instance.exact_weights``) and every message is an exact integer.
Max-product values are e**(min-sum value); they are held as mpmath floats,
whose exponent range is unbounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import mpmath
import numpy as np

from .convergence import ConvergenceReport, StopPolicy, drive
from .instance import Assignment, Instance, Matching, exact_weights, from_exact, to_exact

MAX_PRODUCT = "max-product"
MIN_SUM = "min-sum"

MAXPROD_MAX_N = 5
MAXPROD_MAX_K = 20
# Max-product beliefs are products of exponentials rounded at 256 bits, so
# values that are exactly equal in min-sum can differ in the last bits.
# Values this close (relative) to the row maximum count as tied.
MAXPROD_TIE_RTOL = 2.0**-200
_MP = mpmath.MPContext()
_MP.prec = 256


class GuardError(ValueError):
    """Requested size is outside the supported range of an engine."""


def psi(i: int, j: int, r: int, s: int, n: int | None = None) -> int:
    """Pairwise compatibility of (alpha_i, beta_j) with X_i = r and Y_j = s."""
    if n is not None and not all(0 <= v < n for v in (i, j, r, s)):
        raise IndexError(f"index out of range 0..{n - 1}: {(i, j, r, s)}")
    if (r == j) != (s == i):
        return 0
    return 1


def joint_unnormalized(inst: Instance, x: Sequence[int], y: Sequence[int]) -> float:
    """prod psi * prod phi, i.e. the joint density times the partition function."""
    n = inst.n
    if len(x) != n or len(y) != n:
        raise ValueError("x and y must have n entries")
    for i in range(n):
        for j in range(n):
            if psi(i, j, x[i], y[j], n) == 0:
                return 0.0
    w = inst.w
    log_phi = sum(w[i, x[i]] for i in range(n)) + sum(w[y[j], j] for j in range(n))
    return math.exp(log_phi)


@dataclass(frozen=True)
class VectorMessages:
    a2b: np.ndarray
    b2a: np.ndarray
    iteration: int
    mode: str
    # Weight scale in exact min-sum mode (messages are ints = value * scale); 1 otherwise.
    scale: int = 1

    def values(self, which: str = "b2a") -> np.ndarray:
        """Messages in weight units (floats for max-product log form, Fractions if exact)."""
        arr = getattr(self, which)
        if self.scale == 1:
            return arr
        return from_exact(arr, self.scale)


@dataclass(frozen=True)
class Beliefs:
    at_alpha: np.ndarray
    at_beta: np.ndarray
    iteration: int
    scale: int = 1
    tie_rtol: float = 0.0


def _weights(inst: Instance, exact: bool) -> tuple[np.ndarray, int]:
    if exact:
        return exact_weights(inst)
    return inst.w.astype(np.float64), 1


# -- min-sum ---------------------------------------------------------------

def _minsum_update(w: np.ndarray, incoming: np.ndarray) -> np.ndarray:
    """Outgoing messages of one side.

    ``w[s, v]`` is the sender's potential at value v and ``incoming[s, l, v]``
    the message into sender s from neighbour l.  Returns ``out[s, t, v]``,
    the message from s to t, whose distinguished value is v == s.  The psi
    mask allows only v' == t for the distinguished entry and only v' != t
    for every other entry.
    """
    n = w.shape[0]
    out = np.empty_like(incoming)
    senders = np.arange(n)
    for t in range(n):
        others = [l for l in range(n) if l != t]
        field_ = incoming[:, others, :].sum(axis=1) + w
        if n > 1:
            out[:, t, :] = np.delete(field_, t, axis=1).max(axis=1)[:, None]
        out[senders, t, senders] = field_[:, t]
    return out


def minsum_init(inst: Instance, exact: bool = True) -> VectorMessages:
    w, scale = _weights(inst, exact)
    n = inst.n
    dtype = object if exact else np.float64
    a2b = np.zeros((n, n, n), dtype=dtype)
    b2a = np.zeros((n, n, n), dtype=dtype)
    idx = np.arange(n)
    for j in range(n):
        a2b[idx, j, idx] = w[:, j]
    for i in range(n):
        b2a[i, idx, idx] = w[i, :]
    return VectorMessages(a2b, b2a, 0, MIN_SUM, scale)


def _scaled_weights(inst: Instance, msgs) -> np.ndarray:
    if msgs.scale == 1 and msgs.a2b.dtype != object:
        return inst.w.astype(np.float64)
    return to_exact(inst.w, msgs.scale)


def minsum_step(inst: Instance, msgs: VectorMessages) -> VectorMessages:
    if msgs.mode != MIN_SUM:
        raise ValueError(f"expected min-sum messages, got {msgs.mode}")
    w = _scaled_weights(inst, msgs)
    a2b = _minsum_update(w, msgs.b2a)
    b2a = _minsum_update(w.T, msgs.a2b.transpose(1, 0, 2)).transpose(1, 0, 2)
    return VectorMessages(a2b, b2a, msgs.iteration + 1, MIN_SUM, msgs.scale)


def minsum_beliefs(inst: Instance, msgs: VectorMessages) -> Beliefs:
    w = _scaled_weights(inst, msgs)
    at_alpha = msgs.b2a.sum(axis=1) + w
    at_beta = msgs.a2b.transpose(1, 0, 2).sum(axis=1) + w.T
    return Beliefs(at_alpha, at_beta, msgs.iteration, msgs.scale)


def offset_removed(msgs: VectorMessages) -> tuple[np.ndarray, np.ndarray]:
    """Distinguished entry minus the common off-distinguished value, per message.

    Returns ``(a2b_mod[i, j], b2a_mod[i, j])`` in the same units as ``msgs``.
    For n = 1 there is no off-distinguished entry and the offset is 0.
    """
    n = msgs.a2b.shape[0]
    idx = np.arange(n)
    a_dist = msgs.a2b[idx, :, idx]           # [i, j]
    b_dist = msgs.b2a[:, idx, idx]           # [i, j]
    if n == 1:
        return a_dist.copy(), b_dist.copy()
    a_off = msgs.a2b[idx, :, (idx + 1) % n]
    b_off = msgs.b2a[:, idx, (idx + 1) % n]
    return a_dist - a_off, b_dist - b_off


# -- max-product -----------------------------------------------------------

def _check_maxprod_size(n: int, k: int) -> None:
    if n > MAXPROD_MAX_N:
        raise GuardError(f"max-product is limited to n <= {MAXPROD_MAX_N} (got {n})")
    if k > MAXPROD_MAX_K:
        raise GuardError(f"max-product is limited to k <= {MAXPROD_MAX_K} iterations (got {k})")


def _mp_phi(inst: Instance) -> list[list]:
    return [[_MP.exp(_MP.mpf(float(x))) for x in row] for row in inst.w]


def maxprod_init(inst: Instance) -> VectorMessages:
    n = inst.n
    _check_maxprod_size(n, 0)
    phi = _mp_phi(inst)
    one = _MP.mpf(1)
    a2b = np.empty((n, n, n), dtype=object)
    b2a = np.empty((n, n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            for v in range(n):
                a2b[i, j, v] = phi[i][j] if v == i else one
                b2a[i, j, v] = phi[i][j] if v == j else one
    return VectorMessages(a2b, b2a, 0, MAX_PRODUCT)


def _psi_star(psi_rows, x):
    """Row-wise max of psi[r][s] * x[s] (the D * X operation)."""
    return [max(p * xs for p, xs in zip(row, x)) for row in psi_rows]


def maxprod_step(inst: Instance, msgs: VectorMessages) -> VectorMessages:
    if msgs.mode != MAX_PRODUCT:
        raise ValueError(f"expected max-product messages, got {msgs.mode}")
    n = inst.n
    _check_maxprod_size(n, msgs.iteration + 1)
    phi = _mp_phi(inst)
    a2b = np.empty_like(msgs.a2b)
    b2a = np.empty_like(msgs.b2a)
    for i in range(n):
        for j in range(n):
            # alpha_i -> beta_j: Psi_{alpha_i beta_j}^t * ((prod_{l != j} M_{beta_l -> alpha_i}) . Phi_{alpha_i})
            x = [phi[i][q] for q in range(n)]
            for l in range(n):
                if l != j:
                    x = [xq * msgs.b2a[i, l, q] for q, xq in enumerate(x)]
            psi_t = [[psi(i, j, q, r) for q in range(n)] for r in range(n)]
            a2b[i, j, :] = _psi_star(psi_t, x)
    for j in range(n):
        for i in range(n):
            # beta_j -> alpha_i: Psi_{alpha_i beta_j} * ((prod_{l != i} M_{alpha_l -> beta_j}) . Phi_{beta_j})
            y = [phi[s][j] for s in range(n)]
            for l in range(n):
                if l != i:
                    y = [ys * msgs.a2b[l, j, s] for s, ys in enumerate(y)]
            psi_m = [[psi(i, j, q, s) for s in range(n)] for q in range(n)]
            b2a[i, j, :] = _psi_star(psi_m, y)
    return VectorMessages(a2b, b2a, msgs.iteration + 1, MAX_PRODUCT)


def maxprod_beliefs(inst: Instance, msgs: VectorMessages) -> Beliefs:
    n = inst.n
    phi = _mp_phi(inst)
    at_alpha = np.empty((n, n), dtype=object)
    at_beta = np.empty((n, n), dtype=object)
    for i in range(n):
        for q in range(n):
            v = phi[i][q]
            for l in range(n):
                v = v * msgs.b2a[i, l, q]
            at_alpha[i, q] = v
    for j in range(n):
        for s in range(n):
            v = phi[s][j]
            for l in range(n):
                v = v * msgs.a2b[l, j, s]
            at_beta[j, s] = v
    return Beliefs(at_alpha, at_beta, msgs.iteration, 1, MAXPROD_TIE_RTOL)


def log_messages(msgs: VectorMessages) -> tuple[np.ndarray, np.ndarray]:
    """Natural log of max-product messages, as mpmath floats."""
    log = np.frompyfunc(_MP.log, 1, 1)
    return log(msgs.a2b), log(msgs.b2a)


# -- estimates and runs ----------------------------------------------------

def argmax_rows(mat: np.ndarray, rel_tol: float = 0.0) -> tuple[tuple[int, ...], bool]:
    """Row-wise argmax with lowest-index tie-break; also reports any tie.

    With ``rel_tol`` (positive rows only) every value within that relative
    distance of the row maximum counts as tied.
    """
    if rel_tol:
        choice = []
        tie = False
        for row in mat:
            vals = list(row)
            top = max(vals)
            cut = top - abs(top) * rel_tol
            hits = [t for t, v in enumerate(vals) if v >= cut]
            choice.append(hits[0])
            tie = tie or len(hits) > 1
        return tuple(choice), tie
    if mat.dtype != object:
        choice = np.argmax(mat, axis=1)
        top = mat[np.arange(mat.shape[0]), choice]
        tie = bool(np.count_nonzero(mat == top[:, None]) > mat.shape[0])
        return tuple(choice.tolist()), tie
    choice = []
    tie = False
    for row in mat:
        vals = list(row)
        top = max(vals)
        choice.append(vals.index(top))
        tie = tie or sum(1 for v in vals if v == top) > 1
    return tuple(choice), tie


def estimate(beliefs: Beliefs) -> Assignment:
    choice, tie = argmax_rows(beliefs.at_alpha, beliefs.tie_rtol)
    return Assignment(choice, beliefs.iteration, tie)


def dense_op_count(n: int) -> int:
    """Additions and comparisons in one min-sum (or max-product) iteration
    including the alpha beliefs and the row-wise argmax."""
    update = n**3 * (n - 1) + n**2 * max(n - 2, 0)
    return 2 * update + n**3 + n * (n - 1)


def _dense_estimates(inst: Instance, mode: str, exact: bool) -> Iterator[tuple[Assignment, int]]:
    if mode == MIN_SUM:
        msgs = minsum_init(inst, exact=exact)
        step, beliefs = minsum_step, minsum_beliefs
        last = None
    elif mode == MAX_PRODUCT:
        msgs = maxprod_init(inst)
        step, beliefs = maxprod_step, maxprod_beliefs
        last = MAXPROD_MAX_K
    else:
        raise ValueError(f"unknown mode {mode!r}")
    ops = dense_op_count(inst.n)
    yield estimate(beliefs(inst, msgs)), 0
    while last is None or msgs.iteration < last:
        msgs = step(inst, msgs)
        yield estimate(beliefs(inst, msgs)), ops


def dense_history(inst: Instance, mode: str, iterations: int, exact: bool = True) -> list[Assignment]:
    """Estimates for k = 0..iterations without any stopping rule."""
    out = []
    for a, _ in _dense_estimates(inst, mode, exact):
        out.append(a)
        if a.iteration >= iterations:
            break
    return out


def run_dense(inst: Instance, mode: str = MIN_SUM, policy: StopPolicy | None = None,
              reference: Matching | None = None, exact: bool = True) -> ConvergenceReport:
    """Iterate step, beliefs and estimate until ``policy`` stops the run.

    Max-product runs stop at iteration 20 regardless of the policy.
    """
    policy = policy or StopPolicy()
    return drive(mode, _dense_estimates(inst, mode, exact), policy, reference)
