"""Auction-style solvers: the classic auction and the two min-sum auctions.

Buyers are the alpha nodes, objects the beta nodes.  Every engine runs either
on float64 or, with ``exact=True``, on Python ints scaled by a common power
of two (weights and delta are dyadic, so nothing is rounded).  Exact prices
come back as Fractions.

Ties for the maximum bidder go to the lowest buyer index, and ties for the
benefit-maximising object to the lowest object index.  With n = 1 the max
over "every other object" is empty and taken as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .instance import Instance, Matching, exact_weights, from_exact, to_exact
from .oracle import DualSolution, instance_stats

DEFAULT_CAP = 10_000
CLASSIC_DEFAULT_CAP = 1_000_000


class AuctionCapExceeded(RuntimeError):
    """The round cap ran out before the assignment became complete."""

    def __init__(self, message: str, state: "AuctionState"):
        super().__init__(message)
        self.state = state


def _numeric(inst: Instance, delta, exact: bool):
    """(weights, delta, scale) in the requested arithmetic."""
    if exact:
        w, scale = exact_weights(inst, float(delta))
        return w, to_exact(float(delta), scale).item(), scale
    return inst.w, float(delta), 1


def _export(values, scale: int, exact: bool) -> tuple:
    if exact:
        return tuple(from_exact(np.asarray(values, dtype=object), scale))
    return tuple(float(x) for x in values)


def _best_two(vals: np.ndarray):
    """Per row: lowest argmax j, its value v, and the best value u elsewhere."""
    n_rows, n = vals.shape
    rows = np.arange(n_rows)
    j = np.argmax(vals, axis=1)
    v = vals[rows, j]
    if n == 1:
        return j, v, v * 0
    rest = vals.copy()
    rest[rows, j] = -math.inf
    return j, v, rest.max(axis=1)


# ---------------------------------------------------------------- classic


@dataclass
class AuctionState:
    n: int
    owner: dict = field(default_factory=dict)     # object j -> buyer i
    unassigned: set = field(default_factory=set)
    prices: np.ndarray | None = None
    delta: object = 0
    round: int = 0
    scale: int = 1
    price_history: list = field(default_factory=list)
    assigned_history: list = field(default_factory=list)

    @property
    def pairs(self) -> set[tuple[int, int]]:
        return {(i, j) for j, i in self.owner.items()}

    def dump(self) -> str:
        pairs = sorted(self.pairs)
        return (f"round={self.round} S={pairs} I={sorted(self.unassigned)} "
                f"p={[str(x) for x in self.prices]}")


@dataclass(frozen=True)
class AuctionResult:
    matching: Matching
    prices: tuple
    rounds: int
    price_history: list
    assigned_history: list


def auction_run(inst: Instance, delta, allow_zero: bool = False, cap: int = CLASSIC_DEFAULT_CAP,
                exact: bool = False) -> AuctionResult:
    """Jacobi auction: every unassigned buyer bids on its best object each round.

    A winning bid is ``w_ij - u_i + delta``.  Prices and the number of assigned
    objects are recorded after every round.  ``delta = 0`` may livelock and is
    refused unless ``allow_zero``.
    """
    if delta < 0 or (delta == 0 and not allow_zero):
        raise ValueError("classic auction needs delta > 0 (pass allow_zero to experiment)")
    n = inst.n
    w, d, scale = _numeric(inst, delta, exact)
    zero = w[0, 0] * 0
    state = AuctionState(n, {}, set(range(n)), np.array([zero] * n, dtype=w.dtype), delta,
                         0, scale)
    state.price_history.append(_export(state.prices, scale, exact))
    state.assigned_history.append(0)
    while len(state.owner) < n:
        if state.round >= cap:
            raise AuctionCapExceeded(f"auction hit the round cap {cap}: {state.dump()}", state)
        bidders = sorted(state.unassigned)
        j, _, u = _best_two(w[bidders] - state.prices[None, :])
        bids: dict[int, tuple[object, int]] = {}
        for t, i in enumerate(bidders):
            obj = int(j[t])
            b = w[i, obj] - u[t] + d
            if obj not in bids or b > bids[obj][0]:
                bids[obj] = (b, i)
        for obj, (b, i) in bids.items():
            state.prices[obj] = b
            old = state.owner.get(obj)
            if old is not None:
                state.unassigned.add(old)
            state.owner[obj] = i
            state.unassigned.discard(i)
        state.round += 1
        state.price_history.append(_export(state.prices, scale, exact))
        state.assigned_history.append(len(state.owner))
    pi = [0] * n
    for obj, i in state.owner.items():
        pi[i] = obj
    return AuctionResult(Matching(tuple(pi)), _export(state.prices, scale, exact), state.round,
                         state.price_history, state.assigned_history)


# ---------------------------------------------------------------- min-sum auctions


@dataclass(frozen=True)
class MsaState:
    """Bids (``bids[i, j]`` from buyer i to object j) and prices after one round."""

    bids: np.ndarray
    prices: np.ndarray
    round: int


@dataclass
class MsaResult:
    algorithm: str
    matching: Matching | None
    terminated: bool
    rounds: int
    prices: tuple
    trace: list[MsaState]
    delta: object
    scale: int = 1
    accepted: list = field(default_factory=list)   # per round, accepted (buyer, object) pairs


def _msa1_bids(w, prices, d):
    """Buyer i's message to object j: w_ij - max_{l != j}(w_il - p_l) + delta."""
    n = w.shape[0]
    vals = w - prices[None, :]
    bids = np.empty_like(w)
    for j in range(n):
        if n == 1:
            m = vals[:, 0] * 0
        else:
            m = np.delete(vals, j, axis=1).max(axis=1)
        bids[:, j] = (w[:, j] - m) + d
    return bids


def _msa2_bids(w, prices, d):
    """Winning object gets w - u, the others w - v; delta added to both."""
    rows = np.arange(w.shape[0])
    j, v, u = _best_two(w - prices[None, :])
    m = np.repeat(v[:, None], w.shape[1], axis=1)
    m[rows, j] = u
    return (w - m) + d


def _accept(bids, prev_prices, keep_condition: bool):
    """For each object the lowest-index top bidder, kept if its bid reaches the
    object's previous price (when ``keep_condition``)."""
    top = np.argmax(bids, axis=0)
    out = []
    for j, i in enumerate(top):
        if not keep_condition or bids[i, j] >= prev_prices[j]:
            out.append((int(i), j))
    return out


def _complete(pairs, n: int) -> Matching | None:
    if len(pairs) != n or len({i for i, _ in pairs}) != n:
        return None
    pi = [0] * n
    for i, j in pairs:
        pi[i] = j
    return Matching(tuple(pi))


def _msa_run(name, bid_fn, inst, delta, cap, exact, keep_condition=True, stop=True,
             record=True) -> MsaResult:
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    n = inst.n
    w, d, scale = _numeric(inst, delta, exact)
    prices = np.array([w[0, 0] * 0] * n, dtype=w.dtype)
    trace: list[MsaState] = []
    accepted = []
    found = None
    k = 0
    while k < cap:
        k += 1
        bids = bid_fn(w, prices, d)
        new_prices = bids.max(axis=0)
        pairs = _accept(bids, prices, keep_condition)
        prices = new_prices
        if record:
            trace.append(MsaState(bids, prices, k))
        accepted.append(pairs)
        m = _complete(pairs, n)
        if m is not None and found is None:
            found = (m, k, prices)
            if stop:
                break
    if found is None:
        return MsaResult(name, None, False, k, _export(prices, scale, exact), trace, delta, scale,
                         accepted)
    m, k_done, p_done = found
    return MsaResult(name, m, True, k_done, _export(p_done, scale, exact), trace, delta, scale,
                     accepted)


def msa1_run(inst: Instance, delta=0.0, keep_condition: bool = True, cap: int = DEFAULT_CAP,
             exact: bool = False, record: bool = True) -> MsaResult:
    """Min-sum auction I: message form, buyer-independent price messages.

    ``keep_condition=False`` drops the previous-price test from the estimate;
    termination is then conjectural and only bounded by ``cap``.
    """
    return _msa_run("msa1", _msa1_bids, inst, delta, cap, exact, keep_condition, record=record)


def msa2_run(inst: Instance, delta=0.0, cap: int = DEFAULT_CAP, exact: bool = False,
             record: bool = True) -> MsaResult:
    """Min-sum auction II: every buyer bids on every object every round and S is
    rebuilt from the top bidders whose bid reaches the previous price."""
    return _msa_run("msa2", _msa2_bids, inst, delta, cap, exact, record=record)


def extract_dual(inst: Instance, prices, m: Matching, delta=0) -> DualSolution:
    """r_i = w_{i,m(i)} - p_{m(i)} + delta, prices unchanged.

    With delta > 0 the shift by delta makes the pair dual feasible at a
    delta-relaxed termination while keeping delta-CS; delta = 0 is the plain
    complementary-slackness certificate.
    """
    if len(prices) != inst.n:
        raise ValueError("price vector has the wrong length")
    pi = m.pi if isinstance(m, Matching) else Matching(tuple(m)).pi
    exact = any(isinstance(x, Fraction) for x in prices) or isinstance(delta, Fraction)
    if exact:
        q = Fraction
        r = tuple(q(float(inst.w[i, j])) - q(prices[j]) + q(delta) for i, j in enumerate(pi))
    else:
        r = tuple(float(inst.w[i, j]) - float(prices[j]) + float(delta) for i, j in enumerate(pi))
    return DualSolution(r, tuple(prices))


def termination_rate(instances, delta=0.0, keep_condition: bool = False, cap: int = 1000,
                     exact: bool = False) -> float:
    """Fraction of instances on which min-sum auction I terminates within ``cap``."""
    runs = [msa1_run(inst, delta, keep_condition, cap, exact, record=False).terminated
            for inst in instances]
    return sum(runs) / len(runs) if runs else 0.0


# ---------------------------------------------------------------- price probe


@dataclass(frozen=True)
class PriceProbeReport:
    skipped: bool
    horizon: int
    observed: bool = False
    first_increase: tuple = ()      # per k, the smallest T with p^t > p^k for all t >= T, or None
    reason: str = ""


def price_monotonicity_probe(inst: Instance, horizon: int = 200) -> PriceProbeReport:
    """Run min-sum auction II with delta = 0 for ``horizon`` rounds, ignoring
    termination, and look for eventual strict price increase.

    For each k the report holds the smallest T > k such that every later
    observed price vector strictly dominates p^k.  The increase counts as
    observed when such a T exists for every k in the first half of the run
    (the second half has too little future to judge).
    """
    stats = instance_stats(inst, allow_tie=True)
    if stats.tie:
        return PriceProbeReport(True, horizon, reason="maximum weight matching is not unique")
    res = _msa_run("msa2", _msa2_bids, inst, 0.0, horizon, True, stop=False)
    prices = np.array([[0] * inst.n] + [list(s.prices) for s in res.trace], dtype=object)
    # suffix[t] is the coordinatewise min of prices[t:], nondecreasing in t
    suffix = prices.copy()
    for t in range(len(prices) - 2, -1, -1):
        suffix[t] = np.minimum(suffix[t], suffix[t + 1])
    first = []
    for k in range(len(prices)):
        lo, hi = k + 1, len(prices)
        while lo < hi:
            mid = (lo + hi) // 2
            if np.all(suffix[mid] > prices[k]):
                hi = mid
            else:
                lo = mid + 1
        first.append(lo if lo < len(prices) else None)
    half = horizon // 2
    observed = all(T is not None for T in first[: half + 1])
    return PriceProbeReport(False, horizon, observed, tuple(first))


def exact_weight(inst: Instance, m: Matching) -> Fraction:
    return sum((Fraction(float(inst.w[i, j])) for i, j in enumerate(m.pi)), Fraction(0))


def weight_within(inst: Instance, m: Matching, best: Matching, slack) -> bool:
    """Exact check of W_m >= W_best - slack."""
    return exact_weight(inst, m) >= exact_weight(inst, best) - Fraction(slack)

