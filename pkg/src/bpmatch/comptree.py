"""Unrolled computation trees of K_{n,n} and maximum weight T-matchings.

T^k rooted at alpha_i has levels 0..k+1.  The root has the n children
beta_1..beta_n; every other non-leaf node has the n-1 children of the opposite
side whose index differs from its own parent's index.  Levels alternate
alpha (even) and beta (odd).  A T-matching is a matching of the tree that
covers every non-leaf node; leaves may stay uncovered.

Nodes of one level are stored contiguously and the children of the p-th node
of level L are the positions p*d .. p*d+d-1 of level L+1, so the DP below is
a sequence of reshapes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import GuardError, minsum_beliefs, minsum_init, minsum_step
from .instance import Instance, exact_weights
from .scalar import sms_init, sms_step_fast

MAX_TREE_NODES = 10**6


def tree_node_count(n: int, k: int) -> int:
    if n == 1:
        return 2
    if n == 2:
        return 1 + n * (k + 1)
    return 1 + n * ((n - 1) ** (k + 1) - 1) // (n - 2)


def _guard(n: int, k: int) -> int:
    if k < 0:
        raise ValueError("k must be >= 0")
    count = tree_node_count(n, k)
    if count > MAX_TREE_NODES:
        raise GuardError(f"computation tree for n={n}, k={k} has {count} nodes (> {MAX_TREE_NODES})")
    return count


@dataclass(frozen=True)
class ComputationTree:
    n: int
    root: int
    k: int
    labels: tuple[np.ndarray, ...]        # per level, node label index
    parent_labels: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]       # per level >= 1, weight of the edge to the parent
    scale: int = 1

    @property
    def node_count(self) -> int:
        return sum(len(level) for level in self.labels)

    def fanout(self, level: int) -> int:
        if level + 1 >= len(self.labels):
            return 0
        return len(self.labels[level + 1]) // len(self.labels[level])

    def side(self, level: int) -> str:
        return "alpha" if level % 2 == 0 else "beta"

    def edges(self):
        """Yield ``(parent_id, child_id, weight)`` with ids numbered level by level."""
        offset = 0
        for level in range(len(self.labels) - 1):
            d = self.fanout(level)
            size = len(self.labels[level])
            child_offset = offset + size
            for c, wt in enumerate(self.weights[level + 1]):
                yield offset + c // d, child_offset + c, wt
            offset += size

    def leaf_ids(self) -> set[int]:
        out = set()
        offset = 0
        for level in range(len(self.labels)):
            size = len(self.labels[level])
            if self.fanout(level) == 0:
                out.update(range(offset, offset + size))
            offset += size
        return out


def build_tree(inst: Instance, root: int, k: int, exact: bool = False) -> ComputationTree:
    n = inst.n
    if not 0 <= root < n:
        raise IndexError(f"root {root} out of range")
    count = _guard(n, k)
    if exact:
        w, scale = exact_weights(inst)
    else:
        w, scale = inst.w, 1
    # others[y] lists every index except y, in increasing order.
    others = np.array([[x for x in range(n) if x != y] for y in range(n)], dtype=np.int64).reshape(n, n - 1)
    labels = [np.array([root])]
    parent_labels = [np.array([-1])]
    weights = [np.empty(0, dtype=w.dtype)]
    kids = np.arange(n)
    labels.append(kids)
    parent_labels.append(np.full(n, root))
    weights.append(w[root, kids])
    for level in range(1, k + 1):
        cur, par = labels[-1], parent_labels[-1]
        if n == 1:
            break
        child = others[par].reshape(-1)
        child_parent = np.repeat(cur, n - 1)
        if level % 2 == 1:      # parent beta_x, children alpha_c: w[c, x]
            wt = w[child, child_parent]
        else:                   # parent alpha_x, children beta_c: w[x, c]
            wt = w[child_parent, child]
        labels.append(child)
        parent_labels.append(child_parent)
        weights.append(wt)
    tree = ComputationTree(n, root, k, tuple(labels), tuple(parent_labels), tuple(weights), scale)
    assert tree.node_count == count
    return tree


def _level_values(tree: ComputationTree):
    """Per level, (covered-by-parent, not-covered-by-parent) subtree optima."""
    depth = len(tree.labels)
    matched = [None] * depth
    free = [None] * depth
    last = depth - 1
    zero = np.zeros(len(tree.labels[last]), dtype=tree.weights[last].dtype)
    matched[last], free[last] = zero, zero.copy()
    for level in range(last - 1, 0, -1):
        d = tree.fanout(level)
        gain = (tree.weights[level + 1] + matched[level + 1] - free[level + 1]).reshape(-1, d)
        sum_free = free[level + 1].reshape(-1, d).sum(axis=1)
        matched[level] = sum_free
        free[level] = sum_free + gain.max(axis=1)
    return matched, free


@dataclass(frozen=True)
class TMatchingValue:
    """``t[r]``: best T-matching weight using the root edge to beta_r."""

    t: np.ndarray
    root: int
    k: int
    scale: int = 1


def max_t_matching(tree: ComputationTree) -> TMatchingValue:
    matched, free = _level_values(tree)
    gain = tree.weights[1] + matched[1] - free[1]
    t = free[1].sum() + gain
    return TMatchingValue(t, tree.root, tree.k, tree.scale)


def root_edge_values(tree: ComputationTree, j: int) -> tuple[object, object]:
    """Best T-matching of {root edge to beta_j} + descendants of beta_j, with and
    without that edge (the root itself need not be covered)."""
    matched, free = _level_values(tree)
    return tree.weights[1][j] + matched[1][j], free[1][j]


def tree_root_choice(inst: Instance, k: int) -> tuple[int, ...]:
    """argmax_r t^k_{alpha_i}(r) for every root i (lowest index on ties)."""
    out = []
    for i in range(inst.n):
        t = max_t_matching(build_tree(inst, i, k, exact=True)).t
        vals = list(t)
        out.append(vals.index(max(vals)))
    return tuple(out)


def check_belief_tree_identity(inst: Instance, k: int) -> bool:
    """Dense min-sum beliefs after k iterations equal twice the tree optima, exactly,
    at every alpha node."""
    _guard(inst.n, k)
    msgs = minsum_init(inst, exact=True)
    for _ in range(k):
        msgs = minsum_step(inst, msgs)
    beliefs = minsum_beliefs(inst, msgs)
    for i in range(inst.n):
        value = max_t_matching(build_tree(inst, i, k, exact=True))
        if value.scale != beliefs.scale:
            raise AssertionError("scale mismatch between engines")
        if any(b != 2 * t for b, t in zip(beliefs.at_alpha[i], value.t)):
            return False
    return True


def check_message_tree_difference(inst: Instance, k: int) -> bool:
    """Each simplified message beta_j -> alpha_i after k iterations equals the
    with-edge minus without-edge optimum on the subtree below that edge."""
    _guard(inst.n, k)
    msgs = sms_init(inst, exact=True)
    for _ in range(k):
        msgs = sms_step_fast(inst, msgs)
    for i in range(inst.n):
        tree = build_tree(inst, i, k, exact=True)
        if tree.scale != msgs.scale:
            raise AssertionError("scale mismatch between engines")
        matched, free = _level_values(tree)
        diff = tree.weights[1] + matched[1] - free[1]
        if any(msgs.b2a[i, j] != diff[j] for j in range(inst.n)):
            return False
    return True
