"""Weighted complete bipartite instances, matchings and their file format.

Nodes are 0-based internally.  The text file format and the CLI print
1-based indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
SPLITMIX_MUL1 = 0xBF58476D1CE4E5B9
SPLITMIX_MUL2 = 0x94D049BB133111EB


class InstanceFormatError(ValueError):
    """Malformed instance text.  ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Instance:
    """Complete bipartite graph K_{n,n}; ``w[i, j]`` weighs edge (alpha_i, beta_j)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError(f"weight matrix must be square with n >= 1, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def w_star(self) -> float:
        return float(np.max(np.abs(self.w)))

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.w.shape == other.w.shape and bool(np.array_equal(self.w, other.w))

    def __hash__(self):
        return hash(self.w.tobytes())


@dataclass(frozen=True)
class Matching:
    """A perfect matching: ``pi[i]`` is the beta partner of alpha_i."""

    pi: tuple[int, ...]

    def __post_init__(self):
        pi = tuple(int(x) for x in self.pi)
        n = len(pi)
        if n < 1 or sorted(pi) != list(range(n)):
            raise ValueError(f"not a permutation of 0..{n - 1}: {pi}")
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return len(self.pi)

    def one_based(self) -> tuple[int, ...]:
        return tuple(x + 1 for x in self.pi)


@dataclass(frozen=True)
class Assignment:
    """Per-row estimate; unlike a Matching it need not be a bijection."""

    choice: tuple[int, ...]
    iteration: int = 0
    tie: bool = False

    def __post_init__(self):
        object.__setattr__(self, "choice", tuple(int(x) for x in self.choice))

    def one_based(self) -> tuple[int, ...]:
        return tuple(x + 1 for x in self.choice)

    def to_matching(self) -> Matching:
        return Matching(self.choice)


@dataclass(frozen=True)
class InstanceStats:
    best: Matching
    best_weight: float
    second_weight: float
    epsilon: float
    w_star: float
    bound: int | None = field(default=None)

    @property
    def tie(self) -> bool:
        return self.epsilon <= 0


def _choices(m: Matching | Assignment | Sequence[int]) -> tuple[int, ...]:
    if isinstance(m, Matching):
        return m.pi
    if isinstance(m, Assignment):
        return m.choice
    return tuple(int(x) for x in m)


def matching_weight(inst: Instance, m: Matching | Sequence[int]) -> float:
    """Sum of w[i, m(i)] over all rows."""
    pi = _choices(m)
    if len(pi) != inst.n:
        raise ValueError(f"matching has {len(pi)} entries, instance has n={inst.n}")
    if any(not 0 <= j < inst.n for j in pi):
        raise ValueError(f"matching index out of range: {pi}")
    return float(inst.w[np.arange(inst.n), list(pi)].sum())


def is_matching(a: Assignment | Matching | Sequence[int]) -> bool:
    choice = _choices(a)
    return len(choice) > 0 and sorted(choice) == list(range(len(choice)))


def splitmix64_next(state: int) -> tuple[int, int]:
    """One generator step; returns ``(new_state, output)``."""
    state = (state + SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * SPLITMIX_MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * SPLITMIX_MUL2) & _MASK64
    return state, z ^ (z >> 31)


def splitmix64_uniform(seed: int, count: int) -> np.ndarray:
    """``count`` doubles in [0, 1) from a splitmix64 stream started at ``seed``.

    The k-th state is seed + k * gamma (mod 2**64), so the whole stream is
    computed at once with wrapping uint64 arithmetic.
    """
    k = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + k * np.uint64(SPLITMIX_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(SPLITMIX_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(SPLITMIX_MUL2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def gen_random_instance(n: int, seed: int) -> Instance:
    """i.i.d. uniform [0, 1) weights, row-major, reproducible per (n, seed)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Instance(splitmix64_uniform(seed, n * n).reshape(n, n))


def derive_seed(*parts: int) -> int:
    """Mix integers into one 64-bit seed (used for per-trial streams)."""
    state = 0
    for p in parts:
        state, out = splitmix64_next((state ^ (p & _MASK64)) & _MASK64)
        state = out
    return state


def parse_instance(text: str) -> Instance:
    rows: list[list[float]] = []
    n: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if n is None:
            if len(tokens) != 1:
                raise InstanceFormatError(f"header must be a single integer n, got {line!r}", lineno)
            try:
                n = int(tokens[0])
            except ValueError:
                raise InstanceFormatError(f"header is not an integer: {tokens[0]!r}", lineno) from None
            if n < 1:
                raise InstanceFormatError(f"n must be >= 1, got {n}", lineno)
            continue
        if len(rows) == n:
            raise InstanceFormatError(f"unexpected extra row (expected {n} rows)", lineno)
        if len(tokens) != n:
            raise InstanceFormatError(
                f"row {len(rows) + 1} has {len(tokens)} entr{'y' if len(tokens) == 1 else 'ies'}, expected {n}", lineno)
        row = []
        for tok in tokens:
            try:
                x = float(tok)
            except ValueError:
                raise InstanceFormatError(f"non-numeric token {tok!r}", lineno) from None
            if not math.isfinite(x):
                raise InstanceFormatError(f"non-finite weight {tok!r}", lineno)
            row.append(x)
        rows.append(row)
    if n is None:
        raise InstanceFormatError("missing header line")
    if len(rows) != n:
        raise InstanceFormatError(f"expected {n} rows, found {len(rows)}")
    return Instance(np.array(rows, dtype=np.float64))


def serialize_instance(inst: Instance) -> str:
    lines = [str(inst.n)]
    lines += [" ".join(repr(float(x)) for x in row) for row in inst.w]
    return "\n".join(lines) + "\n"


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def save_instance(inst: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_instance(inst))


# Exact arithmetic.  Every float64 is a dyadic rational, and the message
# recursions only add, subtract and take maxima, so scaling all inputs by a
# common power of two turns every quantity into a Python int.

def common_scale(*values: Iterable[float] | float) -> int:
    """Smallest power of two clearing every denominator among ``values``."""
    scale = 1
    for v in values:
        arr = np.atleast_1d(np.asarray(v, dtype=np.float64)).ravel()
        for x in arr:
            scale = max(scale, Fraction(float(x)).denominator)
    return scale


def to_exact(values, scale: int) -> np.ndarray:
    """Object array of Python ints equal to ``values * scale`` (exactly)."""
    arr = np.asarray(values, dtype=np.float64)
    out = np.empty(arr.shape, dtype=object)
    flat = out.reshape(-1)
    for idx, x in enumerate(arr.ravel()):
        q = Fraction(float(x)) * scale
        if q.denominator != 1:
            raise ValueError(f"{x!r} is not a multiple of 1/{scale}")
        flat[idx] = q.numerator
    return out


def exact_weights(inst: Instance, *extra: float) -> tuple[np.ndarray, int]:
    """Integer weight matrix and its scale; ``extra`` scalars share the scale."""
    scale = common_scale(inst.w, *extra)
    return to_exact(inst.w, scale), scale


def from_exact(values, scale: int):
    """Map scaled ints back to Fractions (arrays stay object arrays)."""
    if isinstance(values, np.ndarray):
        out = np.empty(values.shape, dtype=object)
        flat = out.reshape(-1)
        for idx, x in enumerate(values.ravel()):
            flat[idx] = Fraction(int(x), scale)
        return out
    return Fraction(int(values), scale)
