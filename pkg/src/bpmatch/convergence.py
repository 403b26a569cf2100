"""Stop policy and per-run convergence reports shared by the iterative solvers."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .instance import Assignment, Matching, is_matching

HARD_ITERATION_CAP = 100_000


@dataclass(frozen=True)
class StopPolicy:
    """Stop once the estimate is a matching and unchanged for ``stability_window``
    consecutive iterations (iteration 0 counts), or at the cap.

    The cap is ``max(max_iterations, bound + stability_window - 1)`` so a
    known iteration bound always leaves room to confirm stability, clipped to
    HARD_ITERATION_CAP.
    """

    max_iterations: int = 1000
    stability_window: int = 3
    bound: int | None = None

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.stability_window < 1:
            raise ValueError("stability_window must be >= 1")

    @property
    def cap(self) -> int:
        cap = self.max_iterations
        if self.bound is not None:
            cap = max(cap, self.bound + self.stability_window - 1)
        return min(cap, HARD_ITERATION_CAP)


@dataclass
class ConvergenceReport:
    algorithm: str
    iterations_run: int
    converged: bool
    final: Assignment
    matched_oracle: bool | None = None
    bound: int | None = None
    tie_flags: list[bool] = field(default_factory=list)
    op_counts: list[int] = field(default_factory=list)
    history: list[Assignment] = field(default_factory=list)

    def first_stable_iteration(self, target: Matching | None = None) -> int | None:
        """Earliest k whose estimate equals ``target`` (default: the final one)
        at every recorded iteration from k to the end, or None."""
        goal = target.pi if target is not None else self.final.choice
        k = None
        for a in reversed(self.history):
            if a.choice != goal:
                break
            k = a.iteration
        return k

    @property
    def ops_per_iteration(self) -> float:
        """Mean operation count over iterations k >= 1."""
        ops = self.op_counts[1:]
        return sum(ops) / len(ops) if ops else 0.0


def drive(algorithm: str, estimates: Iterator[tuple[Assignment, int]], policy: StopPolicy,
          reference: Matching | None = None, horizon: int | None = None) -> ConvergenceReport:
    """Consume (estimate, op_count) pairs for k = 0, 1, ... under ``policy``.

    With ``horizon`` the run ignores the early stop and continues to that
    iteration; ``converged`` then describes the last stability window.
    """
    history: list[Assignment] = []
    ops: list[int] = []
    window = policy.stability_window
    cap = policy.cap if horizon is None else horizon
    converged = False
    for a, count in estimates:
        history.append(a)
        ops.append(count)
        recent = history[-window:]
        converged = (len(recent) == window and is_matching(a)
                     and all(x.choice == a.choice for x in recent))
        if (converged and horizon is None) or a.iteration >= cap:
            break
    final = history[-1]
    matched = None
    if reference is not None:
        matched = converged and final.choice == reference.pi
    return ConvergenceReport(
        algorithm=algorithm,
        iterations_run=final.iteration,
        converged=converged,
        final=final,
        matched_oracle=matched,
        bound=policy.bound,
        tie_flags=[x.tie for x in history],
        op_counts=ops,
        history=history,
    )


def write_trace(history: Iterable[Assignment], fh) -> None:
    """One CSV line per iteration: ``k,<1-based choices joined by ';'>,is_matching,tie``."""
    writer = csv.writer(fh, lineterminator="\n")
    for a in history:
        writer.writerow([a.iteration, ";".join(str(c) for c in a.one_based()),
                         int(is_matching(a)), int(a.tie)])


def read_trace(fh) -> list[Assignment]:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    out = []
    for row in csv.reader(fh):
        if not row:
            continue
        k, choice, matching_flag, tie = row
        a = Assignment(tuple(int(c) - 1 for c in choice.split(";")), int(k), bool(int(tie)))
        if bool(int(matching_flag)) != is_matching(a):
            raise ValueError(f"trace row {k}: is_matching column disagrees with choices")
        out.append(a)
    return out
