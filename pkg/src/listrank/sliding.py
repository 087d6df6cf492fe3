"""Sliding-window listwise reranking (the usual LLM-reranker baseline).

A window of ``w`` passages moves from the tail of the list to the head in
steps of ``s``. Each window is reordered most-relevant-first in place, so the
best ``w - s`` passages of every window ride along into the next one. One pass
settles the top ``w - s``; ``ceil(k / (w - s))`` passes settle the top ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from listrank.core import CandidateList, Ranking
from listrank.tournament import order_small
from listrank.unit import CallLedger, UnitBackend, UnitRequest, rank_unit


@dataclass(frozen=True)
class SlidingConfig:
    window: int = 5
    stride: int = 1
    iterations: int | None = None  # None: ceil(k / (window - stride))
    corrected_savings: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.stride < self.window:
            raise ValueError("stride must satisfy 1 <= stride < window")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @property
    def carry(self) -> int:
        return self.window - self.stride

    def passes_for(self, k: int) -> int:
        return self.iterations if self.iterations is not None else math.ceil(k / self.carry)


def window_starts(n: int, w: int, s: int) -> list[int]:
    """0-based window starts in visiting order (tail first, head window at 0)."""
    if n <= w:
        return [0]
    starts = list(range(n - w, 0, -s))
    if starts[-1] != 0:
        starts.append(0)
    return starts


def _early_stop(starts: Sequence[int], settled: int) -> int:
    """Windows worth running once the first ``settled`` positions are final."""
    for i, st in enumerate(starts):
        if st <= settled:
            return i + 1
    return len(starts)


def sliding_pass(
    order: list[int],
    cl: CandidateList,
    config: SlidingConfig,
    unit: UnitBackend,
    ledger: CallLedger | None = None,
    pass_index: int = 0,
    settled: int = 0,
) -> list[int]:
    """Run one tail-to-head pass over ``order`` (candidate indices) in place.

    With ``settled > 0`` the pass stops after the first window that reaches
    the settled prefix; later windows only shuffle already-final positions.
    """
    n, w = len(order), config.window
    if n < w:
        order[:] = order_small(cl, order, w, unit, ledger, pass_index)
        return order
    starts = window_starts(n, w, config.stride)
    if settled > 0:
        starts = starts[: _early_stop(starts, settled)]
    for st in starts:
        chunk = order[st : st + w]
        request = UnitRequest(cl.query, tuple(cl.candidates[c] for c in chunk), r=config.carry)
        result = rank_unit(request, unit, ledger, level=0, pass_index=pass_index)
        order[st : st + w] = [chunk[i - 1] for i in result.ranked()]
    return order


def sliding_rerank(
    cl: CandidateList,
    k: int,
    config: SlidingConfig,
    unit: UnitBackend,
    ledger: CallLedger | None = None,
) -> Ranking:
    """Rerank with repeated passes; the list after the final pass is the output."""
    if not 1 <= k <= cl.n:
        raise ValueError(f"k={k} out of range for n={cl.n}")
    ledger = ledger if ledger is not None else CallLedger()
    order = list(range(cl.n))
    passes = config.passes_for(k)
    for p in range(passes):
        last = p == passes - 1
        settled = p * config.carry if (last and config.corrected_savings) else 0
        sliding_pass(order, cl, config, unit, ledger, pass_index=p, settled=settled)
        if cl.n <= config.window:
            break  # a single window already ordered everything
    return Ranking.from_ids(cl.query, [cl.candidates[c].id for c in order])


def predict_sliding_calls(
    n: int,
    w: int,
    s: int,
    k: int,
    corrected: bool = False,
    iterations: int | None = None,
) -> int:
    config = SlidingConfig(window=w, stride=s, iterations=iterations, corrected_savings=corrected)
    if n <= w:
        return 1
    starts = window_starts(n, w, s)
    passes = config.passes_for(k)
    total = len(starts) * passes
    if corrected and passes > 1:
        total -= len(starts) - _early_stop(starts, (passes - 1) * config.carry)
    return total
