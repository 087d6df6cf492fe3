"""Retrieval metrics (NDCG, MRR) and positional-bias statistics."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from listrank.core import Qrels, Ranking


@dataclass
class MetricReport:
    metric_name: str
    cutoff: int
    per_query: dict[str, float] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        if not self.per_query:
            return 0.0
        return math.fsum(self.per_query.values()) / len(self.per_query)

    def to_dict(self, ndigits: int | None = None) -> dict:
        fmt = (lambda v: v) if ndigits is None else (lambda v: round(v, ndigits))
        return {
            "metric": self.metric_name,
            "cutoff": self.cutoff,
            "mean": fmt(self.mean),
            "per_query": {q: fmt(v) for q, v in sorted(self.per_query.items())},
        }


def _dcg(gains: Iterable[float]) -> float:
    return math.fsum(g / math.log2(i + 1) for i, g in enumerate(gains, start=1))


def ndcg_at(ranking: Ranking, qrels: Qrels, cutoff: int = 10) -> float:
    """NDCG with linear gain; the ideal list is built from every judged passage."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    judged = qrels.for_query(ranking.query.qid)
    ideal = sorted((g for g in judged.values() if g > 0), reverse=True)[:cutoff]
    idcg = _dcg(ideal)
    if idcg == 0:
        return 0.0
    dcg = _dcg(judged.get(d, 0) for d in ranking.docids[:cutoff])
    return dcg / idcg


def mrr_at(ranking: Ranking, qrels: Qrels, cutoff: int = 10) -> float:
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    judged = qrels.for_query(ranking.query.qid)
    for i, d in enumerate(ranking.docids[:cutoff], start=1):
        if judged.get(d, 0) >= 1:
            return 1.0 / i
    return 0.0


METRICS = {"ndcg": ndcg_at, "mrr": mrr_at}


def evaluate(rankings: Iterable[Ranking], qrels: Qrels, metric: str = "ndcg", cutoff: int = 10) -> MetricReport:
    """Macro-average ``metric`` over the given rankings.

    A query with no judgments scores 0 and still counts in the mean.
    """
    fn = METRICS[metric]
    report = MetricReport(metric, cutoff)
    for rk in rankings:
        report.per_query[rk.query.qid] = fn(rk, qrels, cutoff)
    return report


# -- positional bias -----------------------------------------------------------


@dataclass(frozen=True)
class Trial:
    position: int  # 1-based slot holding the positive
    picked: str
    positive: str
    group_id: str


@dataclass
class BiasReport:
    accuracy_by_position: list[float]
    std: float
    agreement_ratio: float
    groups: int = 0

    def to_dict(self, ndigits: int | None = None) -> dict:
        fmt = (lambda v: v) if ndigits is None else (lambda v: round(v, ndigits))
        return {
            "accuracy_by_position": [fmt(a) for a in self.accuracy_by_position],
            "std": fmt(self.std),
            "agreement_ratio": fmt(self.agreement_ratio),
            "groups": self.groups,
        }


class IncompleteGroup(ValueError):
    pass


def bias_report(trials: Sequence[Trial], m: int | None = None) -> BiasReport:
    """Per-position accuracy (percent), their population std, and agreement ratio."""
    by_group: dict[str, dict[int, Trial]] = defaultdict(dict)
    for t in trials:
        if t.position in by_group[t.group_id]:
            raise IncompleteGroup(f"group {t.group_id} has two trials at position {t.position}")
        by_group[t.group_id][t.position] = t
    if not by_group:
        raise ValueError("no trials")
    if m is None:
        m = max(len(g) for g in by_group.values())
    positions = list(range(1, m + 1))
    for gid, g in by_group.items():
        if sorted(g) != positions:
            raise IncompleteGroup(f"group {gid} does not cover positions 1..{m}")

    n_groups = len(by_group)
    hits = np.zeros(m)
    agree = 0
    for g in by_group.values():
        for j in positions:
            hits[j - 1] += g[j].picked == g[j].positive
        agree += len({t.picked for t in g.values()}) == 1
    acc = hits / n_groups * 100.0
    return BiasReport(
        accuracy_by_position=[float(a) for a in acc],
        std=float(np.std(acc)),
        agreement_ratio=agree / n_groups * 100.0,
        groups=n_groups,
    )

