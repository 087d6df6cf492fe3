"""Shared value types: queries, passages, candidate lists, rankings, qrels."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)


class EmptyCandidateList(ValueError):
    pass


@dataclass(frozen=True)
class Query:
    qid: str
    text: str = ""

    def __post_init__(self) -> None:
        if not self.qid:
            raise ValueError("qid must be non-empty")


@dataclass(frozen=True)
class Passage:
    id: str
    text: str = ""
    first_stage_score: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("passage id must be non-empty")


@dataclass(frozen=True)
class CandidateList:
    """One query and its candidates in first-stage order (rank 1 first)."""

    query: Query
    candidates: tuple[Passage, ...]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise EmptyCandidateList("empty candidate list")
        ids = [p.id for p in self.candidates]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate passage ids; use dedup_candidates")

    @property
    def n(self) -> int:
        return len(self.candidates)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.candidates]

    def with_order(self, candidates: Sequence[Passage]) -> CandidateList:
        return CandidateList(self.query, tuple(candidates))


def dedup_candidates(raw: Iterable[Passage], query: Query | None = None) -> CandidateList:
    """Drop repeated passage ids, keeping the first occurrence of each."""
    seen: set[str] = set()
    kept: list[Passage] = []
    dropped = 0
    for p in raw:
        if p.id in seen:
            dropped += 1
            continue
        seen.add(p.id)
        kept.append(p)
    if not kept:
        raise EmptyCandidateList("empty candidate list")
    if dropped:
        logger.warning(
            "query %s: dropped %d duplicate candidate(s)",
            query.qid if query else "?",
            dropped,
        )
    return CandidateList(query or Query("_"), tuple(kept))


@dataclass(frozen=True)
class RankedItem:
    docid: str
    rank: int
    score: float


@dataclass(frozen=True)
class Ranking:
    query: Query
    ordered: tuple[RankedItem, ...]

    def __post_init__(self) -> None:
        ids = [it.docid for it in self.ordered]
        if len(set(ids)) != len(ids):
            raise ValueError("ranking contains duplicate passage ids")
        for i, it in enumerate(self.ordered, start=1):
            if it.rank != i:
                raise ValueError(f"ranks must be contiguous from 1, got {it.rank} at {i}")
        for a, b in zip(self.ordered, self.ordered[1:]):
            if not a.score > b.score:
                raise ValueError("scores must strictly decrease with rank")

    @classmethod
    def from_ids(cls, query: Query, docids: Sequence[str]) -> Ranking:
        """Rank-only ranking with synthetic scores ``len - rank + 1``."""
        size = len(docids)
        return cls(
            query,
            tuple(RankedItem(d, i, float(size - i + 1)) for i, d in enumerate(docids, start=1)),
        )

    @property
    def docids(self) -> list[str]:
        return [it.docid for it in self.ordered]

    def __len__(self) -> int:
        return len(self.ordered)


@dataclass
class Qrels:
    """Graded judgments; absent (qid, docid) pairs have grade 0."""

    grades: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for qid, row in self.grades.items():
            for docid, g in row.items():
                if g < 0:
                    raise ValueError(f"negative grade for ({qid}, {docid})")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Mapping[str, int]]) -> Qrels:
        return cls({q: dict(row) for q, row in data.items()})

    def grade(self, qid: str, docid: str) -> int:
        return self.grades.get(qid, {}).get(docid, 0)

    def for_query(self, qid: str) -> dict[str, int]:
        return self.grades.get(qid, {})

    def set(self, qid: str, docid: str, grade: int) -> None:
        if grade < 0:
            raise ValueError("grade must be >= 0")
        self.grades.setdefault(qid, {})[docid] = grade
