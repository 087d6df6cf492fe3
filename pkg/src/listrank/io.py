"""Candidate, qrels and run-file readers/writers."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from listrank.core import CandidateList, EmptyCandidateList, Passage, Qrels, Query, RankedItem, Ranking, dedup_candidates

logger = logging.getLogger(__name__)


class FormatError(ValueError):
    def __init__(self, path: str | Path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


def read_candidates(path: str | Path) -> list[CandidateList]:
    """One JSON object per line: ``{"qid", "query", "hits": [{"docid", "text", "score"}]}``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                query = Query(str(obj["qid"]), str(obj.get("query", "")))
                hits = [
                    Passage(str(h["docid"]), str(h.get("text", "")), _opt_float(h.get("score")))
                    for h in obj["hits"]
                ]
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(path, lineno, f"malformed candidate line: {exc}") from exc
            try:
                out.append(dedup_candidates(hits, query))
            except EmptyCandidateList as exc:
                raise FormatError(path, lineno, "empty candidate list") from exc
    return out


def _opt_float(v) -> float | None:
    return None if v is None else float(v)


def write_candidates(cls: Iterable[CandidateList], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cl in cls:
            hits = []
            for p in cl.candidates:
                h = {"docid": p.id, "text": p.text}
                if p.first_stage_score is not None:
                    h["score"] = p.first_stage_score
                hits.append(h)
            fh.write(json.dumps({"qid": cl.query.qid, "query": cl.query.text, "hits": hits}) + "\n")


def read_qrels(path: str | Path) -> Qrels:
    """TREC qrels rows ``qid iter docid grade``; negative grades clamp to 0."""
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise FormatError(path, lineno, f"expected 4 columns, got {len(parts)}")
            qid, _, docid, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError as exc:
                raise FormatError(path, lineno, f"non-integer grade {grade_s!r}") from exc
            if grade < 0:
                logger.warning("%s:%d: negative grade %d clamped to 0", path, lineno, grade)
                grade = 0
            qrels.set(qid, docid, grade)
    return qrels


def write_qrels(qrels: Qrels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(qrels.grades):
            for docid, g in sorted(qrels.grades[qid].items()):
                fh.write(f"{qid} 0 {docid} {g}\n")


@dataclass(frozen=True)
class RunRecord:
    qid: str
    docid: str
    rank: int
    score: float
    tag: str

    def line(self) -> str:
        return f"{self.qid} Q0 {self.docid} {self.rank} {format_score(self.score)} {self.tag}"


def format_score(x: float) -> str:
    """Shortest decimal that round-trips to the same float."""
    return repr(float(x))


def run_records(rankings: Iterable[Ranking], tag: str) -> list[RunRecord]:
    return [
        RunRecord(rk.query.qid, it.docid, it.rank, it.score, tag)
        for rk in rankings
        for it in rk.ordered
    ]


def write_run(rankings: Iterable[Ranking], path: str | Path, tag: str = "listrank") -> None:
    if any(c.isspace() for c in tag) or not tag:
        raise ValueError("run tag must be a non-empty token")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in run_records(rankings, tag):
            fh.write(rec.line() + "\n")


def read_run_records(path: str | Path) -> list[RunRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise FormatError(path, lineno, f"expected 6 columns, got {len(parts)}")
            qid, _, docid, rank, score, tag = parts
            try:
                out.append(RunRecord(qid, docid, int(rank), float(score), tag))
            except ValueError as exc:
                raise FormatError(path, lineno, str(exc)) from exc
    return out


def read_run(path: str | Path) -> list[Ranking]:
    """Group rows per qid (first-appearance order), sorted by rank."""
    grouped: dict[str, list[RunRecord]] = {}
    for rec in read_run_records(path):
        grouped.setdefault(rec.qid, []).append(rec)
    rankings = []
    for qid, recs in grouped.items():
        recs.sort(key=lambda r: r.rank)
        rankings.append(Ranking(Query(qid), tuple(RankedItem(r.docid, r.rank, r.score) for r in recs)))
    return rankings
