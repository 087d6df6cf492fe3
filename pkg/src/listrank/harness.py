"""Experiment drivers: reranking over many queries, positional bias, shuffle
robustness and call-count accounting.

Every driver is a pure function of its inputs, seeds and config. Random draws
come from numpy's PCG64 generator seeded per query with
``SeedSequence([seed, qid_key(qid)])``; the scheme is named in each report
header so another implementation can reproduce the same samples.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, is_dataclass
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from listrank.core import CandidateList, Passage, Qrels, Query, Ranking
from listrank.metrics import BiasReport, Trial, bias_report, evaluate
from listrank.sliding import SlidingConfig, predict_sliding_calls, sliding_rerank
from listrank.tournament import TournamentConfig, predict_tournament_calls, rerank_topk
from listrank.unit import CallLedger, CountingStub, UnitBackend, UnitRequest, rank_unit

logger = logging.getLogger(__name__)

Algorithm = Literal["tournament", "sliding"]
AlgoConfig = TournamentConfig | SlidingConfig

PRNG_NAME = "numpy.random.PCG64 via SeedSequence([seed, blake2b64(qid)])"


def qid_key(qid: str) -> int:
    return int.from_bytes(hashlib.blake2b(qid.encode(), digest_size=8).digest(), "little")


def query_rng(seed: int, qid: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, qid_key(qid)])))


# -- reranking over a query set ------------------------------------------------


def default_config(algorithm: Algorithm) -> AlgoConfig:
    if algorithm == "tournament":
        return TournamentConfig()
    if algorithm == "sliding":
        return SlidingConfig()
    raise ValueError(f"unknown algorithm {algorithm!r}")


def rerank_one(
    cl: CandidateList,
    k: int,
    config: AlgoConfig,
    unit: UnitBackend,
    ledger: CallLedger | None = None,
) -> Ranking:
    k = min(k, cl.n)
    if isinstance(config, TournamentConfig):
        return rerank_topk(cl, k, unit, config, ledger)
    if isinstance(config, SlidingConfig):
        return sliding_rerank(cl, k, config, unit, ledger)
    raise TypeError(f"unsupported config {type(config).__name__}")


def rerank_all(
    cls: Sequence[CandidateList],
    k: int,
    config: AlgoConfig,
    unit: UnitBackend,
    ledger: CallLedger | None = None,
    parallel: int = 1,
) -> list[Ranking]:
    """Rerank every query; output order follows the input order."""
    ledger = ledger if ledger is not None else CallLedger()

    def job(cl: CandidateList) -> tuple[Ranking, CallLedger]:
        own = CallLedger()
        return rerank_one(cl, k, config, unit, own), own

    if parallel > 1:
        with ThreadPoolExecutor(parallel) as pool:
            results = list(pool.map(job, cls))
    else:
        results = [job(cl) for cl in cls]
    for _, own in results:
        ledger.merge(own)
    return [rk for rk, _ in results]


# -- positional bias -----------------------------------------------------------


@dataclass(frozen=True)
class BiasGroup:
    """One positive and ``m - 1`` negatives; variant ``j`` puts the positive at slot ``j``."""

    group_id: str
    query: Query
    positive: Passage
    negatives: tuple[Passage, ...]

    def __post_init__(self) -> None:
        if self.positive.id in {p.id for p in self.negatives}:
            raise ValueError("positive listed among negatives")

    @property
    def m(self) -> int:
        return len(self.negatives) + 1

    def variant(self, j: int) -> UnitRequest:
        if not 1 <= j <= self.m:
            raise ValueError(f"slot {j} out of range 1..{self.m}")
        negs = list(self.negatives)
        return UnitRequest(self.query, tuple(negs[: j - 1] + [self.positive] + negs[j - 1 :]))

    @property
    def variants(self) -> list[UnitRequest]:
        return [self.variant(j) for j in range(1, self.m + 1)]


@dataclass
class BiasSampling:
    groups: list[BiasGroup]
    pairs: int
    discarded_absent: int = 0
    discarded_short: int = 0

    @property
    def discarded(self) -> int:
        return self.discarded_absent + self.discarded_short


def build_bias_groups(
    cls: CandidateList | Iterable[CandidateList],
    qrels: Qrels,
    m: int = 5,
    seed: int = 0,
    one_positive_per_query: bool = False,
) -> BiasSampling:
    """Sample ``m - 1`` grade-0 negatives from the candidates for each judged positive.

    A pair is discarded if its positive is not among the candidates or the
    query has fewer than ``m - 1`` negatives. With ``one_positive_per_query``
    a single judged positive is drawn per query first.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if isinstance(cls, CandidateList):
        cls = [cls]
    out = BiasSampling([], 0)
    for cl in sorted(cls, key=lambda c: c.query.qid):
        qid = cl.query.qid
        rng = query_rng(seed, qid)
        judged = qrels.for_query(qid)
        positives = sorted(d for d, g in judged.items() if g >= 1)
        if not positives:
            continue
        if one_positive_per_query:
            positives = [positives[int(rng.integers(len(positives)))]]
        by_id = {p.id: p for p in cl.candidates}
        negatives = [p for p in cl.candidates if judged.get(p.id, 0) == 0]
        for pos_id in positives:
            out.pairs += 1
            if pos_id not in by_id:
                out.discarded_absent += 1
                continue
            if len(negatives) < m - 1:
                out.discarded_short += 1
                continue
            picks = rng.choice(len(negatives), size=m - 1, replace=False)
            out.groups.append(
                BiasGroup(f"{qid}:{pos_id}", cl.query, by_id[pos_id], tuple(negatives[i] for i in picks))
            )
    return out


def run_positional_bias(
    groups: Sequence[BiasGroup],
    unit: UnitBackend,
    ledger: CallLedger | None = None,
    parallel: int = 1,
) -> BiasReport:
    if not groups:
        raise ValueError("no bias groups")

    def job(g: BiasGroup) -> list[Trial]:
        trials = []
        for j, req in enumerate(g.variants, start=1):
            top = rank_unit(req, unit, ledger).ranked()[0]
            trials.append(Trial(j, req.passages[top - 1].id, g.positive.id, g.group_id))
        return trials

    if parallel > 1:
        with ThreadPoolExecutor(parallel) as pool:
            per_group = list(pool.map(job, groups))
    else:
        per_group = [job(g) for g in groups]
    return bias_report([t for ts in per_group for t in ts], m=groups[0].m)


# -- shuffle robustness ----------------------------------------------------------


@dataclass(frozen=True)
class ShuffleConfig:
    seeds: tuple[int, ...] = (0, 1, 2)
    algorithm: Algorithm = "tournament"
    algo_config: AlgoConfig | None = None

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.algo_config is None:
            object.__setattr__(self, "algo_config", default_config(self.algorithm))


def shuffle_candidates(cl: CandidateList, seed: int) -> CandidateList:
    perm = query_rng(seed, cl.query.qid).permutation(cl.n)
    return cl.with_order([cl.candidates[i] for i in perm])


@dataclass
class ShuffleReport:
    baseline_ndcg: float
    per_seed: dict[int, float]
    cutoff: int = 10

    @property
    def shuffled_ndcg(self) -> float:
        return math.fsum(self.per_seed.values()) / len(self.per_seed)

    @property
    def drop(self) -> float:
        return self.baseline_ndcg - self.shuffled_ndcg

    def to_dict(self) -> dict:
        return {
            "baseline_ndcg": self.baseline_ndcg,
            "shuffled_ndcg": self.shuffled_ndcg,
            "drop": self.drop,
            "per_seed": {str(s): v for s, v in sorted(self.per_seed.items())},
            "cutoff": self.cutoff,
        }


def run_shuffle_robustness(
    cls: Sequence[CandidateList],
    qrels: Qrels,
    cfg: ShuffleConfig,
    k: int,
    unit: UnitBackend,
    ledger: CallLedger | None = None,
    cutoff: int = 10,
    parallel: int = 1,
) -> ShuffleReport:
    """NDCG of the original ordering against the mean over shuffled orderings."""
    baseline = evaluate(rerank_all(cls, k, cfg.algo_config, unit, ledger, parallel), qrels, "ndcg", cutoff).mean
    per_seed = {}
    for seed in cfg.seeds:
        shuffled = [shuffle_candidates(cl, seed) for cl in cls]
        rks = rerank_all(shuffled, k, cfg.algo_config, unit, ledger, parallel)
        per_seed[seed] = evaluate(rks, qrels, "ndcg", cutoff).mean
    return ShuffleReport(baseline, per_seed, cutoff)


# -- call accounting --------------------------------------------------------------


@dataclass(frozen=True)
class EfficiencyCase:
    """One row of the call-count table. ``width`` is m for tournaments, w for sliding."""

    algorithm: Algorithm
    n: int
    width: int
    k: int
    r: int = 1
    stride: int = 1
    leftover: Literal["pad", "carry"] = "pad"
    caching: bool = True
    batch: bool = False
    iterations: int | None = None
    corrected: bool = False

    def config(self) -> AlgoConfig:
        if self.algorithm == "tournament":
            return TournamentConfig(
                m=self.width, r=self.r, leftover=self.leftover, caching=self.caching, batch=self.batch
            )
        return SlidingConfig(
            window=self.width, stride=self.stride, iterations=self.iterations, corrected_savings=self.corrected
        )

    def label(self) -> str:
        if self.algorithm == "tournament":
            flags = [self.leftover] + (["batch"] if self.batch else []) + ([] if self.caching else ["nocache"])
            return f"tournament m={self.width} r={self.r} ({','.join(flags)})"
        mode = "corrected" if self.corrected else "naive"
        it = f" iter={self.iterations}" if self.iterations else ""
        return f"sliding w={self.width} s={self.stride}{it} ({mode})"


@dataclass(frozen=True)
class EfficiencyRow:
    case: EfficiencyCase
    predicted: int | None
    measured: int

    @property
    def match(self) -> bool | None:
        return None if self.predicted is None else self.predicted == self.measured


def predict_calls(case: EfficiencyCase) -> int | None:
    """Closed-form count, or None where the cost depends on extraction order."""
    try:
        if case.algorithm == "tournament":
            return predict_tournament_calls(
                case.n, case.width, case.r, case.k, case.leftover, case.caching, case.batch
            )
        return predict_sliding_calls(case.n, case.width, case.stride, case.k, case.corrected, case.iterations)
    except ValueError:
        return None


def synthetic_candidates(n: int, qid: str = "q") -> CandidateList:
    return CandidateList(Query(qid), tuple(Passage(f"d{i}") for i in range(n)))


def measure_calls(case: EfficiencyCase, unit: UnitBackend | None = None) -> int:
    ledger = CallLedger()
    rerank_one(synthetic_candidates(case.n), case.k, case.config(), unit or CountingStub(), ledger)
    return ledger.total


def efficiency_report(cases: Iterable[EfficiencyCase], unit: UnitBackend | None = None) -> list[EfficiencyRow]:
    return [EfficiencyRow(c, predict_calls(c), measure_calls(c, unit)) for c in cases]


# Rows of the reference call-count table (n=100, k=10 unless noted).
REFERENCE_CASES: tuple[tuple[EfficiencyCase, int], ...] = (
    (EfficiencyCase("tournament", 100, 5, 1), 25),
    (EfficiencyCase("tournament", 100, 5, 10), 52),
    *((EfficiencyCase("sliding", 100, 5, 5, stride=s, iterations=1), v) for s, v in zip(range(1, 5), (96, 49, 33, 25))),
    *((EfficiencyCase("sliding", 100, 5, 10, stride=s), v) for s, v in zip(range(1, 5), (288, 196, 165, 250))),
    *(
        (EfficiencyCase("sliding", 100, 5, 10, stride=s, corrected=True), v)
        for s, v in zip(range(1, 5), (280, 191, 162, 248))
    ),
    (EfficiencyCase("tournament", 100, 20, 10, r=10, leftover="carry", caching=False, batch=True), 9),
    (EfficiencyCase("tournament", 100, 20, 10, r=5, leftover="carry", caching=False, batch=True), 14),
    (EfficiencyCase("tournament", 100, 20, 10, r=1, leftover="carry", caching=False, batch=True), 60),
    (EfficiencyCase("sliding", 100, 20, 10, stride=10), 9),
)


# -- report rendering ---------------------------------------------------------------


def _plain(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def render_json(header: Mapping, body: Mapping) -> str:
    """Deterministic JSON report: config echo under ``config``, results under ``result``."""
    return json.dumps({"config": _plain(header), "result": _plain(body)}, indent=2, sort_keys=True) + "\n"


def render_table(headers: Sequence[str], rows: Sequence[Sequence], ndigits: int = 4) -> str:
    """Left-aligned text columns separated by two spaces."""

    def cell(v) -> str:
        if isinstance(v, float):
            return f"{v:.{ndigits}f}"
        if v is None:
            return "-"
        return str(v)

    grid = [list(map(str, headers))] + [[cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in grid) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in grid]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def efficiency_table(rows: Sequence[EfficiencyRow]) -> str:
    return render_table(
        ["config", "n", "k", "predicted", "measured", "match"],
        [
            (r.case.label(), r.case.n, r.case.k, r.predicted, r.measured, {True: "yes", False: "NO", None: "-"}[r.match])
            for r in rows
        ],
    )


def bias_table(report: BiasReport, ndigits: int = 1) -> str:
    m = len(report.accuracy_by_position)
    return render_table(
        [f"pos{j}" for j in range(1, m + 1)] + ["std", "agreement", "groups"],
        [[*report.accuracy_by_position, report.std, report.agreement_ratio, report.groups]],
        ndigits,
    )


def shuffle_table(report: ShuffleReport) -> str:
    rows = [("original", report.baseline_ndcg)]
    rows += [(f"seed {s}", v) for s, v in sorted(report.per_seed.items())]
    rows += [("shuffled mean", report.shuffled_ndcg), ("drop", report.drop)]
    return render_table(["ordering", f"ndcg@{report.cutoff}"], rows)
