"""Listwise top-k reranking: m-ary tournament sort with output caching,
a sliding-window baseline, metrics and experiment harnesses."""

from listrank.core import CandidateList, Passage, Qrels, Query, RankedItem, Ranking, dedup_candidates
from listrank.metrics import BiasReport, MetricReport, bias_report, evaluate, mrr_at, ndcg_at
from listrank.sliding import SlidingConfig, predict_sliding_calls, sliding_rerank
from listrank.tournament import (
    ReplacementPolicy,
    TournamentConfig,
    TournamentTree,
    build_tree,
    predict_tournament_calls,
    rerank_topk,
)
from listrank.unit import (
    CallLedger,
    CountingStub,
    RemoteUnit,
    SyntheticOracle,
    SyntheticOracleConfig,
    UnitError,
    UnitRequest,
    UnitResult,
)

__all__ = [
    "BiasReport",
    "CallLedger",
    "CandidateList",
    "CountingStub",
    "MetricReport",
    "Passage",
    "Qrels",
    "Query",
    "RankedItem",
    "Ranking",
    "RemoteUnit",
    "ReplacementPolicy",
    "SlidingConfig",
    "SyntheticOracle",
    "SyntheticOracleConfig",
    "TournamentConfig",
    "TournamentTree",
    "UnitError",
    "UnitRequest",
    "UnitResult",
    "bias_report",
    "build_tree",
    "dedup_candidates",
    "evaluate",
    "mrr_at",
    "ndcg_at",
    "predict_sliding_calls",
    "predict_tournament_calls",
    "rerank_topk",
    "sliding_rerank",
]
