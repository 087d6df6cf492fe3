from __future__ import annotations

import random
import sys

import pytest
from hypothesis import HealthCheck, settings

from listrank.core import CandidateList, Passage, Query
from listrank.unit import SyntheticOracle

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_cl(n: int, qid: str = "q1", prefix: str = "d", start: int = 1) -> CandidateList:
    """Candidates d1..dn in that order."""
    return CandidateList(Query(qid, "query text"), tuple(Passage(f"{prefix}{i}", f"text {i}") for i in range(start, start + n)))


def random_instance(rng: random.Random, n: int, qid: str = "q"):
    """Shuffled candidates with distinct random scores and a consistent oracle."""
    ids = [f"p{i}" for i in range(n)]
    scores = dict(zip(ids, rng.sample(range(10 * n + 10), n)))
    rng.shuffle(ids)
    cl = CandidateList(Query(qid), tuple(Passage(i) for i in ids))
    truth = sorted(scores, key=scores.get, reverse=True)
    return cl, SyntheticOracle(base_scores={k: float(v) for k, v in scores.items()}), truth


@pytest.fixture
def cl100() -> CandidateList:
    return make_cl(100)


@pytest.fixture
def rank_oracle():
    """Consistent oracle where d1 is best: score 101 - rank."""
    return SyntheticOracle(base_scores={f"d{i}": float(101 - i) for i in range(1, 101)})


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, (ok, detail) in sorted(results.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
