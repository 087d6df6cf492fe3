"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import math
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest
import pytrec_eval

sys.path.insert(0, str(Path(__file__).parent))

from conftest import make_cl, random_instance  # noqa: E402
from listrank.core import CandidateList, Passage, Qrels, Query, Ranking  # noqa: E402
from listrank.harness import (  # noqa: E402
    ShuffleConfig,
    build_bias_groups,
    run_positional_bias,
    run_shuffle_robustness,
)
from listrank.metrics import mrr_at, ndcg_at  # noqa: E402
from listrank.server import UnitServer  # noqa: E402
from listrank.sliding import SlidingConfig, sliding_pass, sliding_rerank  # noqa: E402
from listrank.tournament import TournamentConfig, rerank_topk  # noqa: E402
from listrank.unit import CallLedger, CountingStub, RemoteUnit, SyntheticOracle, UnitRequest, rank_unit  # noqa: E402

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (ok, detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def ledger_total(fn, *args, **kw) -> int:
    ledger = CallLedger()
    fn(*args, ledger=ledger, **kw)
    return ledger.total


# 1 -----------------------------------------------------------------------------


def test_criterion_01_forward_pass_table():
    t0 = time.perf_counter()
    stub = CountingStub()
    cl = make_cl(100)
    got, want = {}, {}
    for k, v in [(1, 25), (10, 52)]:
        got[f"tour k={k}"] = ledger_total(rerank_topk, cl, k, stub, TournamentConfig(m=5, r=1))
        want[f"tour k={k}"] = v
    for s, v in zip(range(1, 5), (96, 49, 33, 25)):
        led = CallLedger()
        sliding_pass(list(range(100)), cl, SlidingConfig(5, s), stub, led)
        got[f"pass s={s}"], want[f"pass s={s}"] = led.total, v
    for s, naive, corr in zip(range(1, 5), (288, 196, 165, 250), (280, 191, 162, 248)):
        got[f"naive s={s}"] = ledger_total(sliding_rerank, cl, 10, SlidingConfig(5, s), stub)
        got[f"corr s={s}"] = ledger_total(sliding_rerank, cl, 10, SlidingConfig(5, s, corrected_savings=True), stub)
        want[f"naive s={s}"], want[f"corr s={s}"] = naive, corr
    elapsed = time.perf_counter() - t0
    bad = {key: (got[key], want[key]) for key in want if got[key] != want[key]}
    record(1, not bad and elapsed < 1.0, f"{len(want) - len(bad)}/{len(want)} counts exact, {elapsed:.3f}s" + (f", mismatches {bad}" if bad else ""))


# 2 -----------------------------------------------------------------------------


def test_criterion_02_wide_window_table():
    stub = CountingStub()
    cl = make_cl(100)
    got = {
        f"tour r={r}": ledger_total(
            rerank_topk, cl, 10, stub, TournamentConfig(m=20, r=r, leftover="carry", caching=False, batch=True)
        )
        for r in (10, 5, 1)
    }
    got["sliding w=20 s=10"] = ledger_total(sliding_rerank, cl, 10, SlidingConfig(20, 10), stub)
    want = {"tour r=10": 9, "tour r=5": 14, "tour r=1": 60, "sliding w=20 s=10": 9}
    record(2, got == want, f"got {got}")


# 3 -----------------------------------------------------------------------------


def test_criterion_03_oracle_equivalence():
    rng = random.Random(20240603)
    t0 = time.perf_counter()
    instances = tour_ok = slide_ok = 0
    for _ in range(300):
        n = rng.randint(1, 150)
        m = rng.choice([3, 5, 10])
        r = rng.choice([1, 2])
        k = rng.randint(1, n)
        s = rng.randint(1, m - 1)
        cl, oracle, truth = random_instance(rng, n)
        instances += 1
        tour_ok += rerank_topk(cl, k, oracle, TournamentConfig(m=m, r=r)).docids[:k] == truth[:k]
        cfg = SlidingConfig(m, s, iterations=math.ceil(k / (m - s)))
        slide_ok += sliding_rerank(cl, k, cfg, oracle).docids[:k] == truth[:k]
    elapsed = time.perf_counter() - t0
    ok = tour_ok == slide_ok == instances >= 200 and elapsed < 30
    record(3, ok, f"tournament {tour_ok}/{instances}, sliding {slide_ok}/{instances}, {elapsed:.2f}s")


# 4 -----------------------------------------------------------------------------


def test_criterion_04_caching_soundness():
    rng = random.Random(7)
    same = strict = needs_strict = 0
    for _ in range(50):
        n = rng.randint(2, 150)
        m = rng.choice([3, 5, 10])
        r = rng.choice([1, 2])
        k = rng.randint(1, n)
        cl, oracle, _ = random_instance(rng, n)
        lc, lr = CallLedger(), CallLedger()
        a = rerank_topk(cl, k, oracle, TournamentConfig(m=m, r=r, caching=True), lc)
        b = rerank_topk(cl, k, oracle, TournamentConfig(m=m, r=r, caching=False), lr)
        same += a.docids[:k] == b.docids[:k]
        if k >= 2 and n > m:
            needs_strict += 1
            strict += lc.total < lr.total
    record(4, same == 50 and strict == needs_strict, f"identical {same}/50, cached cheaper {strict}/{needs_strict}")


# 5 -----------------------------------------------------------------------------


def test_criterion_05_asymptotics():
    ratios = []
    for n in (25, 125, 625):
        calls = ledger_total(rerank_topk, make_cl(n), n, CountingStub(), TournamentConfig(m=5, r=1))
        ratios.append(calls / (n + n * math.log(n, 5)))
    bounded = all(x <= 3 for x in ratios)
    non_increasing = all(b <= a for a, b in zip(ratios, ratios[1:]))
    shown = ", ".join(f"{x:.3f}" for x in ratios)
    record(5, bounded and non_increasing, f"ratios [{shown}]; <=3: {bounded}; non-increasing: {non_increasing}")


# 6 -----------------------------------------------------------------------------


def test_criterion_06_metric_parity():
    rng = random.Random(99)
    worst = 0.0
    for i in range(100):
        qid = f"q{i}"
        pool = [f"d{j}" for j in range(rng.randint(1, 40))]
        run_ids = rng.sample(pool, rng.randint(1, len(pool)))
        grades = {d: rng.randint(0, 3) for d in rng.sample(pool, rng.randint(0, len(pool)))}
        ranking = Ranking.from_ids(Query(qid), run_ids)
        qrels = Qrels.from_mapping({qid: grades})
        ev = pytrec_eval.RelevanceEvaluator({qid: grades or {"_": 0}}, {"ndcg_cut.10", "recip_rank"})
        full = ev.evaluate({qid: {d: float(len(run_ids) - j) for j, d in enumerate(run_ids)}}).get(qid, {})
        top10 = ev.evaluate({qid: {d: float(10 - j) for j, d in enumerate(run_ids[:10])}}).get(qid, {})
        worst = max(
            worst,
            abs(ndcg_at(ranking, qrels, 10) - full.get("ndcg_cut_10", 0.0)),
            abs(mrr_at(ranking, qrels, 10) - top10.get("recip_rank", 0.0)),
        )
    hand = ndcg_at(
        Ranking.from_ids(Query("q1"), ["d1", "d2", "d3"]), Qrels.from_mapping({"q1": {"d1": 1, "d3": 1}}), 10
    )
    ok = worst <= 1e-6 and abs(hand - 0.91972) <= 1e-5
    record(6, ok, f"max |diff| {worst:.2e} over 100 pairs; hand case {hand:.6f}")


# 7 -----------------------------------------------------------------------------


def _bias_corpus():
    rng = random.Random(5)
    cls, grades, scores = [], {}, {}
    for qi in range(20):
        qid = f"q{qi}"
        ids = [f"{qid}_{i}" for i in range(30)]
        pos = rng.choice(ids)
        grades[qid] = {pos: 1}
        scores.update({d: rng.random() for d in ids})
        scores[pos] = 2.0
        cls.append(CandidateList(Query(qid), tuple(Passage(d) for d in ids)))
    return cls, Qrels.from_mapping(grades), scores


def test_criterion_07_positional_bias():
    cls, qrels, scores = _bias_corpus()
    groups = build_bias_groups(cls, qrels, m=5, seed=0).groups
    fair = run_positional_bias(groups, SyntheticOracle(base_scores=scores))
    first = run_positional_bias(groups, SyntheticOracle(position_bonus=(10.0, 0.0, 0.0, 0.0, 0.0)))
    ok = (
        fair.std == 0.0
        and fair.agreement_ratio == 100.0
        and first.accuracy_by_position == [100.0, 0.0, 0.0, 0.0, 0.0]
        and first.std == 40.0
        and first.agreement_ratio == 0.0
    )
    record(
        7,
        ok,
        f"fair std {fair.std}, agreement {fair.agreement_ratio}; always-first "
        f"{first.accuracy_by_position}, std {first.std}, agreement {first.agreement_ratio}",
    )


# 8 -----------------------------------------------------------------------------


def test_criterion_08_shuffle_robustness():
    rng = random.Random(8)
    cls, grades, scores = [], {}, {}
    for qi in range(10):
        qid = f"q{qi}"
        ids = [f"{qid}_{i}" for i in range(100)]
        rel = rng.sample(ids[:20], 4)  # an informative first stage
        grades[qid] = {d: rng.randint(1, 3) for d in rel}
        for i, d in enumerate(ids):
            scores[d] = grades[qid].get(d, 0) * 10.0 + (100 - i) / 100.0
        cls.append(CandidateList(Query(qid), tuple(Passage(d) for d in ids)))
    qrels = Qrels.from_mapping(grades)
    oracle = SyntheticOracle(base_scores=scores)
    tour = run_shuffle_robustness(cls, qrels, ShuffleConfig(seeds=(0, 1, 2)), 10, oracle)
    slide = run_shuffle_robustness(
        cls,
        qrels,
        ShuffleConfig(seeds=(0, 1, 2), algorithm="sliding", algo_config=SlidingConfig(5, 4, iterations=1)),
        10,
        oracle,
    )
    ok = tour.drop == 0.0 and slide.drop >= 0.0 and tour.drop <= slide.drop
    record(8, ok, f"tournament drop {tour.drop:.4f}, single-pass sliding drop {slide.drop:.4f}")


# 9 -----------------------------------------------------------------------------


def test_criterion_09_protocol():
    rng = random.Random(9)
    base = {f"d{i}": rng.random() for i in range(5000)}
    oracle = SyntheticOracle(base_scores=base, noise_sigma=0.1)
    ledger = CallLedger()
    agree = 0
    with UnitServer(oracle) as server:
        client = RemoteUnit(server.url)
        for _ in range(1000):
            m = rng.choice([2, 3, 5, 10, 20])
            req = UnitRequest(Query(f"q{rng.randint(0, 50)}", "query"), tuple(Passage(d, "t") for d in rng.sample(sorted(base), m)))
            agree += rank_unit(req, client, ledger).order == oracle.rank(req).order
    bad_outputs = ["1 2 3", "2 2 3 4 5", "3 1", "", "a b c d e", "0 1 2 3 4", "1 2 3 4 5 6"]
    fell_back = 0
    req5 = UnitRequest(Query("q"), tuple(Passage(f"d{i}") for i in range(5)))
    for bad in bad_outputs:
        with UnitServer(oracle, mangle=lambda request, order, bad=bad: bad) as server:
            res = RemoteUnit(server.url).rank(req5)
        fell_back += res.fallback and res.order == (1, 2, 3, 4, 5)
    ok = ledger.total == 1000 and ledger.fallbacks == 0 and agree == 1000 and fell_back == len(bad_outputs)
    record(
        9,
        ok,
        f"{ledger.total} round trips, {ledger.fallbacks} fallbacks, {agree} match local; "
        f"malformed fallback {fell_back}/{len(bad_outputs)}",
    )


# 10 ----------------------------------------------------------------------------


def _write_inputs(d: Path) -> None:
    rng = random.Random(10)
    with open(d / "cands.jsonl", "w") as fh, open(d / "qrels.txt", "w") as qf:
        for qi in range(4):
            hits = [{"docid": f"q{qi}d{i}", "text": f"p {i}", "score": 50.0 - i * 0.5} for i in range(60)]
            fh.write(json.dumps({"qid": f"q{qi}", "query": "x", "hits": hits}) + "\n")
            for i in rng.sample(range(60), 6):
                qf.write(f"q{qi} 0 q{qi}d{i} {rng.randint(1, 2)}\n")


INVOCATIONS = [
    ["rerank", "--in", "cands.jsonl", "--qrels", "qrels.txt", "--out", "run.txt", "--noise-sigma", "4", "--seed", "3", "--parallel", "3"],
    ["rerank", "--algo", "sliding", "--stride", "2", "--in", "cands.jsonl", "--qrels", "qrels.txt", "--out", "run_s.txt", "--noise-sigma", "4"],
    ["evaluate", "--run", "run.txt", "--qrels", "qrels.txt", "--per-query"],
    ["bias", "--in", "cands.jsonl", "--qrels", "qrels.txt", "--noise-sigma", "2", "--seed", "4", "--report", "bias.json"],
    ["shuffle", "--in", "cands.jsonl", "--qrels", "qrels.txt", "--noise-sigma", "2", "--report", "shuffle.json"],
    ["calls", "--algo", "tournament", "--n", "100", "--m", "5", "--r", "2", "--k", "10"],
]


def _run_all(d: Path) -> dict[str, bytes]:
    _write_inputs(d)
    out = {}
    for i, argv in enumerate(INVOCATIONS):
        proc = subprocess.run([sys.executable, "-m", "listrank", *argv], cwd=d, capture_output=True, check=True)
        out[f"stdout{i}"] = proc.stdout
    for f in sorted(d.iterdir()):
        out[f.name] = f.read_bytes()
    return out


def test_criterion_10_determinism(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a, b = _run_all(tmp_path / "a"), _run_all(tmp_path / "b")
    diff = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    record(10, not diff, f"{len(INVOCATIONS)} invocations x2, {len(a)} artifacts compared, differing: {diff or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
