import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cl, random_instance
from listrank.sliding import SlidingConfig, predict_sliding_calls, sliding_pass, sliding_rerank, window_starts
from listrank.unit import CallLedger, CountingStub


@pytest.mark.parametrize("s,calls", [(1, 96), (2, 49), (3, 33), (4, 25)])
def test_calls_per_pass(s, calls):
    assert len(window_starts(100, 5, s)) == calls == 1 + math.ceil(95 / s)
    ledger = CallLedger()
    sliding_pass(list(range(100)), make_cl(100), SlidingConfig(5, s), CountingStub(), ledger)
    assert ledger.total == calls


def test_windows_run_tail_to_head():
    assert window_starts(12, 5, 3) == [7, 4, 1, 0]
    assert window_starts(5, 5, 1) == [0]


def test_single_window_reverses_unit_order():
    ledger = CallLedger()
    rk = sliding_rerank(make_cl(5), 5, SlidingConfig(5, 1), CountingStub(), ledger)
    assert ledger.total == 1
    assert rk.docids == ["d5", "d4", "d3", "d2", "d1"]


@pytest.mark.parametrize(
    "s,naive,corrected", [(1, 288, 280), (2, 196, 191), (3, 165, 162), (4, 250, 248)]
)
def test_topk_totals(s, naive, corrected):
    for flag, expected in [(False, naive), (True, corrected)]:
        assert predict_sliding_calls(100, 5, s, 10, corrected=flag) == expected
        ledger = CallLedger()
        sliding_rerank(make_cl(100), 10, SlidingConfig(5, s, corrected_savings=flag), CountingStub(), ledger)
        assert ledger.total == expected


def test_wide_window():
    assert predict_sliding_calls(100, 20, 10, 10) == 9


def test_explicit_iterations():
    assert SlidingConfig(5, 3).passes_for(10) == 5
    assert SlidingConfig(5, 3, iterations=4).passes_for(10) == 4
    assert predict_sliding_calls(100, 5, 3, 10, iterations=4) == 132


def test_config_validation():
    with pytest.raises(ValueError):
        SlidingConfig(5, 5)
    with pytest.raises(ValueError):
        SlidingConfig(5, 1, iterations=0)


@settings(max_examples=100)
@given(st.integers(1, 150), st.integers(0, 2**32 - 1))
def test_single_pass_puts_max_first(n, seed):
    cl, oracle, truth = random_instance(random.Random(seed), n)
    rk = sliding_rerank(cl, 1, SlidingConfig(5, 4, iterations=1), oracle)
    assert rk.docids[0] == truth[0]


windows = st.sampled_from([(3, 1), (3, 2), (5, 1), (5, 2), (5, 3), (5, 4), (10, 3), (10, 7)])


@settings(max_examples=150)
@given(st.integers(1, 150), windows, st.booleans(), st.integers(0, 2**32 - 1), st.data())
def test_multi_pass_topk(n, ws, corrected, seed, data):
    w, s = ws
    k = data.draw(st.integers(1, n))
    cl, oracle, truth = random_instance(random.Random(seed), n)
    ledger = CallLedger()
    rk = sliding_rerank(cl, k, SlidingConfig(w, s, corrected_savings=corrected), oracle, ledger)
    assert rk.docids[:k] == truth[:k]
    assert sorted(rk.docids) == sorted(cl.ids)
    assert ledger.total == predict_sliding_calls(n, w, s, k, corrected)


def test_insufficient_passes_may_miss():
    """With w - s = 1 and one pass, only the top-1 is guaranteed."""
    misses = 0
    for seed in range(20):
        cl, oracle, truth = random_instance(random.Random(seed), 100)
        rk = sliding_rerank(cl, 10, SlidingConfig(5, 4, iterations=1), oracle)
        assert rk.docids[0] == truth[0]
        misses += rk.docids[:10] != truth[:10]
    assert misses > 0
