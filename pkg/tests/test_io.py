import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from listrank.core import Query, RankedItem, Ranking
from listrank.io import FormatError, read_candidates, read_qrels, read_run, write_run


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines))
    return path


def cand_line(qid, hits):
    return json.dumps({"qid": qid, "query": "q text", "hits": hits})


def test_read_candidates(tmp_path):
    hits = [{"docid": f"d{i}", "text": f"t{i}", "score": 100.0 - i} for i in range(100)]
    (cl,) = read_candidates(write_lines(tmp_path / "c.jsonl", [cand_line("q1", hits)]))
    assert cl.n == 100 and cl.ids[0] == "d0"
    assert cl.candidates[3].first_stage_score == 97.0


def test_read_candidates_dedups(tmp_path, caplog):
    hits = [{"docid": "a"}, {"docid": "b"}, {"docid": "a"}]
    (cl,) = read_candidates(write_lines(tmp_path / "c.jsonl", [cand_line("q1", hits)]))
    assert cl.ids == ["a", "b"]
    assert "duplicate" in caplog.text


def test_read_candidates_errors(tmp_path):
    with pytest.raises(FormatError, match="empty candidate list"):
        read_candidates(write_lines(tmp_path / "e.jsonl", [cand_line("q1", [])]))
    with pytest.raises(FormatError, match=":2:"):
        read_candidates(write_lines(tmp_path / "m.jsonl", [cand_line("q1", [{"docid": "a"}]), "{not json"]))


def test_read_qrels(tmp_path, caplog):
    path = write_lines(tmp_path / "qrels", ["q1 0 d3 2", "q1 0 d4 1", "q1 0 d4 3", "q2 0 x -1"])
    qrels = read_qrels(path)
    assert qrels.grade("q1", "d3") == 2
    assert qrels.grade("q1", "d4") == 3
    assert qrels.grade("q1", "zz") == 0
    assert qrels.grade("q2", "x") == 0
    assert "clamped" in caplog.text


def test_read_qrels_bad_grade(tmp_path):
    with pytest.raises(FormatError, match=":2:"):
        read_qrels(write_lines(tmp_path / "qrels", ["q1 0 a 1", "q1 0 b high"]))


def test_write_run_lines(tmp_path):
    path = tmp_path / "run"
    write_run([Ranking.from_ids(Query("q1"), ["a", "b", "c"])], path, "tag")
    assert path.read_text().splitlines() == ["q1 Q0 a 1 3.0 tag", "q1 Q0 b 2 2.0 tag", "q1 Q0 c 3 1.0 tag"]


def test_read_run_column_mismatch(tmp_path):
    with pytest.raises(FormatError):
        read_run(write_lines(tmp_path / "run", ["q1 Q0 a 1 3.0"]))


scores = st.lists(
    st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=12, unique=True
).map(lambda xs: sorted(xs, reverse=True))


@given(st.lists(scores, min_size=1, max_size=4))
def test_run_round_trip(tmp_path_factory, per_query):
    rankings = [
        Ranking(Query(f"q{qi}"), tuple(RankedItem(f"d{qi}_{i}", i + 1, s) for i, s in enumerate(ss)))
        for qi, ss in enumerate(per_query)
        if all(a > b for a, b in zip(ss, ss[1:]))
    ]
    if not rankings:
        return
    path = tmp_path_factory.mktemp("rt") / "run"
    write_run(rankings, path, "t")
    back = read_run(path)
    assert back == rankings
    text = path.read_text()
    write_run(back, path, "t")
    assert path.read_text() == text
    assert all(math.isfinite(it.score) for r in back for it in r.ordered)
