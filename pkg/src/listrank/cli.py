"""Command-line entry point: ``listrank <subcommand> ...``.

Every subcommand prints a JSON block with the echoed configuration and the
unit-call ledger, and nothing that varies between identical runs. Exit codes:
0 on success, 2 for usage errors, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from listrank import harness
from listrank.core import CandidateList, Qrels
from listrank.io import read_candidates, read_qrels, read_run, write_run
from listrank.metrics import evaluate
from listrank.server import UnitServer
from listrank.sliding import SlidingConfig
from listrank.tournament import ReplacementPolicy, TournamentConfig
from listrank.unit import CallLedger, CountingStub, RemoteUnit, SyntheticOracle, SyntheticOracleConfig, UnitError

ENDPOINT_ENV = "LISTRANK_ENDPOINT"


class UsageError(Exception):
    pass


# -- argument parsing ------------------------------------------------------------


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_unit_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ranking unit")
    g.add_argument("--oracle", choices=["synthetic", "remote", "counting"], default="synthetic")
    g.add_argument("--endpoint", help=f"remote unit URL (falls back to ${ENDPOINT_ENV})")
    g.add_argument("--seed", type=int, default=0, help="single source of all randomness")
    g.add_argument("--noise-sigma", type=float, default=0.0, help="synthetic oracle noise, in rank units")
    g.add_argument(
        "--bias-bonus",
        type=_float_list,
        default=None,
        help="synthetic per-slot bonus: one number (slot 1 only) or m comma-separated numbers",
    )
    g.add_argument("--max-chars", type=int, default=None, help="truncate passage text sent to a remote unit")
    g.add_argument("--timeout", type=float, default=30.0)
    g.add_argument("--retries", type=int, default=3)


def _add_algo_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("algorithm")
    g.add_argument("--algo", choices=["tournament", "sliding"], default="tournament")
    g.add_argument("--m", type=int, default=None, help="unit window size (default 5)")
    g.add_argument("--r", type=int, default=None, help="winners per tournament node (default 1)")
    g.add_argument("--k", type=int, default=10)
    g.add_argument("--stride", type=int, default=None, help="sliding stride (default 1)")
    g.add_argument("--iterations", type=int, default=None, help="sliding passes (default ceil(k/(m-stride)))")
    g.add_argument("--corrected", action="store_true", help="sliding: stop the last pass early")
    g.add_argument("--leftover", choices=["pad", "carry"], default=None)
    g.add_argument("--no-cache", action="store_true", help="tournament: rebuild the tree every round")
    g.add_argument("--batch", action="store_true", help="tournament: emit r passages per round")
    g.add_argument("--replace-offset", type=int, default=None, help="tournament replacement offset (default 21)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="listrank", description="Listwise top-k reranking.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rerank", help="rerank candidate lists and write a run file")
    p.add_argument("--in", dest="inp", required=True, help="candidates JSONL")
    p.add_argument("--out", required=True, help="run file to write")
    p.add_argument("--qrels", help="judgments; drive the synthetic oracle and add NDCG@10 to the report")
    p.add_argument("--tag", default="listrank")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--parallel", type=int, default=1, help="worker threads across queries")
    _add_algo_args(p)
    _add_unit_args(p)

    p = sub.add_parser("evaluate", help="score a run file")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metric", choices=["ndcg", "mrr"], default="ndcg")
    p.add_argument("--cutoff", type=int, default=10)
    p.add_argument("--per-query", action="store_true")
    p.add_argument("--ndigits", type=int, default=None, help="round reported values")

    p = sub.add_parser("bias", help="positional-bias study")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--one-positive-per-query", action="store_true")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--parallel", type=int, default=1)
    _add_unit_args(p)

    p = sub.add_parser("shuffle", help="initial-order shuffle robustness")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--seeds", type=_int_list, default=(0, 1, 2), help="shuffle seeds, e.g. 0,1,2")
    p.add_argument("--cutoff", type=int, default=10)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--parallel", type=int, default=1)
    _add_algo_args(p)
    _add_unit_args(p)

    p = sub.add_parser("calls", help="predicted and measured unit-call counts")
    p.add_argument("--algo", choices=["tournament", "sliding"], default=None)
    p.add_argument("--reference", action="store_true", help="print the reference table")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", "--w", dest="m", type=int, default=None, help="window size")
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--s", "--stride", dest="stride", type=int, default=None)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--leftover", choices=["pad", "carry"], default=None)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--batch", action="store_true")
    p.add_argument("--report", help="write the JSON report here")

    p = sub.add_parser("serve", help="serve a local unit over HTTP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--qrels", help="grades used as synthetic base scores")
    p.add_argument("--oracle", choices=["synthetic", "counting"], default="synthetic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--bias-bonus", type=_float_list, default=None)
    return parser


# -- config assembly ----------------------------------------------------------------


def algo_config(args: argparse.Namespace) -> TournamentConfig | SlidingConfig:
    m = args.m if args.m is not None else 5
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    if args.algo == "tournament":
        if args.stride is not None or args.iterations is not None or args.corrected:
            raise UsageError("--stride/--iterations/--corrected apply to --algo sliding only")
        r = args.r if args.r is not None else 1
        if m < 2 or not 1 <= r < m:
            raise UsageError("tournament needs m >= 2 and 1 <= r < m")
        offset = args.replace_offset if args.replace_offset is not None else 21
        if offset < 1:
            raise UsageError("--replace-offset must be >= 1")
        return TournamentConfig(
            m=m,
            r=r,
            leftover=args.leftover or "pad",
            caching=not args.no_cache,
            batch=args.batch,
            policy=ReplacementPolicy(offset),
            workers=1,
        )
    if args.r is not None or args.leftover or args.no_cache or args.batch or args.replace_offset is not None:
        raise UsageError("--r/--leftover/--no-cache/--batch/--replace-offset apply to --algo tournament only")
    stride = args.stride if args.stride is not None else 1
    if not 1 <= stride < m:
        raise UsageError("sliding needs 1 <= stride < m")
    if args.iterations is not None and args.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    return SlidingConfig(window=m, stride=stride, iterations=args.iterations, corrected_savings=args.corrected)


def oracle_scores(cls: Sequence[CandidateList], qrels: Qrels | None) -> dict[str, float]:
    """Base scores for the synthetic oracle, a strict total order per query.

    Passages are ranked by (grade, first-stage score, earlier initial rank);
    the score is the position in that order, so noise is in rank units.
    Passage ids are assumed unique across queries sharing a run.
    """
    scores: dict[str, float] = {}
    for cl in cls:
        qid = cl.query.qid

        def key(item):
            i, p = item
            grade = qrels.grade(qid, p.id) if qrels is not None else 0
            fs = p.first_stage_score if p.first_stage_score is not None else 0.0
            return (grade, fs, -i)

        for pos, (_, p) in enumerate(sorted(enumerate(cl.candidates), key=key)):
            scores[p.id] = float(pos)
    return scores


def bias_bonus(values: tuple[float, ...] | None, m: int) -> tuple[float, ...] | None:
    if values is None:
        return None
    if len(values) == 1:
        return (values[0],) + (0.0,) * (m - 1)
    if len(values) != m:
        raise UsageError(f"--bias-bonus needs 1 or {m} values, got {len(values)}")
    return values


def make_unit(args: argparse.Namespace, m: int, base_scores: dict[str, float]):
    if args.oracle == "remote":
        endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise UsageError(f"--oracle remote needs --endpoint or ${ENDPOINT_ENV}")
        if args.noise_sigma or args.bias_bonus is not None:
            raise UsageError("--noise-sigma/--bias-bonus apply to the synthetic oracle only")
        return RemoteUnit(endpoint, timeout=args.timeout, retries=args.retries, max_chars=args.max_chars), {
            "kind": "remote",
            "endpoint": endpoint,
            "max_chars": args.max_chars,
        }
    if args.endpoint:
        raise UsageError("--endpoint requires --oracle remote")
    if args.noise_sigma < 0:
        raise UsageError("--noise-sigma must be >= 0")
    if args.oracle == "counting":
        return CountingStub(), {"kind": "counting"}
    bonus = bias_bonus(args.bias_bonus, m)
    cfg = SyntheticOracleConfig(base_scores, args.noise_sigma, bonus, args.seed)
    return SyntheticOracle(cfg), {
        "kind": "synthetic",
        "seed": args.seed,
        "noise_sigma": args.noise_sigma,
        "position_bonus": list(bonus) if bonus else None,
    }


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommands ----------------------------------------------------------------------


def cmd_rerank(args: argparse.Namespace) -> int:
    config = algo_config(args)
    if args.parallel < 1:
        raise UsageError("--parallel must be >= 1")
    cls = read_candidates(args.inp)
    qrels = read_qrels(args.qrels) if args.qrels else None
    m = config.m if isinstance(config, TournamentConfig) else config.window
    unit, unit_echo = make_unit(args, m, oracle_scores(cls, qrels))
    ledger = CallLedger()
    rankings = harness.rerank_all(cls, args.k, config, unit, ledger, args.parallel)
    write_run(rankings, args.out, args.tag)
    result = {"queries": len(rankings), "ledger": ledger.summary(), "run": args.out}
    if qrels is not None:
        result["ndcg@10"] = evaluate(rankings, qrels, "ndcg", 10).mean
    header = {
        "command": "rerank",
        "algorithm": args.algo,
        "algo_config": config,
        "k": args.k,
        "unit": unit_echo,
        "input": args.inp,
        "qrels": args.qrels,
        "tag": args.tag,
        "parallel": args.parallel,
    }
    _emit(harness.render_json(header, result), args.report)
    if args.report:
        print(f"calls: {ledger.total}  fallbacks: {ledger.fallbacks}  queries: {len(rankings)}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.cutoff < 1:
        raise UsageError("--cutoff must be >= 1")
    report = evaluate(read_run(args.run), read_qrels(args.qrels), args.metric, args.cutoff)
    body = report.to_dict(args.ndigits)
    if not args.per_query:
        body.pop("per_query")
    header = {"command": "evaluate", "run": args.run, "qrels": args.qrels, "metric": args.metric, "cutoff": args.cutoff}
    sys.stdout.write(harness.render_json(header, body))
    mean = body["mean"]
    print(f"{args.metric}@{args.cutoff} {mean:.5f}")
    return 0


def cmd_bias(args: argparse.Namespace) -> int:
    if args.m < 2:
        raise UsageError("--m must be >= 2")
    cls = read_candidates(args.inp)
    qrels = read_qrels(args.qrels)
    unit, unit_echo = make_unit(args, args.m, oracle_scores(cls, qrels))
    sampling = harness.build_bias_groups(cls, qrels, args.m, args.seed, args.one_positive_per_query)
    if not sampling.groups:
        raise RuntimeError(f"no usable groups ({sampling.pairs} pairs, all discarded)")
    ledger = CallLedger()
    report = harness.run_positional_bias(sampling.groups, unit, ledger, args.parallel)
    header = {
        "command": "bias",
        "m": args.m,
        "seed": args.seed,
        "prng": harness.PRNG_NAME,
        "one_positive_per_query": args.one_positive_per_query,
        "unit": unit_echo,
        "input": args.inp,
        "qrels": args.qrels,
    }
    body = {
        **report.to_dict(),
        "pairs": sampling.pairs,
        "discarded_absent": sampling.discarded_absent,
        "discarded_short": sampling.discarded_short,
        "ledger": ledger.summary(),
    }
    _emit(harness.render_json(header, body), args.report)
    print(harness.bias_table(report), end="")
    return 0


def cmd_shuffle(args: argparse.Namespace) -> int:
    config = algo_config(args)
    if not args.seeds:
        raise UsageError("--seeds must list at least one seed")
    cls = read_candidates(args.inp)
    qrels = read_qrels(args.qrels)
    m = config.m if isinstance(config, TournamentConfig) else config.window
    unit, unit_echo = make_unit(args, m, oracle_scores(cls, qrels))
    ledger = CallLedger()
    cfg = harness.ShuffleConfig(args.seeds, args.algo, config)
    report = harness.run_shuffle_robustness(cls, qrels, cfg, args.k, unit, ledger, args.cutoff, args.parallel)
    header = {
        "command": "shuffle",
        "algorithm": args.algo,
        "algo_config": config,
        "k": args.k,
        "seeds": list(args.seeds),
        "prng": harness.PRNG_NAME,
        "unit": unit_echo,
        "input": args.inp,
        "qrels": args.qrels,
    }
    _emit(harness.render_json(header, {**report.to_dict(), "ledger": ledger.summary()}), args.report)
    print(harness.shuffle_table(report), end="")
    return 0


def _calls_cases(args: argparse.Namespace) -> list[harness.EfficiencyCase]:
    if args.reference:
        return [c for c, _ in harness.REFERENCE_CASES]
    if args.algo is None:
        raise UsageError("calls needs --algo or --reference")
    if not 1 <= args.k <= args.n:
        raise UsageError("calls needs 1 <= k <= n")
    m = args.m if args.m is not None else 5
    if args.algo == "tournament":
        if args.stride is not None or args.iterations is not None:
            raise UsageError("--s/--iterations apply to --algo sliding only")
        r = args.r if args.r is not None else 1
        if m < 2 or not 1 <= r < m:
            raise UsageError("tournament needs m >= 2 and 1 <= r < m")
        return [
            harness.EfficiencyCase(
                "tournament", args.n, m, args.k, r=r, leftover=args.leftover or "pad",
                caching=not args.no_cache, batch=args.batch,
            )
        ]
    if args.r is not None or args.leftover or args.no_cache or args.batch:
        raise UsageError("--r/--leftover/--no-cache/--batch apply to --algo tournament only")
    s = args.stride if args.stride is not None else 1
    if not 1 <= s < m:
        raise UsageError("sliding needs 1 <= s < w")
    if args.iterations is not None and args.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    return [
        harness.EfficiencyCase("sliding", args.n, m, args.k, stride=s, iterations=args.iterations, corrected=c)
        for c in (False, True)
    ]


def cmd_calls(args: argparse.Namespace) -> int:
    cases = _calls_cases(args)
    rows = harness.efficiency_report(cases)
    header = {"command": "calls", "unit": {"kind": "counting"}, "cases": cases}
    body = {
        "rows": [
            {"label": r.case.label(), "predicted": r.predicted, "measured": r.measured, "match": r.match}
            for r in rows
        ]
    }
    _emit(harness.render_json(header, body), args.report)
    if args.algo == "sliding" and not args.reference:
        naive, corrected = rows
        print(f"naive {naive.measured}  corrected {corrected.measured}")
    print(harness.efficiency_table(rows), end="")
    return 0 if all(r.match is not False for r in rows) else 1


def cmd_serve(args: argparse.Namespace) -> int:
    if args.oracle == "counting":
        backend = CountingStub()
    else:
        qrels = read_qrels(args.qrels) if args.qrels else Qrels()
        base = {d: float(g) for row in qrels.grades.values() for d, g in row.items()}
        backend = SyntheticOracle(
            SyntheticOracleConfig(base, args.noise_sigma, args.bias_bonus, args.seed)
        )
    server = UnitServer(backend, args.host, args.port)
    print(f"serving {args.oracle} unit at {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


COMMANDS = {
    "rerank": cmd_rerank,
    "evaluate": cmd_evaluate,
    "bias": cmd_bias,
    "shuffle": cmd_shuffle,
    "calls": cmd_calls,
    "serve": cmd_serve,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"listrank: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, UnitError) as exc:
        print(f"listrank: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
