"""Serve a synthetic ranking unit over HTTP for exercising the remote client.

    python scripts/stub_server.py --port 8765 [--qrels qrels.txt] [--noise 0.5]
    listrank rerank --oracle remote --endpoint http://127.0.0.1:8765/rank ...

``--mangle`` corrupts every n-th response so the client's fallback path can be
watched in the ledger.
"""

import argparse
import logging

from listrank.io import read_qrels
from listrank.server import UnitServer
from listrank.unit import SyntheticOracle


def main() -> None:
    ap = argparse.ArgumentParser(description="synthetic unit server")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--qrels", help="grades used as base scores")
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mangle", type=int, default=0, help="corrupt every n-th response (0: never)")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    base = {}
    if args.qrels:
        base = {d: float(g) for row in read_qrels(args.qrels).grades.values() for d, g in row.items()}
    oracle = SyntheticOracle(base_scores=base, noise_sigma=args.noise, seed=args.seed)

    counter = {"n": 0}

    def mangle(request, order):
        counter["n"] += 1
        return "1 2 3" if args.mangle and counter["n"] % args.mangle == 0 else order

    server = UnitServer(oracle, args.host, args.port, mangle=mangle)
    print(f"listening on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()


if __name__ == "__main__":
    main()
