"""Print predicted vs measured unit calls for the reference configurations.

    python scripts/efficiency_table.py [--json out.json]
"""

import argparse
import sys

from listrank.harness import REFERENCE_CASES, efficiency_report, efficiency_table, render_json


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--json", help="also write the report as JSON")
    args = ap.parse_args()
    rows = efficiency_report([case for case, _ in REFERENCE_CASES])
    expected = [v for _, v in REFERENCE_CASES]
    print(efficiency_table(rows), end="")
    mismatched = [r.case.label() for r, v in zip(rows, expected) if r.measured != v]
    print(f"\nreference values reproduced: {len(rows) - len(mismatched)}/{len(rows)}")
    if args.json:
        body = {
            "rows": [
                {"label": r.case.label(), "predicted": r.predicted, "measured": r.measured, "reference": v}
                for r, v in zip(rows, expected)
            ]
        }
        with open(args.json, "w") as fh:
            fh.write(render_json({"unit": "counting stub", "cases": [c for c, _ in REFERENCE_CASES]}, body))
    return 1 if mismatched else 0


if __name__ == "__main__":
    sys.exit(main())
