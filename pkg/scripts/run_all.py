"""Run every experiment config in configs/ and print one verdict line each.

    python scripts/run_all.py [--out out] [--only escape,poisson]
"""

import argparse
import json
import sys
import time
from pathlib import Path

from shadowlab.harness import load_config, run_experiment, write_outputs

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--configs", default=str(ROOT / "configs"))
    parser.add_argument("--out", default=str(ROOT / "out"))
    parser.add_argument("--only", default="", help="comma-separated experiment names")
    parser.add_argument("--no-timestamp", action="store_true")
    args = parser.parse_args()
    only = {s for s in args.only.split(",") if s}

    failed = 0
    for path in sorted(Path(args.configs).glob("*.json")):
        data = json.loads(path.read_text())
        name = data.get("experiment", path.stem)
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        report, tables = run_experiment(load_config(name, data), timestamp=not args.no_timestamp)
        out = write_outputs(report, tables, args.out)
        status = "PASS" if report["all_pass"] else "FAIL"
        failed += not report["all_pass"]
        print(f"{status} {name:16s} {time.perf_counter() - t0:7.1f}s  {out}")
        for v in report["verdicts"]:
            print(f"    {v['id']:32s} {v['status']:12s} value={v['value']} threshold={v['threshold']}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
