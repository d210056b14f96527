"""Run the bundled theorem sweeps through the CLI and summarise them.

Each scenario in ``scenarios/sweep_*.json`` is run with ``syzygy sweep``;
outputs land in ``<out>/<scenario name>/``. Besides the aggregate counts the
script prints how close the observed first events come to their bounds.

Usage: python3 scripts/run_sweeps.py [--out runs] [--workers N] [--count N]
"""

import argparse
import json
import tempfile
from pathlib import Path

import numpy as np

from syzygy.cli import main as syzygy_main

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--count", type=int, default=None, help="override the sampler count")
    args = ap.parse_args()
    worst = 0
    for path in sorted((ROOT / "scenarios").glob("sweep_*.json")):
        data = json.loads(path.read_text())
        if args.count:
            data["initial_condition"]["sampler"]["count"] = args.count
        out = Path(args.out) / path.stem
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(data, fh)
        argv = ["sweep", "--scenario", fh.name, "--out", str(out)]
        if args.workers:
            argv += ["--workers", str(args.workers)]
        code = syzygy_main(argv)
        Path(fh.name).unlink()
        worst = max(worst, code)
        agg = json.loads((out / "aggregate.json").read_text())
        reports = json.loads((out / "reports.json").read_text())["reports"]
        frac = np.array([r["t_event"] / r["bound"] for r in reports if r["outcome"] == "EventFound"])
        print(f"{path.stem}: exit {code}, n = {agg['n']}, outcomes {agg['outcomes']}")
        if len(frac):
            q = np.quantile(frac, [0.5, 0.9, 1.0])
            print(f"    t_event / bound: median {q[0]:.3f}, 90% {q[1]:.3f}, max {q[2]:.3f}")
    raise SystemExit(worst)


if __name__ == "__main__":
    main()
