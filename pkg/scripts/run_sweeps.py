"""Run the crash and no-crash sweeps and write one report per sweep.

    python3 scripts/run_sweeps.py --out results/
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
from pathlib import Path

from suig.adversary import parse_sweep_spec, sweep_verify, write_failure_bundles
from suig.ruledsl import load_rules

ROOT = Path(__file__).resolve().parent.parent


@dataclass
class Experiment:
    name: str
    spec: str
    rules: str


EXPERIMENTS = [
    Experiment("alg1_crash", "configs/alg1_crash.spec", "alg1"),
    Experiment("alg2_nocrash", "configs/alg2_nocrash.spec", "alg2"),
    Experiment("alg2_crash", "configs/alg2_crash.spec", "alg2"),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--only", nargs="*", help="experiment names to run")
    ap.add_argument("--bundles", action="store_true", help="also dump failure bundles")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for exp in EXPERIMENTS:
        if args.only and exp.name not in args.only:
            continue
        spec = parse_sweep_spec((ROOT / exp.spec).read_text())
        start = time.perf_counter()
        report = sweep_verify(load_rules(exp.rules), spec, jobs=args.jobs)
        took = time.perf_counter() - start
        (out / f"{exp.name}.report").write_text(report.render())
        if args.bundles and report.failures:
            write_failure_bundles(report, out / f"{exp.name}_failures")
        print(f"== {exp.name} ({took:.1f}s)")
        print(report.summary())


if __name__ == "__main__":
    main()
