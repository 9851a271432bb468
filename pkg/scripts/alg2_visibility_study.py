"""Break down three-color crash-sweep failures by visibility range.

Runs the single-event crash sweep for odd-o_init starts and reports, per phi,
how many scenarios time out, plus the distinct stuck shapes (translated so the
leftmost occupied node is 0).
"""

from __future__ import annotations

import argparse
from collections import Counter, defaultdict
from dataclasses import dataclass

from suig.adversary import Bound, SweepSpec, sweep_verify
from suig.ruledsl import load_rules


@dataclass
class StudyConfig:
    m_max: int = 7
    robots_per_node: int = 2
    phi_extra: tuple[int, ...] = (0, 1, 2)


def stuck_shape(trace_text: str) -> str:
    last = [ln for ln in trace_text.splitlines() if ln.startswith("t=")][-1]
    cells = last.split("|")[1].split()
    base = int(cells[0].split(":")[0])
    return " ".join(f"{int(c.split(':')[0]) - base}:{c.split(':', 1)[1]}" for c in cells)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m-max", type=int, default=7)
    ap.add_argument("--robots-per-node", type=int, default=2)
    ap.add_argument("--examples", type=int, default=1, help="failing traces to print")
    args = ap.parse_args()
    cfg = StudyConfig(args.m_max, args.robots_per_node)

    spec = SweepSpec(
        parity_o="odd",
        m_max=cfg.m_max,
        robots_per_node=cfg.robots_per_node,
        phi_extra=cfg.phi_extra,
        crash_events_max=1,
        bound=Bound(4, 0),
    )
    report = sweep_verify(load_rules("alg2"), spec)
    tested = Counter(int(ln.split(" phi=")[1].split()[0]) for ln in report.lines)
    failed = Counter(f.config.phi for f in report.failures)
    shapes = defaultdict(Counter)
    for f in report.failures:
        shapes[f.config.phi][stuck_shape(f.trace)] += 1

    print("phi  scenarios  failures")
    for phi in sorted(tested):
        print(f"{phi:>3}  {tested[phi]:>9}  {failed[phi]:>8}")
    for phi in sorted(shapes):
        for shape, k in shapes[phi].most_common():
            print(f"phi={phi} stuck at [{shape}] x{k}")
    for f in report.failures[: args.examples]:
        print(f"\ncrash {f.scenario} on {f.config.occupied} phi={f.config.phi}")
        print(f.trace, end="")


if __name__ == "__main__":
    main()
