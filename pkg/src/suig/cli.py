"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .adversary import (
    SearchBudgetExceeded,
    parse_sweep_spec,
    ssync_adversary_search,
    sweep_verify,
    symmetry_preservation_check,
    write_failure_bundles,
)
from .core import ConfigError, load_config, metrics
from .engine import (
    FSYNC,
    NO_CRASH,
    GatheredAt,
    ScenarioError,
    default_horizon,
    format_schedule,
    parse_scenario,
    parse_schedule,
    replay_check,
    run,
)
from .ruledsl import AmbiguousOrientation, RuleSyntaxError, format_rule_set, load_rules

OK, FAILED, USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def cmd_run(args) -> int:
    config = load_config(args.config)
    rules = load_rules(args.rules)
    rules.check_phi(config.phi)
    scenario = parse_scenario(_read(args.scenario)) if args.scenario else NO_CRASH
    schedule = parse_schedule(_read(args.schedule)) if args.schedule else FSYNC
    horizon = args.horizon if args.horizon is not None else default_horizon(config)
    trace = run(config, rules, schedule, scenario, horizon)
    if args.trace:
        Path(args.trace).write_text(trace.render(), encoding="utf-8")
    print(f"rules: {rules.digest} ({len(rules.rules)} rules)")
    print(metrics(config))
    print(f"crashes: {scenario}")
    print(f"outcome: {trace.outcome}")
    return OK if isinstance(trace.outcome, GatheredAt) else FAILED


def cmd_sweep(args) -> int:
    spec = parse_sweep_spec(_read(args.spec))
    if args.seed is not None:
        spec.seed = args.seed
    name = args.rules or spec.rules
    if not name:
        raise ConfigError("no rule set: give --rules or 'rules = ...' in the spec")
    rules = load_rules(name)
    report = sweep_verify(rules, spec, jobs=args.jobs)
    if args.report:
        Path(args.report).write_text(report.render(), encoding="utf-8")
    if args.bundles and report.failures:
        write_failure_bundles(report, args.bundles)
    sys.stdout.write(report.summary())
    return OK if report.passed else FAILED


def cmd_check_symmetric(args) -> int:
    config = load_config(args.config)
    rules = load_rules(args.rules)
    rules.check_phi(config.phi)
    verdict = symmetry_preservation_check(rules, config, args.horizon)
    broken = [t for t, ok in enumerate(verdict.symmetric) if not ok]
    gathered = [t for t, g in enumerate(verdict.gathered) if g]
    print(f"axis: {verdict.axis:g}")
    print(f"rounds checked: {verdict.rounds}")
    print(f"symmetry broken at: {broken[0] if broken else '-'}")
    print(f"gathered at: {gathered[0] if gathered else '-'}")
    print(f"verdict: {'PASS' if verdict.passed else 'FAIL'}")
    return OK if verdict.passed else FAILED


def cmd_ssync_search(args) -> int:
    config = load_config(args.config)
    rules = load_rules(args.rules)
    rules.check_phi(config.phi)
    schedule = ssync_adversary_search(rules, config, args.horizon, budget=args.budget)
    if schedule is None:
        print("witness: none")
        return FAILED if args.expect == "witness" else OK
    replay = run(config, rules, schedule, NO_CRASH, args.horizon)
    print(f"witness: {len(schedule.activations)} rounds")
    print(f"replay outcome: {replay.outcome}")
    if args.schedule_out:
        Path(args.schedule_out).write_text(format_schedule(schedule), encoding="utf-8")
    if args.expect == "none":
        return FAILED
    return OK if not isinstance(replay.outcome, GatheredAt) else FAILED


def cmd_parse(args) -> int:
    rules = load_rules(args.rules)
    sys.stdout.write(format_rule_set(rules))
    return OK


def cmd_metrics(args) -> int:
    print(metrics(load_config(args.config, validate=False)))
    return OK


def cmd_replay(args) -> int:
    config = load_config(args.config)
    rules = load_rules(args.rules)
    scenario = parse_scenario(_read(args.scenario)) if args.scenario else NO_CRASH
    schedule = parse_schedule(_read(args.schedule)) if args.schedule else FSYNC
    result = replay_check(_read(args.trace), config, rules, schedule, scenario)
    if result:
        print("replay: identical")
        return OK
    print(f"replay: diverges at round {result.divergent_round}")
    return FAILED


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="suig", description="Crash-tolerant gathering of myopic luminous robots on a line.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="execute one run and optionally write its trace")
    r.add_argument("--config", required=True)
    r.add_argument("--rules", required=True, help="builtin name (alg1, alg2) or path")
    r.add_argument("--scenario", help="crash scenario file")
    r.add_argument("--schedule", help="SSYNC schedule file (default FSYNC)")
    r.add_argument("--horizon", type=int)
    r.add_argument("--trace", help="write the trace here")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="crash-scenario sweep from a spec file")
    s.add_argument("--spec", required=True)
    s.add_argument("--rules", help="overrides 'rules' in the spec")
    s.add_argument("--report")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int, help="config and scenario sampling seed")
    s.add_argument("--bundles", help="directory for replayable failure bundles")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check-symmetric", help="edge-symmetry preservation check")
    c.add_argument("--config", required=True)
    c.add_argument("--rules", required=True)
    c.add_argument("--horizon", type=int, default=100)
    c.set_defaults(func=cmd_check_symmetric)

    a = sub.add_parser("ssync-search", help="search for a schedule that prevents gathering")
    a.add_argument("--config", required=True)
    a.add_argument("--rules", required=True)
    a.add_argument("--horizon", type=int, default=50)
    a.add_argument("--budget", type=int, default=10**6)
    a.add_argument("--expect", choices=("witness", "none"), default="witness")
    a.add_argument("--schedule-out")
    a.set_defaults(func=cmd_ssync_search)

    q = sub.add_parser("parse", help="print the normalized rule listing")
    q.add_argument("--rules", required=True)
    q.set_defaults(func=cmd_parse)

    m = sub.add_parser("metrics", help="print m_init, o_init and h_init")
    m.add_argument("--config", required=True)
    m.set_defaults(func=cmd_metrics)

    v = sub.add_parser("replay", help="re-run and compare against a trace file")
    v.add_argument("--trace", required=True)
    v.add_argument("--config", required=True)
    v.add_argument("--rules", required=True)
    v.add_argument("--scenario")
    v.add_argument("--schedule")
    v.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE
    try:
        return args.func(args)
    except (ConfigError, RuleSyntaxError, ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except SearchBudgetExceeded as exc:
        print(f"search budget exceeded: {exc}", file=sys.stderr)
        return FAILED
    except AmbiguousOrientation as exc:
        print(f"ambiguous orientation: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
