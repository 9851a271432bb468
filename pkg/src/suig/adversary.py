"""Adversarial exploration: crash sweeps, symmetry preservation, SSYNC search."""

from __future__ import annotations

import itertools
import random
import re
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterator, Sequence

from .core import (
    Configuration,
    edge_symmetry_axis,
    format_config,
    is_gathered,
    metrics,
)
from .engine import (
    FSYNC,
    NO_CRASH,
    CrashEvent,
    CrashScenario,
    GatheredAt,
    EngineError,
    Phase,
    ScenarioError,
    Ssync,
    Trace,
    TimedOut,
    default_horizon,
    format_scenario,
    run,
    step,
)
from .ruledsl import AmbiguousOrientation, RuleSet

PATTERNS = ("subset", "all")


class SearchBudgetExceeded(RuntimeError):
    """The SSYNC search visited more states than allowed, so no verdict."""


# -- round bounds ------------------------------------------------------------


@dataclass(frozen=True)
class Bound:
    """Round bound ``coef * m_init + const``."""

    coef: int
    const: int = 0

    _RE = re.compile(r"^\s*(\d+)\s*\*\s*m\s*(?:([+-])\s*(\d+))?\s*$")

    @classmethod
    def parse(cls, text: str) -> Bound:
        m = cls._RE.match(text)
        if not m:
            raise ValueError(f"bad bound {text!r}; expected e.g. '4*m+0'")
        const = int(m.group(3) or 0) * (-1 if m.group(2) == "-" else 1)
        return cls(int(m.group(1)), const)

    def __call__(self, m_init: int) -> int:
        return self.coef * m_init + self.const

    def __str__(self):
        return f"{self.coef}*m{self.const:+d}"


# -- crash scenario enumeration ---------------------------------------------


@dataclass(frozen=True)
class CrashBounds:
    max_events: int = 1
    window: int | None = None
    window_extra: int = 3
    phases: tuple[Phase, ...] = (Phase.PRE, Phase.MID)
    patterns: tuple[str, ...] = PATTERNS


def crash_window(base: Trace, bounds: CrashBounds) -> int:
    """Number of crash rounds to try: up to no-crash gathering time + extra."""
    if bounds.window is not None:
        return bounds.window
    if isinstance(base.outcome, GatheredAt):
        return base.outcome.round + bounds.window_extra + 1
    return len(base.records)


def _groups_at(robots, node=None) -> dict[int, list[list[int]]]:
    """node -> list of id lists, one per color, for robots still running."""
    acc: dict[int, dict[str, list[int]]] = {}
    for r in robots:
        if r.crashed or (node is not None and r.position != node):
            continue
        acc.setdefault(r.position, {}).setdefault(r.color, []).append(r.id)
    return {pos: [sorted(ids) for _, ids in sorted(by_color.items())] for pos, by_color in sorted(acc.items())}


def _node_patterns(groups: list[list[int]], patterns, exclude=()) -> Iterator[tuple[int, ...]]:
    """Canonical crash sets at one node: per color group none/one/all."""
    options = []
    for ids in groups:
        ids = [i for i in ids if i not in exclude]
        opts = [()]
        if "subset" in patterns and len(ids) >= 2:
            opts.append((ids[0],))
        if "all" in patterns and ids:
            opts.append(tuple(ids))
        options.append(opts)
    for combo in itertools.product(*options):
        chosen = tuple(sorted(i for part in combo for i in part))
        if chosen:
            yield chosen


def _record(trace: Trace, t: int):
    return trace.records[min(t, len(trace.records) - 1)].robots


def _single_events(trace: Trace, window: int, bounds: CrashBounds, start=0, node=None, exclude=()):
    for t in range(start, window):
        for pos, groups in _groups_at(_record(trace, t), node).items():
            for chosen in _node_patterns(groups, bounds.patterns, exclude):
                for phase in bounds.phases:
                    yield tuple(CrashEvent(t, rid, phase) for rid in chosen)


def _crash_node(config: Configuration, trace: Trace, scenario: CrashScenario) -> int:
    e = scenario.events[0]
    return next(r.position for r in _record(trace, e.round) if r.id == e.robot)


def enumerate_crash_scenarios(
    config: Configuration,
    rules: RuleSet,
    bounds: CrashBounds = CrashBounds(),
    base: Trace | None = None,
) -> Iterator[CrashScenario]:
    """Yield the empty scenario, then every canonical crash scenario.

    A single crash instant picks a round in the window, a node occupied at
    that round in the crash-free run, a phase, and for each color group at the
    node either nothing, its lowest-id robot, or all of it. Same-group robots
    act in lockstep, so which member crashes does not matter.

    With ``max_events=2`` a second instant is added at the node of the first
    one, at the same round (other phase, other robots) or later.
    """
    yield NO_CRASH
    if bounds.max_events < 1:
        return
    if base is None:
        base = run(config, rules)
    window = crash_window(base, bounds)
    firsts = [CrashScenario(ev) for ev in _single_events(base, window, bounds)]
    yield from firsts
    if bounds.max_events < 2:
        return
    seen = set()
    for first in firsts:
        for second in _second_events(config, rules, first, window, bounds):
            s = CrashScenario(first.events + second)
            if s.events not in seen:
                seen.add(s.events)
                yield s


def _second_events(config, rules, first: CrashScenario, window, bounds):
    try:
        trace = run(config, rules, crashes=first)
    except (ScenarioError, AmbiguousOrientation):
        return
    node = _crash_node(config, trace, first)
    t1, phase1 = first.events[0].round, first.events[0].phase
    taken = {e.robot for e in first.events}
    for ev in _single_events(trace, window, bounds, start=t1, node=node, exclude=taken):
        if ev[0].round == t1 and ev[0].phase == phase1:
            continue
        yield ev


def sample_two_event_scenarios(
    config: Configuration,
    rules: RuleSet,
    count: int,
    rng: random.Random,
    bounds: CrashBounds = CrashBounds(max_events=2),
    base: Trace | None = None,
) -> list[CrashScenario]:
    """Up to ``count`` distinct random two-instant same-node scenarios."""
    if base is None:
        base = run(config, rules)
    window = crash_window(base, bounds)
    firsts = [CrashScenario(ev) for ev in _single_events(base, window, bounds)]
    if not firsts:
        return []
    out, seen = [], set()
    attempts = 0
    second_cache: dict = {}
    while len(out) < count and attempts < 20 * count:
        attempts += 1
        first = rng.choice(firsts)
        if first not in second_cache:
            second_cache[first] = list(_second_events(config, rules, first, window, bounds))
        options = second_cache[first]
        if not options:
            continue
        s = CrashScenario(first.events + rng.choice(options))
        if s.events not in seen:
            seen.add(s.events)
            out.append(s)
    return out


# -- sweeps ------------------------------------------------------------------


@dataclass
class SweepSpec:
    parity_m: str = "any"
    parity_o: str = "any"
    m_min: int = 2
    m_max: int = 9
    exhaustive_m_max: int | None = None
    samples_per_m: int = 0
    robots_per_node: int = 1
    phi_extra: tuple[int, ...] = (0,)
    crash_events_max: int = 0
    phases: tuple[Phase, ...] = (Phase.PRE, Phase.MID)
    patterns: tuple[str, ...] = PATTERNS
    window_extra: int = 3
    two_event_exhaustive_m_max: int = 0
    two_event_samples: int = 0
    bound: Bound = Bound(4, 0)
    horizon: int | None = None
    seed: int = 0
    rules: str | None = None

    def crash_bounds(self, events: int) -> CrashBounds:
        return CrashBounds(
            max_events=events, window_extra=self.window_extra, phases=self.phases, patterns=self.patterns
        )


def _parity_ok(value: int, parity: str) -> bool:
    return parity == "any" or (value % 2 == 1) == (parity == "odd")


def occupied_patterns(m: int, parity_o: str = "any", limit: int | None = None, rng=None) -> list[tuple[int, ...]]:
    """Occupied-node sets spanning exactly 0..m-1.

    All of them when ``limit`` is None, otherwise up to ``limit`` distinct
    random ones.
    """
    if m == 1:
        return [(0,)] if _parity_ok(1, parity_o) else []
    inner = m - 2

    def build(mask):
        return (0,) + tuple(i + 1 for i in range(inner) if mask >> i & 1) + (m - 1,)

    if limit is None:
        out = [build(mask) for mask in range(1 << inner)]
        return [p for p in out if _parity_ok(len(p), parity_o)]
    rng = rng or random.Random(0)
    seen, out = set(), []
    total = 1 << inner
    attempts = 0
    while len(out) < limit and attempts < 50 * limit:
        attempts += 1
        mask = rng.randrange(total)
        p = build(mask)
        if mask in seen or not _parity_ok(len(p), parity_o):
            continue
        seen.add(mask)
        out.append(p)
    return out


def generate_configs(spec: SweepSpec, color: str = "W") -> list[Configuration]:
    rng = random.Random(spec.seed)
    exhaustive = spec.m_max if spec.exhaustive_m_max is None else spec.exhaustive_m_max
    out = []
    for m in range(max(spec.m_min, 2), spec.m_max + 1):
        if not _parity_ok(m, spec.parity_m):
            continue
        if m <= exhaustive:
            patterns = occupied_patterns(m, spec.parity_o)
        else:
            patterns = occupied_patterns(m, spec.parity_o, spec.samples_per_m, rng)
        for occupied in patterns:
            h = max(b - a for a, b in zip(occupied, occupied[1:]))
            for extra in spec.phi_extra:
                nodes = {p: {color: spec.robots_per_node} for p in occupied}
                out.append(Configuration.from_nodes(nodes, h + extra))
    return out


def terminal_case(trace: Trace) -> str | None:
    """Name the final pattern of a crash-free run of the three-color algorithm.

    Looks at the rules fired in the step that completed gathering:
    case1 R2a+R3a, case2 R3a+R4c, case3 R4a+R3a or R4b+R2a,
    case4 R3b or R2b fired from two different nodes.
    """
    if not isinstance(trace.outcome, GatheredAt) or trace.outcome.round == 0:
        return None
    t = trace.outcome.round
    labels = {label for _, label in trace.records[t].fired} - {"R0"}
    if labels == {"R2a", "R3a"}:
        return "case1"
    if labels == {"R3a", "R4c"}:
        return "case2"
    if labels in ({"R4a", "R3a"}, {"R4b", "R2a"}):
        return "case3"
    if labels in ({"R3b"}, {"R2b"}):
        before = trace.records[t - 1].positions()
        if len({before[rid] for rid, _ in trace.records[t].fired}) == 2:
            return "case4"
    return None


@dataclass
class Failure:
    config: Configuration
    scenario: CrashScenario
    outcome: object
    trace: str
    reason: str


@dataclass
class SweepReport:
    bound: Bound
    configs_tested: int = 0
    scenarios_tested: int = 0
    two_event_tested: int = 0
    failures: list[Failure] = field(default_factory=list)
    max_round: int = 0
    max_ratio: float = 0.0
    histogram: dict[int, Counter] = field(default_factory=dict)
    terminal_cases: Counter = field(default_factory=Counter)
    mid_crash_labels: Counter = field(default_factory=Counter)
    lines: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def merge(self, other: SweepReport):
        self.configs_tested += other.configs_tested
        self.scenarios_tested += other.scenarios_tested
        self.two_event_tested += other.two_event_tested
        self.failures.extend(other.failures)
        self.max_round = max(self.max_round, other.max_round)
        self.max_ratio = max(self.max_ratio, other.max_ratio)
        for m, hist in other.histogram.items():
            self.histogram.setdefault(m, Counter()).update(hist)
        self.terminal_cases.update(other.terminal_cases)
        self.mid_crash_labels.update(other.mid_crash_labels)
        self.lines.extend(other.lines)

    def summary(self) -> str:
        out = [
            f"verdict: {self.verdict}",
            f"bound: t <= {self.bound}",
            f"configs: {self.configs_tested}",
            f"scenarios: {self.scenarios_tested}",
            f"two_event_scenarios: {self.two_event_tested}",
            f"failures: {len(self.failures)}",
            f"max_round: {self.max_round}",
            f"max_round_per_m: {self.max_ratio:.3f}",
        ]
        for m in sorted(self.histogram):
            hist = " ".join(f"{t}:{k}" for t, k in sorted(self.histogram[m].items()))
            out.append(f"rounds m={m}: {hist}")
        if self.terminal_cases:
            out.append("terminal_cases: " + " ".join(f"{c}={k}" for c, k in sorted(self.terminal_cases.items())))
        if self.mid_crash_labels:
            out.append("mid_crash_rules: " + " ".join(f"{c}={k}" for c, k in sorted(self.mid_crash_labels.items())))
        return "\n".join(out) + "\n"

    def render(self) -> str:
        return "\n".join(sorted(self.lines)) + "\n# summary\n" + self.summary()


def _nodes_text(config: Configuration) -> str:
    per = Counter(r.position for r in config.robots)
    return ",".join(f"{p}" for p in sorted(per)) + f"x{max(per.values())}"


def _check_config(rules: RuleSet, spec: SweepSpec, index: int, config: Configuration) -> SweepReport:
    rep = SweepReport(spec.bound, configs_tested=1)
    m = metrics(config).m_init
    limit = spec.bound(m)
    horizon = spec.horizon or max(default_horizon(config), limit)
    prefix = f"cfg={index:05d} m={m} phi={config.phi} nodes={_nodes_text(config)}"

    def check(scenario: CrashScenario, base: Trace | None = None) -> Trace | None:
        rep.scenarios_tested += 1
        if base is not None and not scenario:
            trace = base
        else:
            try:
                trace = run(config, rules, FSYNC, scenario, horizon)
            except (AmbiguousOrientation, ScenarioError) as exc:
                outcome = EngineError(type(exc).__name__, str(exc))
                rep.lines.append(f"{prefix} crash={scenario} outcome: {outcome}")
                rep.failures.append(Failure(config, scenario, outcome, "", str(exc)))
                return None
        outcome = trace.outcome
        rep.lines.append(f"{prefix} crash={scenario} outcome: {outcome}")
        if isinstance(outcome, GatheredAt) and outcome.round <= limit:
            rep.max_round = max(rep.max_round, outcome.round)
            rep.max_ratio = max(rep.max_ratio, outcome.round / m)
            rep.histogram.setdefault(m, Counter())[outcome.round] += 1
        else:
            reason = "timed out" if isinstance(outcome, TimedOut) else f"gathered after bound {limit}"
            rep.failures.append(Failure(config, scenario, outcome, trace.render(), reason))
        if not scenario:
            case = terminal_case(trace)
            if case:
                rep.terminal_cases[case] += 1
        for e in scenario.events:
            if e.phase is Phase.MID and e.round + 1 < len(trace.records):
                label = dict(trace.records[e.round + 1].fired).get(e.robot)
                rep.mid_crash_labels[label or "-"] += 1
        return trace

    base = run(config, rules, FSYNC, NO_CRASH, horizon)
    check(NO_CRASH, base)
    if spec.crash_events_max >= 1:
        two_exhaustive = spec.crash_events_max >= 2 and m <= spec.two_event_exhaustive_m_max
        bounds = spec.crash_bounds(2 if two_exhaustive else 1)
        for scenario in enumerate_crash_scenarios(config, rules, bounds, base):
            if scenario:
                check(scenario)
                if len(scenario.instants()) > 1:
                    rep.two_event_tested += 1
        if spec.crash_events_max >= 2 and not two_exhaustive and spec.two_event_samples:
            rng = random.Random(f"{spec.seed}:{index}")
            for scenario in sample_two_event_scenarios(
                config, rules, spec.two_event_samples, rng, spec.crash_bounds(2), base
            ):
                check(scenario)
                rep.two_event_tested += 1
    return rep


_WORKER: dict = {}


def _worker_init(rules, spec):
    _WORKER["rules"], _WORKER["spec"] = rules, spec


def _worker_run(item):
    index, config = item
    return _check_config(_WORKER["rules"], _WORKER["spec"], index, config)


def sweep_verify(
    rules: RuleSet,
    spec: SweepSpec,
    jobs: int = 1,
    configs: Sequence[Configuration] | None = None,
) -> SweepReport:
    """Run every generated config under every enumerated crash scenario.

    A run passes when it gathers within ``spec.bound``. Failures keep the
    rendered trace so they can be replayed.
    """
    if configs is None:
        configs = generate_configs(spec, rules.colors[0])
    items = list(enumerate(configs))
    report = SweepReport(spec.bound)
    if jobs <= 1 or len(items) < 2:
        parts = (_check_config(rules, spec, i, c) for i, c in items)
        for part in parts:
            report.merge(part)
    else:
        chunk = max(1, len(items) // (jobs * 8))
        with ProcessPoolExecutor(jobs, initializer=_worker_init, initargs=(rules, spec)) as pool:
            for part in pool.map(_worker_run, items, chunksize=chunk):
                report.merge(part)
    report.lines.sort()
    return report


def parse_sweep_spec(text: str) -> SweepSpec:
    """``key = value`` lines; list values are comma separated."""
    spec = SweepSpec()
    known = {f.name for f in fields(SweepSpec)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or key not in known:
            raise ValueError(f"line {lineno}: unknown setting {line!r}")
        try:
            setattr(spec, key, _convert(key, value))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    for key in ("parity_m", "parity_o"):
        if getattr(spec, key) not in ("odd", "even", "any"):
            raise ValueError(f"{key} must be odd, even or any")
    return spec


def _convert(key: str, value: str):
    if key in ("parity_m", "parity_o", "rules"):
        return value
    if key == "bound":
        return Bound.parse(value)
    if key == "phases":
        return tuple(Phase(v.strip()) for v in value.split(","))
    if key == "patterns":
        pats = tuple(v.strip() for v in value.split(","))
        if not set(pats) <= set(PATTERNS):
            raise ValueError(f"patterns must be among {PATTERNS}")
        return pats
    if key == "phi_extra":
        return tuple(int(v) for v in value.split(","))
    if key in ("exhaustive_m_max", "horizon"):
        return None if value in ("none", "auto") else int(value)
    return int(value)


def write_failure_bundles(report: SweepReport, directory) -> list:
    """One directory per failure holding config, scenario and trace files."""
    from pathlib import Path

    root = Path(directory)
    written = []
    for k, f in enumerate(report.failures):
        d = root / f"failure_{k:04d}"
        d.mkdir(parents=True, exist_ok=True)
        (d / "config.cfg").write_text(format_config(f.config), encoding="utf-8")
        (d / "scenario.crash").write_text(format_scenario(f.scenario), encoding="utf-8")
        (d / "trace.tr").write_text(f.trace, encoding="utf-8")
        written.append(d)
    return written


# -- edge-symmetric impossibility -------------------------------------------


@dataclass
class SymmetryVerdict:
    passed: bool
    axis: float
    symmetric: list[bool]
    gathered: list[bool]
    trace: Trace

    @property
    def rounds(self) -> int:
        return len(self.symmetric) - 1


def symmetry_preservation_check(rules: RuleSet, config: Configuration, horizon: int = 100) -> SymmetryVerdict:
    """Run FSYNC without crashes and confirm every round stays edge-symmetric
    about the initial axis and is never gathered."""
    axis = edge_symmetry_axis(config)
    if axis is None:
        raise ValueError("configuration is not edge-symmetric")
    trace = run(config, rules, FSYNC, NO_CRASH, horizon)
    symmetric, gathered = [], []
    for t in range(horizon + 1):
        c = trace.config_at(t)
        symmetric.append(edge_symmetry_axis(c) == axis)
        gathered.append(is_gathered(c))
    passed = all(symmetric) and not any(gathered)
    return SymmetryVerdict(passed, axis / 2, symmetric, gathered, trace)


# -- SSYNC adversary ---------------------------------------------------------


def _canonical_state(config: Configuration):
    cells = sorted({(r.position, r.color) for r in config.robots})
    lo, hi = cells[0][0], cells[-1][0]
    fwd = tuple((p - lo, c) for p, c in cells)
    back = tuple(sorted((hi - p, c) for p, c in cells))
    return min(fwd, back)


def _activation_groups(config: Configuration) -> list[frozenset[int]]:
    acc: dict = {}
    for r in config.robots:
        if not r.crashed:
            acc.setdefault((r.position, r.color), []).append(r.id)
    return [frozenset(ids) for _, ids in sorted(acc.items())]


def ssync_adversary_search(
    rules: RuleSet,
    config: Configuration,
    horizon: int,
    budget: int = 10**6,
    full_activation_only: bool = False,
    allow_idle_rounds: bool = False,
) -> Ssync | None:
    """Look for an SSYNC schedule that keeps the robots ungathered for ``horizon`` rounds.

    Depth-first over non-empty subsets of (node, color) groups, smallest
    subsets first. States are memoized modulo translation and reflection with
    the deepest remaining horizon known to be unavoidable. Rounds in which
    nothing changes are skipped unless ``allow_idle_rounds``, since activating
    only idle robots would stall any algorithm trivially.

    Raises SearchBudgetExceeded after ``budget`` distinct states.
    """
    if any(r.crashed for r in config.robots):
        raise ValueError("the SSYNC search takes a crash-free configuration")
    rules.check_phi(config.phi)
    dead: dict = {}
    seen: set = set()

    def choices(cfg):
        groups = _activation_groups(cfg)
        if full_activation_only:
            yield frozenset().union(*groups)
            return
        for size in range(1, len(groups) + 1):
            for combo in itertools.combinations(groups, size):
                yield frozenset().union(*combo)

    def dfs(cfg: Configuration, left: int, t: int):
        if is_gathered(cfg):
            return None
        if left == 0:
            return []
        key = _canonical_state(cfg)
        if dead.get(key, -1) >= left:
            return None
        if key not in seen:
            seen.add(key)
            if len(seen) > budget:
                raise SearchBudgetExceeded(f"more than {budget} states visited")
        for active in choices(cfg):
            nxt = step(cfg, rules, active, NO_CRASH, t)
            if not allow_idle_rounds and nxt.robots == cfg.robots:
                continue
            rest = dfs(nxt, left - 1, t + 1)
            if rest is not None:
                return [active] + rest
        dead[key] = max(dead.get(key, -1), left)
        return None

    limit = sys.getrecursionlimit()
    if horizon + 100 > limit:
        sys.setrecursionlimit(horizon + 100)
    try:
        found = dfs(config, horizon, 0)
    finally:
        sys.setrecursionlimit(limit)
    return None if found is None else Ssync(tuple(found))
