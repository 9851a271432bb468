"""Round-synchronous execution of a rule set, with crash injection.

Crash phases
------------
``PRE`` at round t: the robot does nothing from round t on. This covers a
crash at the end of round t-1 and a crash between Look and Compute of round t,
which are indistinguishable under synchronous semantics.

``MID`` at round t: the robot applies the color change computed in round t but
not the move, then stays frozen (a crash between Compute and Move).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .core import Configuration, Robot, is_gathered, metrics
from .ruledsl import RuleSet, select_for_cells

STABILITY_ROUNDS = 3


class ScenarioError(ValueError):
    """A crash scenario or schedule that the model does not allow."""


class CrashNodeViolation(ScenarioError):
    """Crashed robots ended up on more than one node."""


class Phase(enum.Enum):
    PRE = "pre"
    MID = "mid"

    def __lt__(self, other):
        return self.value > other.value  # PRE sorts before MID


@dataclass(frozen=True, order=True)
class CrashEvent:
    round: int
    robot: int
    phase: Phase = Phase.PRE

    def __post_init__(self):
        if self.round < 0:
            raise ScenarioError("crash round must be non-negative")


@dataclass(frozen=True)
class CrashScenario:
    events: tuple[CrashEvent, ...] = ()

    def __post_init__(self):
        events = tuple(sorted(self.events))
        object.__setattr__(self, "events", events)
        ids = [e.robot for e in events]
        if len(set(ids)) != len(ids):
            raise ScenarioError("a robot can crash only once")
        by_round: dict[int, dict[int, Phase]] = {}
        for e in events:
            by_round.setdefault(e.round, {})[e.robot] = e.phase
        object.__setattr__(self, "_by_round", by_round)

    def at_round(self, t: int) -> dict[int, Phase]:
        return self._by_round.get(t, {})

    def instants(self) -> list[tuple[int, Phase]]:
        """Distinct (round, phase) pairs at which crashes happen."""
        return sorted({(e.round, e.phase) for e in self.events})

    def __bool__(self):
        return bool(self.events)

    def __str__(self):
        if not self.events:
            return "none"
        return ";".join(f"{e.robot}@{e.round}{e.phase.value}" for e in self.events)


NO_CRASH = CrashScenario()


@dataclass(frozen=True)
class Fsync:
    def active(self, t: int, config: Configuration) -> frozenset[int] | None:
        return None

    def __str__(self):
        return "fsync"


@dataclass(frozen=True)
class Ssync:
    """Per-round activation sets. Rounds past the end activate every robot."""

    activations: tuple[frozenset[int], ...]

    def __post_init__(self):
        acts = tuple(frozenset(a) for a in self.activations)
        object.__setattr__(self, "activations", acts)
        for t, a in enumerate(acts):
            if not a:
                raise ScenarioError(f"round {t}: SSYNC activation set is empty")

    def active(self, t: int, config: Configuration) -> frozenset[int] | None:
        return self.activations[t] if t < len(self.activations) else None

    def __str__(self):
        return "ssync"


Schedule = Union[Fsync, Ssync]
FSYNC = Fsync()


@dataclass(frozen=True)
class GatheredAt:
    node: int
    round: int

    def __str__(self):
        return f"gathered@{self.node} round={self.round}"


@dataclass(frozen=True)
class TimedOut:
    horizon: int

    def __str__(self):
        return f"timeout horizon={self.horizon}"


@dataclass(frozen=True)
class EngineError:
    kind: str
    message: str = ""

    def __str__(self):
        return f"error kind={self.kind}"


Outcome = Union[GatheredAt, TimedOut, EngineError]


@dataclass(frozen=True)
class Record:
    """State at time ``round`` plus the rules fired in the step that produced it."""

    round: int
    robots: tuple[Robot, ...]
    fired: tuple[tuple[int, str], ...] = ()

    def positions(self) -> dict[int, int]:
        return {r.id: r.position for r in self.robots}

    def render(self) -> str:
        groups: dict[int, dict[tuple[str, bool], int]] = {}
        for r in self.robots:
            node = groups.setdefault(r.position, {})
            node[(r.color, r.crashed)] = node.get((r.color, r.crashed), 0) + 1
        cells = []
        for pos in sorted(groups):
            for (color, crashed), k in sorted(groups[pos].items()):
                text = f"{pos}:{color}" + (f"*{k}" if k > 1 else "") + ("!" if crashed else "")
                cells.append(text)
        fired = ",".join(f"{rid}={label}" for rid, label in self.fired) or "-"
        return f"t={self.round} | {' '.join(cells)} | fired: {fired}"


@dataclass
class Trace:
    phi: int
    rules_digest: str
    records: list[Record] = field(default_factory=list)
    outcome: Outcome | None = None

    def header(self) -> str:
        return f"trace v1 phi={self.phi} rules={self.rules_digest}"

    def lines(self) -> list[str]:
        out = [self.header()]
        out.extend(r.render() for r in self.records)
        out.append(f"outcome: {self.outcome}")
        return out

    def render(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def config_at(self, t: int) -> Configuration:
        rec = self.records[min(t, len(self.records) - 1)]
        return Configuration(rec.robots, self.phi)


def step_with_labels(
    config: Configuration,
    rules: RuleSet,
    active: Iterable[int] | None = None,
    crashes: CrashScenario = NO_CRASH,
    round: int = 0,
) -> tuple[Configuration, tuple[tuple[int, str], ...]]:
    """One synchronous round; also returns (robot id, rule label) for each firing robot."""
    active = None if active is None else frozenset(active)
    crashing = crashes.at_round(round)
    occ = config.occupancy
    phi = config.phi
    empty = frozenset()
    views: dict = {}
    robots, fired = [], []

    for r in config.robots:
        if r.crashed:
            robots.append(r)
            continue
        phase = crashing.get(r.id)
        if phase is Phase.PRE:
            robots.append(Robot(r.id, r.position, r.color, True))
            continue
        if active is not None and r.id not in active:
            if phase is Phase.MID:
                raise ScenarioError(f"robot {r.id} cannot crash mid-cycle in round {round}: it is not activated")
            robots.append(r)
            continue
        key = (r.position, r.color)
        if key in views:
            sel = views[key]
        else:
            cells = tuple(occ.get(p, empty) for p in range(r.position - phi, r.position + phi + 1))
            sel = views[key] = select_for_cells(rules, cells, r.color)
        if sel is None:
            robots.append(Robot(r.id, r.position, r.color, phase is Phase.MID))
            continue
        fired.append((r.id, sel.rule.label))
        color = sel.new_color or r.color
        pos = r.position if phase is Phase.MID else r.position + sel.direction
        robots.append(Robot(r.id, pos, color, phase is Phase.MID))

    for rid in crashing:
        config.robot(rid)  # unknown ids are an error
    crash_nodes = {r.position for r in robots if r.crashed}
    if len(crash_nodes) > 1:
        raise CrashNodeViolation(f"round {round}: crashed robots on nodes {sorted(crash_nodes)}")
    return Configuration(tuple(robots), phi), tuple(fired)


def step(
    config: Configuration,
    rules: RuleSet,
    active: Iterable[int] | None = None,
    crashes: CrashScenario = NO_CRASH,
    round: int = 0,
) -> Configuration:
    """Advance one round. ``active=None`` activates every robot (FSYNC)."""
    return step_with_labels(config, rules, active, crashes, round)[0]


def default_horizon(config: Configuration) -> int:
    return 4 * metrics(config).m_init + 16


def run(
    config: Configuration,
    rules: RuleSet,
    schedule: Schedule = FSYNC,
    crashes: CrashScenario = NO_CRASH,
    horizon: int | None = None,
) -> Trace:
    """Execute until gathered (and stable for three more rounds) or the horizon.

    Crashed robots count toward gathering. Errors from rule selection or
    scenario validation propagate.
    """
    if horizon is None:
        horizon = default_horizon(config)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    rules.check_phi(config.phi)
    for e in crashes.events:
        config.robot(e.robot)
    trace = Trace(config.phi, rules.digest, [Record(0, config.robots)])
    cur, t, since = config, 0, None
    while True:
        if is_gathered(cur):
            if since is None:
                since = t
            if t - since >= STABILITY_ROUNDS:
                trace.outcome = GatheredAt(cur.occupied[0], since)
                return trace
        else:
            since = None
        if since is None and t >= horizon:
            trace.outcome = TimedOut(horizon)
            return trace
        nxt, fired = step_with_labels(cur, rules, schedule.active(t, cur), crashes, t)
        if since is not None and any(a.position != b.position for a, b in zip(cur.robots, nxt.robots)):
            since = None
        t += 1
        trace.records.append(Record(t, nxt.robots, fired))
        cur = nxt


@dataclass(frozen=True)
class Replay:
    ok: bool
    divergent_round: int | None = None

    def __bool__(self):
        return self.ok


def replay_check(
    trace: Trace | str | Sequence[str],
    config: Configuration,
    rules: RuleSet,
    schedule: Schedule = FSYNC,
    crashes: CrashScenario = NO_CRASH,
    horizon: int | None = None,
) -> Replay:
    """Re-execute and compare rendered records line by line."""
    if isinstance(trace, Trace):
        expected = trace.lines()
        if horizon is None and isinstance(trace.outcome, TimedOut):
            horizon = trace.outcome.horizon
    else:
        expected = trace.splitlines() if isinstance(trace, str) else list(trace)
        if horizon is None and expected and expected[-1].startswith("outcome: timeout horizon="):
            horizon = int(expected[-1].rsplit("=", 1)[1])
    try:
        actual = run(config, rules, schedule, crashes, horizon).lines()
    except Exception:
        return Replay(False, 0)
    if not expected or expected[0] != actual[0]:
        return Replay(False, 0)
    body_e, body_a = expected[1:], actual[1:]
    for k, (a, b) in enumerate(zip(body_e, body_a)):
        if a != b:
            return Replay(False, k)
    if len(body_e) != len(body_a):
        return Replay(False, min(len(body_e), len(body_a)))
    return Replay(True)


# -- scenario / schedule files ----------------------------------------------


def parse_scenario(text: str) -> CrashScenario:
    """Lines of ``crash <robot> <round> <pre|mid>``."""
    events = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if len(words) != 4 or words[0] != "crash":
            raise ScenarioError(f"line {lineno}: expected 'crash <robot> <round> <pre|mid>'")
        try:
            events.append(CrashEvent(int(words[2]), int(words[1]), Phase(words[3])))
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from None
    return CrashScenario(tuple(events))


def format_scenario(scenario: CrashScenario) -> str:
    return "".join(f"crash {e.robot} {e.round} {e.phase.value}\n" for e in scenario.events)


def parse_schedule(text: str) -> Schedule:
    """``fsync``, or ``ssync`` followed by lines ``<round>: <id> <id> ...``."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] not in ("fsync", "ssync"):
        raise ScenarioError("schedule must start with 'fsync' or 'ssync'")
    if lines[0] == "fsync":
        if len(lines) > 1:
            raise ScenarioError("fsync schedule takes no activation lines")
        return FSYNC
    acts = []
    for k, line in enumerate(lines[1:]):
        head, sep, ids = line.partition(":")
        if not sep or not head.strip().isdigit() or int(head) != k:
            raise ScenarioError(f"expected activation line for round {k}, got {line!r}")
        acts.append(frozenset(int(x) for x in ids.split()))
    return Ssync(tuple(acts))


def format_schedule(schedule: Schedule) -> str:
    if isinstance(schedule, Fsync):
        return "fsync\n"
    lines = ["ssync"]
    lines.extend(f"{t}: " + " ".join(map(str, sorted(a))) for t, a in enumerate(schedule.activations))
    return "\n".join(lines) + "\n"
