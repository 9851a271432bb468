"""Shared strategies and a brute-force guard oracle for the test suite."""

from __future__ import annotations

from collections import Counter
from functools import lru_cache

from hypothesis import strategies as st

from suig.core import Configuration
from suig.engine import NO_CRASH, CrashEvent, CrashScenario, Phase, run
from suig.ruledsl import (
    STAY,
    FORWARD,
    BACKWARD,
    AllOf,
    Any,
    AnyOf,
    Center,
    Contains,
    Count,
    Empty,
    ExactlySingle,
    NegatedSequence,
    Not,
    Repeat,
    Rule,
    RuleSet,
    SelfIs,
    Statement,
)

PALETTE = ("W", "R", "B", "G")


# -- oracle ------------------------------------------------------------------
# Written against the language description only: a guard is expanded to a flat
# list of cell tests, a negated sub-sequence becomes one composite test that
# spans several cells.


def _oracle_pred(p, cell: frozenset, me: str) -> bool:
    kind = type(p).__name__
    if kind == "Empty":
        return len(cell) == 0
    if kind == "Any":
        return True
    if kind == "Contains":
        return p.color in cell
    if kind == "ExactlySingle":
        return cell == frozenset({p.color})
    if kind == "SelfIs":
        return me == p.color and p.color in cell
    if kind == "Not":
        return not _oracle_pred(p.inner, cell, me)
    if kind == "AnyOf":
        return any(_oracle_pred(q, cell, me) for q in p.options)
    if kind == "AllOf":
        return all(_oracle_pred(q, cell, me) for q in p.parts)
    raise TypeError(kind)


def _expand(segments, phi):
    out = []
    for s in segments:
        kind = type(s).__name__
        if kind == "Repeat":
            n = s.count.phi_coeff * phi + s.count.offset
            out.extend(("cell", s.pred) for _ in range(n))
        elif kind == "NegatedSequence":
            out.append(("neg", _expand(s.inner, phi)))
        else:
            out.append(("cell", s.pred))
    return out


def _width(items):
    return sum(1 if k == "cell" else _width(v) for k, v in items)


def _oracle_seq(items, cells, me) -> bool:
    i = 0
    for kind, val in items:
        if kind == "cell":
            if not _oracle_pred(val, cells[i], me):
                return False
            i += 1
        else:
            w = _width(val)
            if _oracle_seq(val, cells[i : i + w], me):
                return False
            i += w
    return True


def oracle_orientations(rule: Rule, cells, me: str) -> set[str]:
    items = _expand(rule.guard, (len(cells) - 1) // 2)
    assert _width(items) == len(cells)
    found = set()
    if _oracle_seq(items, list(cells), me):
        found.add("as-written")
    if _oracle_seq(items, list(cells)[::-1], me):
        found.add("mirrored")
    return found


# -- rule strategies ---------------------------------------------------------

colors = st.sampled_from(PALETTE)


@lru_cache(maxsize=None)
def preds(allow_self: bool, depth: int = 2):
    base = [st.just(Empty()), st.just(Any()), colors.map(Contains), colors.map(ExactlySingle)]
    if allow_self:
        base.append(colors.map(SelfIs))
        base.append(colors.map(lambda c: AllOf((SelfIs(c), ExactlySingle(c)))))
    leaf = st.one_of(base)
    if depth == 0:
        return leaf
    sub = preds(allow_self, depth - 1)
    return st.one_of(
        leaf,
        sub.map(Not),
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: AnyOf(tuple(xs))),
        st.lists(sub, min_size=1, max_size=3).map(lambda xs: AllOf(tuple(xs))),
    )


def _count_for(n: int, phi: int, draw) -> Count:
    """A repetition count that resolves to n at this phi."""
    options = [Count(0, n)]
    if phi > 0:
        options.append(Count(1, n - phi))
    return draw(st.sampled_from(options))


@st.composite
def segments_of_width(draw, width: int, phi: int, depth: int = 1):
    segs = []
    left = width
    while left > 0:
        n = draw(st.integers(1, left))
        if depth > 0 and draw(st.integers(0, 4)) == 0:
            segs.append(NegatedSequence(tuple(draw(segments_of_width(n, phi, depth - 1)))))
        else:
            segs.append(Repeat(draw(preds(False)), _count_for(n, phi, draw)))
        left -= n
    return segs


@st.composite
def rules_for_phi(draw, phi: int, label: str = "R0"):
    left = draw(segments_of_width(phi, phi))
    right = draw(segments_of_width(phi, phi))
    center = Center(draw(preds(True)))
    stmt = Statement(draw(st.one_of(st.none(), colors)), draw(st.sampled_from((STAY, FORWARD, BACKWARD))))
    return Rule(label, tuple(left) + (center,) + tuple(right), stmt)


@st.composite
def rule_sets(draw, phi: int | None = None):
    phi = phi or draw(st.integers(1, 3))
    n = draw(st.integers(1, 4))
    rules = tuple(draw(rules_for_phi(phi, f"R{k}")) for k in range(n))
    return RuleSet(PALETTE, rules)


@st.composite
def views(draw, phi: int):
    cell = st.frozensets(colors, max_size=3)
    cells = [draw(cell) for _ in range(2 * phi + 1)]
    me = draw(colors)
    cells[phi] = cells[phi] | {me}
    return tuple(cells), me


# -- configuration and crash strategies -------------------------------------


@st.composite
def initial_configs(draw, max_nodes: int = 6, max_phi: int = 3, max_per_node: int = 2):
    phi = draw(st.integers(1, max_phi))
    k = draw(st.integers(2, max_nodes))
    gaps = draw(st.lists(st.integers(1, phi), min_size=k - 1, max_size=k - 1))
    start = draw(st.integers(-20, 20))
    nodes, pos = {}, start
    for g in [0] + gaps:
        pos += g
        nodes[pos] = {"W": draw(st.integers(1, max_per_node))}
    return Configuration.from_nodes(nodes, phi)


@st.composite
def crash_scenarios(draw, config: Configuration, rules, two_events: bool = True):
    """Arbitrary (non-canonical) crash scenarios at a single node."""
    base = run(config, rules)
    if not draw(st.booleans()):
        return NO_CRASH
    t = draw(st.integers(0, len(base.records) - 1))
    robots = base.records[t].robots
    node = draw(st.sampled_from(sorted({r.position for r in robots})))
    here = [r.id for r in robots if r.position == node and not r.crashed]
    chosen = draw(st.lists(st.sampled_from(here), min_size=1, unique=True))
    phase = draw(st.sampled_from((Phase.PRE, Phase.MID)))
    first = CrashScenario(tuple(CrashEvent(t, rid, phase) for rid in chosen))
    if not two_events or not draw(st.booleans()):
        return first
    trace = run(config, rules, crashes=first)
    t2 = draw(st.integers(t, len(trace.records) - 1))
    rest = [r.id for r in trace.records[t2].robots if r.position == node and not r.crashed]
    if t2 == t:
        rest = [i for i in rest if i not in chosen]
        phase2 = Phase.PRE if phase is Phase.MID else Phase.MID
    else:
        phase2 = draw(st.sampled_from((Phase.PRE, Phase.MID)))
    if not rest:
        return first
    second = draw(st.lists(st.sampled_from(rest), min_size=1, unique=True))
    return CrashScenario(first.events + tuple(CrashEvent(t2, rid, phase2) for rid in second))


def multiset(robots, key=lambda r: (r.position, r.color, r.crashed)) -> Counter:
    return Counter(key(r) for r in robots)
