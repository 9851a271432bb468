"""Guarded-rule language over robot views.

A rule file looks like::

    colors: W R B
    R0:  E^phi [?] E^phi :: .
    R2b: E^phi [@R!] W! ?^(phi-1) :: B,->

Cell predicates: ``E`` empty, ``?`` anything, ``X`` contains X, ``X!`` exactly
{X}, ``@X`` observer is X (center only), ``{p,q}`` both, ``(p|q)`` either,
``!p`` negation. ``p^k`` repeats a cell predicate with ``k`` one of ``3``,
``phi``, ``(phi-1)``, ``(phi+2)``. ``!( ... )`` negates a whole sub-sequence.
Statements are ``color,move`` with move in ``->``, ``<-``, ``.`` and either part
optional.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Union

from .core import Color, View

AS_WRITTEN = "as-written"
MIRRORED = "mirrored"

FORWARD, BACKWARD, STAY = "forward", "backward", "stay"
_MOVE_TOKENS = {"->": FORWARD, "<-": BACKWARD, ".": STAY}
_MOVE_TEXT = {v: k for k, v in _MOVE_TOKENS.items()}

_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_LABEL_KEY = re.compile(r"^([A-Za-z_]*)(\d+)([A-Za-z_]*)$")


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message, self.line, self.column = message, line, column
        where = f"line {line}, col {column}: " if line else ""
        super().__init__(where + message)


class GuardLengthError(ValueError):
    """A guard cannot be laid out as 2*phi+1 cells for the given phi."""


class AmbiguousOrientation(RuntimeError):
    """A moving rule matched a view in both orientations."""


# -- cell predicates ---------------------------------------------------------


class CellPredicate:
    def holds(self, cell: frozenset, observer: Color) -> bool:
        raise NotImplementedError

    def colors(self) -> Iterable[Color]:
        return ()

    def has_self(self) -> bool:
        return False


@dataclass(frozen=True)
class Empty(CellPredicate):
    def holds(self, cell, observer):
        return not cell


@dataclass(frozen=True)
class Any(CellPredicate):
    def holds(self, cell, observer):
        return True


@dataclass(frozen=True)
class Contains(CellPredicate):
    color: Color

    def holds(self, cell, observer):
        return self.color in cell

    def colors(self):
        return (self.color,)


@dataclass(frozen=True)
class ExactlySingle(CellPredicate):
    color: Color

    def holds(self, cell, observer):
        return len(cell) == 1 and self.color in cell

    def colors(self):
        return (self.color,)


@dataclass(frozen=True)
class SelfIs(CellPredicate):
    color: Color

    def holds(self, cell, observer):
        return observer == self.color and self.color in cell

    def colors(self):
        return (self.color,)

    def has_self(self):
        return True


@dataclass(frozen=True)
class Not(CellPredicate):
    inner: CellPredicate

    def holds(self, cell, observer):
        return not self.inner.holds(cell, observer)

    def colors(self):
        return self.inner.colors()

    def has_self(self):
        return self.inner.has_self()


@dataclass(frozen=True)
class AnyOf(CellPredicate):
    options: tuple[CellPredicate, ...]

    def holds(self, cell, observer):
        return any(p.holds(cell, observer) for p in self.options)

    def colors(self):
        return [c for p in self.options for c in p.colors()]

    def has_self(self):
        return any(p.has_self() for p in self.options)


@dataclass(frozen=True)
class AllOf(CellPredicate):
    parts: tuple[CellPredicate, ...]

    def holds(self, cell, observer):
        return all(p.holds(cell, observer) for p in self.parts)

    def colors(self):
        return [c for p in self.parts for c in p.colors()]

    def has_self(self):
        return any(p.has_self() for p in self.parts)


def eval_cell(pred: CellPredicate, cell: Iterable[Color], observer: Color) -> bool:
    return pred.holds(frozenset(cell), observer)


# -- guard segments ----------------------------------------------------------


@dataclass(frozen=True)
class Count:
    """``phi_coeff * phi + offset``; phi_coeff is 0 or 1."""

    phi_coeff: int = 0
    offset: int = 1

    def resolve(self, phi: int) -> int:
        n = self.phi_coeff * phi + self.offset
        if n < 0:
            raise GuardLengthError(f"repetition {self} is negative for phi={phi}")
        return n

    def __str__(self):
        if not self.phi_coeff:
            return str(self.offset)
        if not self.offset:
            return "phi"
        return f"(phi{self.offset:+d})"


ONE = Count(0, 1)


@dataclass(frozen=True)
class Repeat:
    pred: CellPredicate
    count: Count = ONE


@dataclass(frozen=True)
class NegatedSequence:
    inner: tuple[Segment, ...]


@dataclass(frozen=True)
class Center:
    pred: CellPredicate


Segment = Union[Repeat, NegatedSequence, Center]


@dataclass(frozen=True)
class Statement:
    new_color: Color | None = None
    move: str = STAY


@dataclass(frozen=True)
class Rule:
    label: str
    guard: tuple[Segment, ...]
    statement: Statement

    @property
    def center_index(self) -> int:
        return next(i for i, s in enumerate(self.guard) if isinstance(s, Center))


@dataclass(frozen=True)
class GuardMatch:
    matched: bool
    orientations: frozenset[str]


@dataclass(frozen=True)
class Selection:
    """The enabled rule for a view and its action in physical terms.

    ``direction`` is +1 toward the right end of the view, -1 toward the left,
    0 for no move.
    """

    rule: Rule
    new_color: Color | None
    direction: int


def label_key(label: str):
    m = _LABEL_KEY.match(label)
    if m:
        return (m.group(1), int(m.group(2)), m.group(3))
    return (label, -1, "")


@dataclass(frozen=True)
class RuleSet:
    colors: tuple[Color, ...]
    rules: tuple[Rule, ...]
    _compiled: dict = field(default_factory=dict, compare=False, repr=False, hash=False)
    _selection: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        seen = set()
        for rule in self.rules:
            if rule.label in seen:
                raise RuleSyntaxError(f"duplicate label {rule.label}")
            seen.add(rule.label)
        keys = [label_key(r.label) for r in self.rules]
        if keys != sorted(keys):
            raise RuleSyntaxError("rules must be listed in label priority order")
        declared = set(self.colors)
        for rule in self.rules:
            used = set(_guard_colors(rule.guard))
            if rule.statement.new_color is not None:
                used.add(rule.statement.new_color)
            missing = used - declared
            if missing:
                raise RuleSyntaxError(f"{rule.label}: undeclared color(s) {', '.join(sorted(missing))}")

    def __getitem__(self, label: str) -> Rule:
        for r in self.rules:
            if r.label == label:
                return r
        raise KeyError(label)

    def labels(self) -> list[str]:
        return [r.label for r in self.rules]

    def check_phi(self, phi: int):
        """Raise GuardLengthError if some guard does not fit 2*phi+1 cells."""
        for rule in self.rules:
            _compiled_guard(self, rule, phi)

    @property
    def digest(self) -> str:
        return hashlib.sha256(format_rule_set(self).encode()).hexdigest()[:16]


def _guard_colors(segments):
    for seg in segments:
        if isinstance(seg, NegatedSequence):
            yield from _guard_colors(seg.inner)
        else:
            yield from seg.pred.colors()


# -- matching ----------------------------------------------------------------


def _layout(segments, phi):
    """Resolve segments to (start, length, item) triples relative to 0."""
    out, pos = [], 0
    for seg in segments:
        if isinstance(seg, Repeat):
            n = seg.count.resolve(phi)
            out.append((pos, n, seg.pred))
        elif isinstance(seg, NegatedSequence):
            inner = _layout(seg.inner, phi)
            n = sum(length for _, length, _ in inner)
            out.append((pos, n, tuple(inner)))
        else:
            n = 1
            out.append((pos, 1, seg.pred))
        pos += n
    return out


def _compiled_guard(rules: RuleSet | None, rule: Rule, phi: int):
    key = (rule.label, phi)
    if rules is not None and key in rules._compiled:
        return rules._compiled[key]
    c = rule.center_index
    left = _layout(rule.guard[:c], phi)
    right = _layout(rule.guard[c + 1 :], phi)
    left_len = sum(n for _, n, _ in left)
    right_len = sum(n for _, n, _ in right)
    if left_len != phi or right_len != phi:
        raise GuardLengthError(
            f"{rule.label}: guard lays out {left_len}+1+{right_len} cells, need {phi}+1+{phi}"
        )
    layout = [(s, n, item) for s, n, item in left]
    layout.append((phi, 1, rule.guard[c].pred))
    layout.extend((phi + 1 + s, n, item) for s, n, item in right)
    if rules is not None:
        rules._compiled[key] = layout
    return layout


def _match_layout(layout, cells, base, observer) -> bool:
    for start, length, item in layout:
        s = base + start
        if isinstance(item, tuple):
            if _match_layout(item, cells, s, observer):
                return False
        else:
            for i in range(s, s + length):
                if not item.holds(cells[i], observer):
                    return False
    return True


def eval_guard(rule: Rule, view: View, rules: RuleSet | None = None) -> GuardMatch:
    layout = _compiled_guard(rules, rule, view.phi)
    found = set()
    if _match_layout(layout, view.cells, 0, view.observer_color):
        found.add(AS_WRITTEN)
    if _match_layout(layout, view.cells[::-1], 0, view.observer_color):
        found.add(MIRRORED)
    return GuardMatch(bool(found), frozenset(found))


def select_rule(rules: RuleSet, view: View) -> Selection | None:
    """First enabled rule in priority order with its move made physical.

    Returns None when no rule is enabled (the robot idles). Raises
    AmbiguousOrientation if the chosen rule moves and matches both ways.
    """
    return select_for_cells(rules, view.cells, view.observer_color)


def select_for_cells(rules: RuleSet, cells: tuple, observer: Color) -> Selection | None:
    key = (cells, observer)
    cache = rules._selection
    try:
        hit = cache[key]
    except KeyError:
        try:
            hit = _select(rules, View(cells, observer))
        except AmbiguousOrientation as exc:
            hit = exc
        cache[key] = hit
    if isinstance(hit, AmbiguousOrientation):
        raise hit
    return hit


def _select(rules, view):
    for rule in rules.rules:
        m = eval_guard(rule, view, rules)
        if not m.matched:
            continue
        move = rule.statement.move
        if move == STAY:
            return Selection(rule, rule.statement.new_color, 0)
        if len(m.orientations) == 2:
            raise AmbiguousOrientation(f"{rule.label} matches view {view} in both orientations and moves")
        sign = 1 if AS_WRITTEN in m.orientations else -1
        if move == BACKWARD:
            sign = -sign
        return Selection(rule, rule.statement.new_color, sign)
    return None


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<sym>[\[\]{}()|,!@^?+\-]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int
    spaced: bool


class _Parser:
    def __init__(self, text: str, line: int, col0: int):
        self.line = line
        self.toks: list[_Tok] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, col0 + pos + 1)
            kind = m.lastgroup
            self.toks.append(_Tok(kind, m.group(kind), col0 + m.start(kind) + 1, m.start(kind) > pos))
            pos = m.end()
        self.i = 0
        self.end_col = col0 + len(text) + 1

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        col = tok.col if tok else self.end_col
        raise RuleSyntaxError(msg, self.line, col)

    def peek(self, k=0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text, k=0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind == "sym" and t.text == text

    def take(self) -> _Tok:
        t = self.peek()
        if t is None:
            self.error("unexpected end of guard")
        self.i += 1
        return t

    def expect(self, text):
        if not self.at(text):
            t = self.peek()
            self.error(f"expected {text!r}, found {t.text!r}" if t else f"expected {text!r} at end of guard")
        return self.take()

    def color(self) -> Color:
        t = self.take()
        if t.kind != "name" or t.text in ("E", "phi"):
            self.error(f"expected a color name, found {t.text!r}", t)
        return t.text

    # guard := segment+
    def guard(self) -> tuple[Segment, ...]:
        segs = []
        while self.peek() is not None:
            segs.append(self.segment(top=True))
        if not segs:
            self.error("empty guard")
        return tuple(segs)

    def segment(self, top: bool) -> Segment:
        t = self.peek()
        if self.at("["):
            if not top:
                self.error("center cell inside a negated sequence")
            self.take()
            pred = self.pred()
            self.expect("]")
            return Center(pred)
        if self.at("!") and self.at("(", 1):
            self.take()
            self.take()
            body = self.paren_body()
            if isinstance(body, CellPredicate):
                return Repeat(Not(body), self.count())
            if self.at("^"):
                self.error("a negated sequence cannot be repeated")
            return NegatedSequence(body)
        if self.at("("):
            self.take()
            body = self.paren_body()
            if not isinstance(body, CellPredicate):
                self.error("parentheses group alternatives with '|' (use '!( ... )' to negate a sequence)", t)
            return Repeat(body, self.count())
        return Repeat(self.pred(), self.count())

    def paren_body(self):
        """After '(' : either ``p | q ...`` or a segment sequence."""
        start = self.peek()
        first = self.segment(top=False)
        if self.at("|"):
            if not (isinstance(first, Repeat) and first.count == ONE):
                self.error("alternatives must be single-cell predicates", start)
            options = [first.pred]
            while self.at("|"):
                self.take()
                options.append(self.pred())
            self.expect(")")
            return AnyOf(tuple(options))
        segs = [first]
        while not self.at(")"):
            if self.peek() is None:
                self.error("unclosed '('")
            segs.append(self.segment(top=False))
        self.take()
        return tuple(segs)

    def count(self) -> Count:
        if not self.at("^"):
            return ONE
        self.take()
        parens = self.at("(")
        if parens:
            self.take()
        t = self.take()
        if t.kind == "int":
            c = Count(0, int(t.text))
        elif t.kind == "name" and t.text == "phi":
            c = Count(1, 0)
            if self.at("+") or self.at("-"):
                sign = 1 if self.take().text == "+" else -1
                n = self.take()
                if n.kind != "int":
                    self.error("expected an integer offset", n)
                c = Count(1, sign * int(n.text))
        else:
            self.error(f"bad repetition count {t.text!r}", t)
        if parens:
            self.expect(")")
        return c

    def pred(self) -> CellPredicate:
        t = self.peek()
        if t is None:
            self.error("expected a cell predicate")
        if self.at("!"):
            self.take()
            return Not(self.pred())
        if self.at("?"):
            self.take()
            return Any()
        if self.at("@"):
            self.take()
            c = self.color()
            if self.at("!") and not self.peek().spaced:
                self.take()
                return AllOf((SelfIs(c), ExactlySingle(c)))
            return SelfIs(c)
        if self.at("{"):
            self.take()
            parts = [self.pred()]
            while self.at(","):
                self.take()
                parts.append(self.pred())
            self.expect("}")
            return AllOf(tuple(parts))
        if self.at("("):
            self.take()
            options = [self.pred()]
            if not self.at("|"):
                self.error("expected '|' in alternatives")
            while self.at("|"):
                self.take()
                options.append(self.pred())
            self.expect(")")
            return AnyOf(tuple(options))
        if t.kind == "name" and t.text == "E":
            self.take()
            return Empty()
        if t.kind == "name":
            c = self.color()
            # postfix '!' must touch the name; `X !p` is X followed by a negation
            if self.at("!") and not self.peek().spaced:
                self.take()
                return ExactlySingle(c)
            return Contains(c)
        self.error(f"unexpected {t.text!r}")


def _parse_statement(text: str, line: int, col: int) -> Statement:
    body = text.strip()
    if not body:
        raise RuleSyntaxError("empty statement (use '.' for no action)", line, col)
    parts = [p.strip() for p in body.split(",")]
    if len(parts) > 2:
        raise RuleSyntaxError(f"bad statement {body!r}", line, col)
    color, move = None, STAY
    for k, part in enumerate(parts):
        if part in _MOVE_TOKENS and (k == len(parts) - 1):
            move = _MOVE_TOKENS[part]
        elif k == 0 and _NAME.fullmatch(part) and part not in ("E", "phi"):
            color = part
        else:
            raise RuleSyntaxError(f"bad statement {body!r}", line, col)
    return Statement(color, move)


def _check_rule(rule: Rule, line: int):
    centers = [s for s in rule.guard if isinstance(s, Center)]
    if not centers:
        raise RuleSyntaxError(f"{rule.label}: guard has no center cell", line)
    if len(centers) > 1:
        raise RuleSyntaxError(f"{rule.label}: guard has multiple center cells", line)

    def walk(segs):
        for s in segs:
            if isinstance(s, NegatedSequence):
                walk(s.inner)
            elif isinstance(s, Repeat) and s.pred.has_self():
                raise RuleSyntaxError(f"{rule.label}: '@' observer marker outside the center cell", line)

    walk(rule.guard)


def parse_rule(text: str, line: int = 1) -> Rule:
    if "::" not in text:
        raise RuleSyntaxError("missing '::' before the statement", line, len(text) + 1)
    head, stmt = text.split("::", 1)
    label, sep, guard_text = head.partition(":")
    label = label.strip()
    if not sep or not _NAME.fullmatch(label):
        raise RuleSyntaxError("expected '<label>:' at start of rule", line, 1)
    col0 = len(label) + 1 + (len(head.split(":", 1)[0]) - len(label))
    guard = _Parser(guard_text, line, col0).guard()
    rule = Rule(label, guard, _parse_statement(stmt, line, len(head) + 3))
    _check_rule(rule, line)
    return rule


def parse_rule_set(source: str) -> RuleSet:
    colors = None
    rules = []
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("colors:"):
            if colors is not None:
                raise RuleSyntaxError("duplicate colors header", lineno, 1)
            colors = tuple(stripped[len("colors:") :].split())
            for c in colors:
                if not _NAME.fullmatch(c) or c in ("E", "phi"):
                    raise RuleSyntaxError(f"invalid color name {c!r}", lineno, 1)
            if len(set(colors)) != len(colors):
                raise RuleSyntaxError("duplicate color in header", lineno, 1)
            continue
        if colors is None:
            raise RuleSyntaxError("'colors:' header must come first", lineno, 1)
        rules.append((lineno, parse_rule(line, lineno)))
    if colors is None:
        raise RuleSyntaxError("missing 'colors:' header")
    labels = [r.label for _, r in rules]
    for k, (lineno, rule) in enumerate(rules):
        if rule.label in labels[:k]:
            raise RuleSyntaxError(f"duplicate label {rule.label}", lineno, 1)
        if k and label_key(rule.label) < label_key(labels[k - 1]):
            raise RuleSyntaxError(f"{rule.label} listed after {labels[k - 1]}: labels out of priority order", lineno, 1)
    try:
        return RuleSet(colors, tuple(r for _, r in rules))
    except RuleSyntaxError as exc:
        lineno = next((ln for ln, r in rules if exc.message.startswith(r.label + ":")), 0)
        raise RuleSyntaxError(exc.message, lineno) from None


# -- printing ----------------------------------------------------------------


def format_pred(p: CellPredicate) -> str:
    if isinstance(p, Empty):
        return "E"
    if isinstance(p, Any):
        return "?"
    if isinstance(p, Contains):
        return p.color
    if isinstance(p, ExactlySingle):
        return p.color + "!"
    if isinstance(p, SelfIs):
        return "@" + p.color
    if isinstance(p, Not):
        return "!" + format_pred(p.inner)
    if isinstance(p, AllOf):
        a = p.parts
        if len(a) == 2 and isinstance(a[0], SelfIs) and a[1] == ExactlySingle(a[0].color):
            return f"@{a[0].color}!"
        return "{" + ",".join(format_pred(x) for x in a) + "}"
    if isinstance(p, AnyOf):
        return "(" + "|".join(format_pred(x) for x in p.options) + ")"
    raise TypeError(p)


def format_segment(s: Segment) -> str:
    if isinstance(s, Center):
        return f"[{format_pred(s.pred)}]"
    if isinstance(s, NegatedSequence):
        return "!(" + " ".join(format_segment(x) for x in s.inner) + ")"
    text = format_pred(s.pred)
    return text if s.count == ONE else f"{text}^{s.count}"


def format_statement(st: Statement) -> str:
    if st.new_color and st.move != STAY:
        return f"{st.new_color},{_MOVE_TEXT[st.move]}"
    return st.new_color or _MOVE_TEXT[st.move]


def format_rule(rule: Rule) -> str:
    guard = " ".join(format_segment(s) for s in rule.guard)
    return f"{rule.label}: {guard} :: {format_statement(rule.statement)}"


def format_rule_set(rules: RuleSet) -> str:
    lines = ["colors: " + " ".join(rules.colors)]
    lines.extend(format_rule(r) for r in rules.rules)
    return "\n".join(lines) + "\n"


# -- builtins ----------------------------------------------------------------

BUILTINS = ("alg1", "alg2")


def builtin_source(name: str) -> str:
    return resources.files("suig").joinpath("rules", f"{name}.rules").read_text(encoding="utf-8")


def load_rules(name_or_path: str) -> RuleSet:
    """Resolve a builtin name (``alg1``/``alg2``) or read a rule file."""
    if name_or_path in BUILTINS:
        return parse_rule_set(builtin_source(name_or_path))
    return parse_rule_set(Path(name_or_path).read_text(encoding="utf-8"))
