"""Line-graph configurations, robot views and configuration metrics."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Mapping

Color = str

POSITION_LIMIT = 2**63


class ConfigError(ValueError):
    """Raised for malformed or invalid configurations."""


@dataclass(frozen=True, slots=True)
class Robot:
    id: int
    position: int
    color: Color
    crashed: bool = False

    def __post_init__(self):
        if self.id < 0:
            raise ConfigError(f"robot id must be non-negative, got {self.id}")
        if not -POSITION_LIMIT <= self.position < POSITION_LIMIT:
            raise OverflowError(f"position {self.position} outside signed 64-bit range")


@dataclass(frozen=True)
class Metrics:
    m_init: int
    o_init: int
    h_init: int

    def __str__(self):
        return f"m_init={self.m_init} o_init={self.o_init} h_init={self.h_init}"


@dataclass(frozen=True)
class View:
    """The 2*phi+1 color sets around an observer, left to right."""

    cells: tuple[frozenset[Color], ...]
    observer_color: Color

    def __post_init__(self):
        if len(self.cells) % 2 != 1:
            raise ValueError("a view has an odd number of cells")
        if self.observer_color not in self.cells[len(self.cells) // 2]:
            raise ValueError("center cell must contain the observer's color")

    @property
    def phi(self) -> int:
        return len(self.cells) // 2

    @property
    def center(self) -> frozenset[Color]:
        return self.cells[self.phi]

    def mirrored(self) -> View:
        return View(self.cells[::-1], self.observer_color)

    def __str__(self):
        parts = []
        for i, cell in enumerate(self.cells):
            text = "{" + ",".join(sorted(cell)) + "}" if cell else "E"
            parts.append(f"[{text}]" if i == self.phi else text)
        return " ".join(parts)


@dataclass(frozen=True)
class Configuration:
    """Robots on the infinite line together with the visibility range phi.

    Robots are kept individually, sorted by id, because a crash may hit only
    part of a group of same-colored robots sharing a node.
    """

    robots: tuple[Robot, ...]
    phi: int

    def __post_init__(self):
        robots = tuple(sorted(self.robots, key=lambda r: r.id))
        object.__setattr__(self, "robots", robots)
        if not robots:
            raise ConfigError("configuration has no robots")
        if self.phi < 1:
            raise ConfigError(f"phi must be positive, got {self.phi}")
        ids = [r.id for r in robots]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate robot ids")

    @classmethod
    def from_nodes(
        cls,
        nodes: Mapping[int, Mapping[Color, int] | Iterable[Color]],
        phi: int,
        crashed: Iterable[int] = (),
    ) -> Configuration:
        """Build a configuration from ``{position: colors}``.

        Colors may be given as an iterable (one entry per robot) or as a
        ``{color: count}`` mapping. Ids are assigned in position order.
        """
        crashed = set(crashed)
        robots = []
        for pos in sorted(nodes):
            spec = nodes[pos]
            colors = (
                [c for c, k in spec.items() for _ in range(k)]
                if isinstance(spec, Mapping)
                else list(spec)
            )
            for color in colors:
                rid = len(robots)
                robots.append(Robot(rid, pos, color, rid in crashed))
        return cls(tuple(robots), phi)

    @cached_property
    def occupancy(self) -> dict[int, frozenset[Color]]:
        """Position -> set of colors present (no multiplicities)."""
        acc: dict[int, set[Color]] = {}
        for r in self.robots:
            acc.setdefault(r.position, set()).add(r.color)
        return {p: frozenset(cs) for p, cs in sorted(acc.items())}

    @cached_property
    def occupied(self) -> tuple[int, ...]:
        return tuple(self.occupancy)

    @cached_property
    def _by_id(self) -> dict[int, Robot]:
        return {r.id: r for r in self.robots}

    def robot(self, rid: int) -> Robot:
        try:
            return self._by_id[rid]
        except KeyError:
            raise KeyError(f"unknown robot id {rid}") from None

    def counts(self) -> Counter:
        """Multiset of (position, color, crashed) triples."""
        return Counter((r.position, r.color, r.crashed) for r in self.robots)

    def shifted(self, d: int) -> Configuration:
        return Configuration(tuple(replace(r, position=r.position + d) for r in self.robots), self.phi)

    def mirrored(self) -> Configuration:
        """Reflect about node 0."""
        return Configuration(tuple(replace(r, position=-r.position) for r in self.robots), self.phi)

    def __len__(self):
        return len(self.robots)


def compute_view(config: Configuration, robot: int) -> View:
    r = config.robot(robot)
    occ = config.occupancy
    empty = frozenset()
    cells = tuple(occ.get(p, empty) for p in range(r.position - config.phi, r.position + config.phi + 1))
    return View(cells, r.color)


def metrics(config: Configuration) -> Metrics:
    occupied = config.occupied
    gaps = [b - a for a, b in zip(occupied, occupied[1:])]
    return Metrics(
        m_init=occupied[-1] - occupied[0] + 1,
        o_init=len(occupied),
        h_init=max(gaps, default=0),
    )


def edge_symmetry_axis(config: Configuration) -> int | None:
    """Twice the half-integer reflection axis, or None if not edge-symmetric.

    Color sets are compared, robot counts are not.
    """
    occ = config.occupancy
    s = config.occupied[0] + config.occupied[-1]
    if s % 2 == 0:
        return None
    for p, colors in occ.items():
        if occ.get(s - p) != colors:
            return None
    return s


def is_edge_symmetric(config: Configuration) -> bool:
    return edge_symmetry_axis(config) is not None


def is_gathered(config: Configuration) -> bool:
    return len(config.occupied) == 1


def validate_initial(config: Configuration) -> Metrics:
    """Check the model's assumptions for a starting configuration."""
    if len(config) < 2:
        raise ConfigError("at least two robots are required")
    m = metrics(config)
    if config.phi < m.h_init:
        raise ConfigError(f"phi={config.phi} is below h_init={m.h_init}; visibility graph is disconnected")
    return m


# -- text format -------------------------------------------------------------

_NODE_ITEM = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)(?:\*(\d+))?$")


def parse_config(text: str, validate: bool = True) -> Configuration:
    phi = None
    nodes: dict[int, dict[Color, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            if words[0] == "phi" and len(words) == 2:
                if phi is not None:
                    raise ConfigError("duplicate phi header")
                phi = int(words[1])
            elif words[0] == "node" and len(words) >= 3:
                pos = int(words[1])
                if pos in nodes:
                    raise ConfigError(f"node {pos} listed twice")
                counts: dict[Color, int] = {}
                for item in words[2:]:
                    m = _NODE_ITEM.match(item)
                    if not m:
                        raise ConfigError(f"bad robot group {item!r}")
                    k = int(m.group(2) or 1)
                    if k < 1:
                        raise ConfigError(f"count must be positive in {item!r}")
                    counts[m.group(1)] = counts.get(m.group(1), 0) + k
                nodes[pos] = counts
            else:
                raise ConfigError(f"unrecognised line {line!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    if phi is None:
        raise ConfigError("missing 'phi' header")
    if not nodes:
        raise ConfigError("no nodes")
    config = Configuration.from_nodes(nodes, phi)
    if validate:
        validate_initial(config)
    return config


def format_config(config: Configuration) -> str:
    lines = [f"phi {config.phi}"]
    per_node: dict[int, Counter] = {}
    for r in config.robots:
        per_node.setdefault(r.position, Counter())[r.color] += 1
    for pos in sorted(per_node):
        groups = " ".join(f"{c}*{k}" for c, k in sorted(per_node[pos].items()))
        lines.append(f"node {pos} {groups}")
    return "\n".join(lines) + "\n"


def load_config(path, validate: bool = True) -> Configuration:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), validate=validate)
