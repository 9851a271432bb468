import pytest

from suig.core import (
    ConfigError,
    Configuration,
    Robot,
    compute_view,
    edge_symmetry_axis,
    format_config,
    is_edge_symmetric,
    is_gathered,
    metrics,
    parse_config,
    validate_initial,
)


def cfg(nodes, phi=1):
    return Configuration.from_nodes(nodes, phi)


def test_view_at_left_end():
    c = cfg({0: "W", 1: "R"})
    assert compute_view(c, 0).cells == (frozenset(), frozenset("W"), frozenset("R"))


def test_view_with_gap():
    c = cfg({0: "W", 1: "R", 3: "B"}, phi=2)
    view = compute_view(c, 1)
    assert view.cells == (frozenset(), frozenset("W"), frozenset("R"), frozenset(), frozenset("B"))
    assert view.observer_color == "R"


def test_view_hides_multiplicity():
    c = cfg({0: ["W", "W"]})
    view = compute_view(c, 1)
    assert view.center == frozenset({"W"})
    assert view.cells == (frozenset(), frozenset("W"), frozenset())


@pytest.mark.parametrize(
    "occupied, expected",
    [((0, 2, 5), (6, 3, 3)), ((4,), (1, 1, 0)), ((0, 1, 2), (3, 3, 1))],
)
def test_metrics(occupied, expected):
    m = metrics(cfg({p: "W" for p in occupied}, phi=3))
    assert (m.m_init, m.o_init, m.h_init) == expected


def test_metrics_text():
    assert str(metrics(cfg({0: "W", 2: "W", 5: "W"}, 3))) == "m_init=6 o_init=3 h_init=3"


def test_edge_symmetry():
    assert is_edge_symmetric(cfg({0: "W", 1: "W"}))
    assert edge_symmetry_axis(cfg({0: "W", 1: "W"})) == 1
    assert not is_edge_symmetric(cfg({0: "W", 2: "W"}, 2))
    assert not is_edge_symmetric(cfg({0: "W", 1: "R"}))
    # counts are invisible, so only color sets matter
    assert is_edge_symmetric(cfg({0: ["W", "W"], 1: "W"}))


def test_gathered():
    assert is_gathered(cfg({3: ["W", "W", "R"]}))
    assert not is_gathered(cfg({0: "W", 1: "W"}))
    assert is_gathered(cfg({7: "W"}))


def test_validation():
    with pytest.raises(ConfigError):
        validate_initial(cfg({0: "W"}))
    with pytest.raises(ConfigError, match="h_init"):
        validate_initial(cfg({0: "W", 3: "W"}, phi=2))
    assert validate_initial(cfg({0: "W", 3: "W"}, phi=3)).h_init == 3


def test_bad_constructions():
    with pytest.raises(ConfigError):
        Configuration((), 1)
    with pytest.raises(ConfigError):
        Configuration((Robot(0, 0, "W"), Robot(0, 1, "W")), 1)
    with pytest.raises(ConfigError):
        Configuration((Robot(0, 0, "W"),), 0)
    with pytest.raises(OverflowError):
        Robot(0, 2**63, "W")
    with pytest.raises(KeyError):
        cfg({0: "W"}).robot(5)


def test_mirror_and_shift():
    c = cfg({0: "W", 2: "R"}, 2)
    assert c.mirrored().occupancy == {-2: frozenset("R"), 0: frozenset("W")}
    assert c.shifted(5).occupied == (5, 7)


def test_config_text_round_trip():
    text = "phi 3\nnode 0 W*2\nnode 2 R\nnode 5 W*1 W\n"
    c = parse_config(text)
    assert c.counts()[(5, "W", False)] == 2
    assert parse_config(format_config(c)).counts() == c.counts()


@pytest.mark.parametrize(
    "text",
    ["node 0 W\n", "phi 1\n", "phi 1\nnode 0 W\nnode 0 W\n", "phi 1\nnode 0 W*0\n", "phi x\nnode 0 W\n", "phi 1\nbogus\n"],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)
