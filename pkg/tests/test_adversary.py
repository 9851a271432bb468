import random

import pytest

from suig.adversary import (
    Bound,
    CrashBounds,
    SearchBudgetExceeded,
    SweepSpec,
    enumerate_crash_scenarios,
    generate_configs,
    occupied_patterns,
    parse_sweep_spec,
    sample_two_event_scenarios,
    ssync_adversary_search,
    sweep_verify,
    symmetry_preservation_check,
    terminal_case,
    write_failure_bundles,
)
from suig.core import Configuration, metrics, parse_config
from suig.engine import FSYNC, NO_CRASH, Phase, TimedOut, parse_scenario, replay_check, run
from suig.ruledsl import load_rules, parse_rule_set

ALG1, ALG2 = load_rules("alg1"), load_rules("alg2")
IDLE = parse_rule_set("colors: W\nR0: ?^phi [?] ?^phi :: .\n")


def cfg(nodes, phi=1):
    return Configuration.from_nodes(nodes, phi)


def test_enumeration_count_two_per_node():
    c = cfg({0: ["W", "W"], 1: ["W", "W"], 2: ["W", "W"]})
    scenarios = list(enumerate_crash_scenarios(c, IDLE, CrashBounds(window=5)))
    assert len(scenarios) == 3 * 5 * 2 * 2 + 1
    assert scenarios[0] == NO_CRASH
    assert len(set(scenarios)) == len(scenarios)


def test_enumeration_window_zero():
    c = cfg({0: ["W", "W"], 1: ["W", "W"], 2: ["W", "W"]})
    assert list(enumerate_crash_scenarios(c, IDLE, CrashBounds(window=0))) == [NO_CRASH]


def test_enumeration_one_per_node():
    c = cfg({0: "W", 1: "W", 2: "W"})
    assert len(list(enumerate_crash_scenarios(c, IDLE, CrashBounds(window=5)))) == 3 * 5 * 2 + 1


def test_enumeration_counts_color_groups_separately():
    c = cfg({0: ["W", "R"]})
    found = list(enumerate_crash_scenarios(c, IDLE, CrashBounds(window=1, phases=(Phase.PRE,))))
    # {W}, {R}, {W,R}
    assert len(found) == 4


def test_window_follows_crash_free_run():
    c = cfg({0: "W", 2: "W", 4: "W"}, 2)
    found = list(enumerate_crash_scenarios(c, ALG1, CrashBounds()))
    rounds = {e.round for s in found for e in s.events}
    assert rounds == set(range(2 + 3 + 1))


def test_two_event_scenarios_share_a_node():
    c = cfg({0: ["W", "W"], 1: ["W", "W"], 2: ["W", "W"]})
    found = sample_two_event_scenarios(c, ALG2, 50, random.Random(1))
    assert found and len(set(found)) == len(found)
    for s in found:
        assert len(s.instants()) == 2
        run(c, ALG2, crashes=s)  # no crash-node violation


def test_occupied_patterns():
    assert occupied_patterns(3) == [(0, 2), (0, 1, 2)]
    assert occupied_patterns(5, "odd") == [(0, 1, 4), (0, 2, 4), (0, 3, 4), (0, 1, 2, 3, 4)]
    assert len(occupied_patterns(15, limit=40, rng=random.Random(0))) == 40


def test_generated_configs_respect_spec():
    spec = SweepSpec(parity_m="odd", parity_o="odd", m_max=7, robots_per_node=2, phi_extra=(0, 1))
    configs = generate_configs(spec)
    assert configs
    for c in configs:
        m = metrics(c)
        assert m.m_init % 2 == 1 and m.o_init % 2 == 1
        assert c.phi >= m.h_init and len(c) >= 2


def test_alg1_sweep_small():
    spec = SweepSpec(parity_m="odd", m_max=5, robots_per_node=2, crash_events_max=1, bound=Bound(2, 0))
    report = sweep_verify(ALG1, spec)
    assert report.passed and report.verdict == "PASS"
    assert report.scenarios_tested > report.configs_tested
    assert "verdict: PASS" in report.summary()


def test_parallel_sweep_matches_serial():
    spec = SweepSpec(parity_o="odd", m_max=5, crash_events_max=1)
    a = sweep_verify(ALG2, spec, jobs=1)
    b = sweep_verify(ALG2, spec, jobs=2)
    assert a.render() == b.render()


def test_symmetric_pair_is_a_recorded_failure(tmp_path):
    c = cfg({0: "W", 1: "W"})
    report = sweep_verify(ALG1, SweepSpec(bound=Bound(2, 0)), configs=[c])
    assert not report.passed
    f = report.failures[0]
    assert isinstance(f.outcome, TimedOut)
    (bundle,) = write_failure_bundles(report, tmp_path)
    config = parse_config((bundle / "config.cfg").read_text())
    scenario = parse_scenario((bundle / "scenario.crash").read_text())
    assert replay_check((bundle / "trace.tr").read_text(), config, ALG1, FSYNC, scenario)


def test_spec_file():
    spec = parse_sweep_spec("parity_m = odd\nm_max = 9\nphases = pre,mid\nbound = 4*m+0  # comment\nphi_extra = 0,1\n")
    assert spec.parity_m == "odd" and spec.m_max == 9
    assert spec.phases == (Phase.PRE, Phase.MID)
    assert spec.bound(5) == 20 and str(spec.bound) == "4*m+0"
    assert spec.phi_extra == (0, 1)
    with pytest.raises(ValueError):
        parse_sweep_spec("colour = red\n")
    with pytest.raises(ValueError):
        parse_sweep_spec("parity_m = sometimes\n")


def test_terminal_cases():
    assert terminal_case(run(cfg({0: "W", 1: "W", 2: "W"}), ALG2)) == "case4"
    assert terminal_case(run(cfg({0: "W", 1: "W", 2: "W", 3: "W", 4: "W"}), ALG2)) == "case4"
    assert terminal_case(run(cfg({0: "W", 2: "W", 4: "W"}, 2), ALG2)) is not None


def test_symmetry_check():
    v = symmetry_preservation_check(ALG1, cfg({0: "W", 1: "W"}), 100)
    assert v.passed and v.rounds == 100 and v.axis == 0.5
    # the two robots swap every round
    assert v.trace.records[2].robots == v.trace.records[0].robots
    assert v.trace.records[1].robots != v.trace.records[0].robots
    assert symmetry_preservation_check(ALG2, cfg({0: "W", 1: "W"}), 100).passed
    with pytest.raises(ValueError):
        symmetry_preservation_check(ALG1, cfg({0: ["W", "W"]}), 10)
    with pytest.raises(ValueError):
        symmetry_preservation_check(ALG1, cfg({0: "W", 2: "W"}, 2), 10)


def test_ssync_search():
    c = cfg({0: "W", 1: "W", 2: "W"})
    sched = ssync_adversary_search(ALG2, c, 50)
    assert sched is not None and len(sched.activations) == 50
    assert isinstance(run(c, ALG2, sched, NO_CRASH, 50).outcome, TimedOut)
    assert ssync_adversary_search(ALG2, cfg({0: ["W", "W"]}), 10) is None
    odd = cfg({0: "W", 2: "W", 4: "W"}, 2)
    assert ssync_adversary_search(ALG1, odd, 20, full_activation_only=True) is None


def test_ssync_budget():
    with pytest.raises(SearchBudgetExceeded):
        ssync_adversary_search(ALG1, cfg({0: "W", 2: "W", 4: "W", 6: "W", 8: "W"}, 2), 30, budget=3)


def test_alg2_crash_sweep_unit_visibility():
    """With phi = 1 every single-event and sampled two-event crash gathers in time."""
    spec = SweepSpec(
        parity_o="odd", m_max=7, robots_per_node=2, crash_events_max=2, two_event_samples=10, bound=Bound(4, 0)
    )
    configs = [c for c in generate_configs(spec) if c.phi == 1]
    report = sweep_verify(ALG2, spec, configs=configs)
    assert report.passed, report.failures[0].trace if report.failures else ""
