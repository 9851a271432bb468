"""Simulation and adversarial checking of crash-tolerant gathering by myopic
luminous robots on an infinite line."""

from .adversary import (
    SweepSpec,
    ssync_adversary_search,
    sweep_verify,
    symmetry_preservation_check,
)
from .core import (
    Configuration,
    ConfigError,
    Metrics,
    Robot,
    View,
    compute_view,
    edge_symmetry_axis,
    is_edge_symmetric,
    is_gathered,
    metrics,
    parse_config,
    validate_initial,
)
from .engine import FSYNC, NO_CRASH, CrashEvent, CrashScenario, Phase, Ssync, replay_check, run, step
from .ruledsl import (
    AmbiguousOrientation,
    RuleSet,
    RuleSyntaxError,
    eval_cell,
    eval_guard,
    load_rules,
    parse_rule_set,
    select_rule,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousOrientation",
    "ConfigError",
    "Configuration",
    "CrashEvent",
    "CrashScenario",
    "FSYNC",
    "Metrics",
    "NO_CRASH",
    "Phase",
    "Robot",
    "RuleSet",
    "RuleSyntaxError",
    "Ssync",
    "SweepSpec",
    "View",
    "compute_view",
    "edge_symmetry_axis",
    "eval_cell",
    "eval_guard",
    "is_edge_symmetric",
    "is_gathered",
    "load_rules",
    "metrics",
    "parse_config",
    "parse_rule_set",
    "replay_check",
    "run",
    "select_rule",
    "ssync_adversary_search",
    "step",
    "sweep_verify",
    "symmetry_preservation_check",
    "validate_initial",
]
