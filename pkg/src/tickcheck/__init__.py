"""Explicit-time model checking: timed guarded-command models lowered to
untimed ones with a clock process, explored and checked for safety and
accepting cycles."""

from .cycles import PropertyTemplate, build_property, check_liveness, map_accepting, oracle_cycle, owcty
from .engine import StateGraph, Verdict, check_safety, explore, successors
from .frontend import ParseError, parse, pretty, pretty_lowered
from .lowering import LoweringConfig, lower, lower_eedm, lower_ledm
from .model import Model, State, TimedModel, evaluate, validate

__version__ = "0.1.0"

__all__ = [
    "LoweringConfig",
    "Model",
    "ParseError",
    "PropertyTemplate",
    "State",
    "StateGraph",
    "TimedModel",
    "Verdict",
    "build_property",
    "check_liveness",
    "check_safety",
    "evaluate",
    "explore",
    "lower",
    "lower_eedm",
    "lower_ledm",
    "map_accepting",
    "oracle_cycle",
    "owcty",
    "parse",
    "pretty",
    "pretty_lowered",
    "successors",
    "validate",
]
