"""Agent-based model execution, trace pattern matching and multi-level validation."""

from .engine import MacroVariableDef, RunError, Trace, aggregate, macro_series, run, state_at
from .enumeration import EnumerationBoundError, enumerate_systems
from .ensemble import SamplingPlan, exact_frequencies, frequency, sample
from .lexing import Diagnostic, ParseError
from .levels import check_inter_level, measure, parse_inter_level, partition, sweep
from .matcher import MatchResult, match_event, match_state, match_trace
from .model import ModelSpec, format_model, validate_model
from .modelparse import parse_model
from .patterns import format_pattern, parse_pattern, parse_pattern_file, project, well_formed
from .values import DomainError, ValueDomain

__version__ = "0.1.0"

__all__ = [
    "Diagnostic", "DomainError", "EnumerationBoundError", "MacroVariableDef", "MatchResult", "ModelSpec",
    "ParseError", "RunError", "SamplingPlan", "Trace", "ValueDomain", "aggregate", "check_inter_level",
    "enumerate_systems", "exact_frequencies", "format_model", "format_pattern", "frequency", "macro_series",
    "match_event", "match_state", "match_trace", "measure", "parse_inter_level", "parse_model", "parse_pattern",
    "parse_pattern_file", "partition", "project", "run", "sample", "state_at", "sweep", "validate_model",
    "well_formed",
]
