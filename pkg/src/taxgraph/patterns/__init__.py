from .detectors import (
    DEFAULT_HAVENS,
    detect_double_irish,
    detect_duck_rabbit,
    double_irish_pattern,
    double_irish_text,
    duck_rabbit_text,
)
from .dsl import (
    Constraint,
    EdgeClause,
    PatternAST,
    PatternError,
    PatternSemanticError,
    PatternSyntaxError,
    format_pattern,
    parse_pattern,
)
from .matcher import DEFAULT_MAX_PATH_LEN, Binding, match_pattern

__all__ = [
    "Binding",
    "Constraint",
    "DEFAULT_HAVENS",
    "DEFAULT_MAX_PATH_LEN",
    "EdgeClause",
    "PatternAST",
    "PatternError",
    "PatternSemanticError",
    "PatternSyntaxError",
    "detect_double_irish",
    "detect_duck_rabbit",
    "double_irish_pattern",
    "double_irish_text",
    "duck_rabbit_text",
    "format_pattern",
    "match_pattern",
    "parse_pattern",
]
