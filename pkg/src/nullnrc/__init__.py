"""Nested relational calculus with nulls: parse, typecheck, evaluate,
normalize, translate between calculi, apply null handlers and emit SQL."""

from .ast import Mode
from .data import Database, Schema, load_database, load_database_file
from .evaluator import evaluate
from .rewrite import is_sql_normal_form, normalize
from .surface import parse_term, pretty
from .typecheck import typecheck

__all__ = [
    "Mode",
    "Database",
    "Schema",
    "load_database",
    "load_database_file",
    "evaluate",
    "is_sql_normal_form",
    "normalize",
    "parse_term",
    "pretty",
    "typecheck",
]
__version__ = "0.1.0"
