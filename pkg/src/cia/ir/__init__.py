"""The analysis IR: syntax, parsing, printing, validation and lowering."""
from .ast import (
    Assign,
    Assume,
    Call,
    Const,
    Op,
    Procedure,
    Program,
    Skip,
    Var,
    expr_vars,
    make_procedure,
    read_set,
    write_set,
)
from .lower import LoweringError, lower
from .parser import IRError, ParseError, parse_file, parse_program
from .printer import format_expr, format_stmt, print_program
from .validate import validate

__all__ = [
    "Assign", "Assume", "Call", "Const", "Op", "Procedure", "Program", "Skip", "Var",
    "expr_vars", "make_procedure", "read_set", "write_set", "LoweringError", "lower",
    "IRError", "ParseError", "parse_file", "parse_program", "format_expr", "format_stmt",
    "print_program", "validate",
]
