"""Trace semantics and brute-force oracles."""
from .interp import (
    BLOCKED,
    DEFAULT_FUEL,
    EXHAUSTED,
    NORMAL,
    Blocked,
    Frame,
    MapVal,
    State,
    Terminal,
    Trace,
    eval_expr,
    format_trace,
    input_stores,
    project,
    project_values,
    run,
    run_proc,
    step,
    union,
    wrap,
)
from .oracles import (
    FAILS,
    HOLDS,
    IMPACTED,
    NOT_IMPACTED,
    UNKNOWN,
    formal_domains,
    main_domains,
    oracle_impacted,
    oracle_preequiv,
    oracle_summaryequiv,
)
