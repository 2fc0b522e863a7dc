"""Pretty-printer producing re-parseable IR source."""
from __future__ import annotations

from .ast import Assign, Assume, Call, Const, Op, Program, Skip, Var, FUNC_ARITY

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}


def format_expr(e, prec: int = 0) -> str:
    if isinstance(e, Const):
        s = str(e.value)
        return f"({s})" if e.value < 0 and prec > 0 else s
    if isinstance(e, Var):
        return e.name
    if e.op in FUNC_ARITY:
        return f"{e.op}({', '.join(format_expr(a) for a in e.args)})"
    if e.op == "!":
        return "!" + format_expr(e.args[0], 7)
    if e.op == "neg":
        return "-" + format_expr(e.args[0], 7)
    p = _PREC[e.op]
    # left-associative: the right operand needs strictly higher precedence
    s = f"{format_expr(e.args[0], p)} {e.op} {format_expr(e.args[1], p + 1)}"
    return f"({s})" if p < prec else s


def format_stmt(stmt) -> str:
    if isinstance(stmt, Skip):
        return "skip"
    if isinstance(stmt, Assume):
        return f"assume {format_expr(stmt.expr)}"
    if isinstance(stmt, Assign):
        return f"{stmt.target} := {format_expr(stmt.expr)}"
    args = ", ".join(format_expr(a) for a in stmt.args)
    if stmt.rets:
        return f"call {', '.join(stmt.rets)} := {stmt.callee}({args})"
    return f"call {stmt.callee}({args})"


def _fmt_domain(vals) -> str:
    return "{" + ", ".join(str(v) for v in vals) + "}"


def print_program(p: Program) -> str:
    lines = []
    if p.width != 8:
        lines.append(f"width {p.width};")
    lines.append(f"main {p.main};")
    for var, vals in p.domains.items():
        lines.append(f"domain {var} in {_fmt_domain(vals)};")
    for (proc, var), vals in p.proc_domains.items():
        lines.append(f"domain {proc}.{var} in {_fmt_domain(vals)};")
    for g, init in p.globals.items():
        lines.append(f"global {g} := {init};")
    for proc in p.procs.values():
        lines.append("")
        head = f"proc {proc.name}({', '.join(proc.ins)})"
        if proc.outs:
            head += f" : ({', '.join(proc.outs)})"
        lines.append(head + " {")
        order = [proc.entry] + [n for n in proc.nodes if n not in (proc.entry, proc.exit)]
        if proc.exit != proc.entry:
            order.append(proc.exit)
        for idx, label in enumerate(order):
            line = f"  {label}: {format_stmt(proc.nodes[label])};"
            if label != proc.exit:
                succ = proc.succ[label]
                fallthrough = idx + 1 < len(order) and succ == (order[idx + 1],)
                if not fallthrough:
                    line += f" goto {', '.join(succ)};" if succ else " goto;"
            lines.append(line)
        lines.append("}")
    return "\n".join(lines) + "\n"
