"""Well-formedness checks; violations are returned as data, not raised."""
from __future__ import annotations

from .ast import BOOL_OPS, Assign, Assume, Call, Const, Op, Program, Skip, Var, expr_vars, write_set


def _is_boolean(e) -> bool:
    if isinstance(e, (Var, Const)):
        return True
    return isinstance(e, Op) and e.op in BOOL_OPS


_NEGATED = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}


def _complementary(a, b) -> bool:
    """``assume e`` against ``assume !e``, or a comparison against its negation."""
    if not (isinstance(a, Assume) and isinstance(b, Assume)):
        return False
    x, y = a.expr, b.expr
    for pos, neg in ((x, y), (y, x)):
        if neg == Op("!", (pos,)):
            return True
    if isinstance(x, Op) and isinstance(y, Op) and x.args == y.args:
        return _NEGATED.get(x.op) == y.op
    return False


def is_acyclic(proc) -> bool:
    state: dict[str, int] = {}
    for root in proc.nodes:
        if root in state:
            continue
        stack = [(root, iter(proc.succ[root]))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            for s in it:
                if state.get(s) == 1:
                    return False
                if s not in state:
                    state[s] = 1
                    stack.append((s, iter(proc.succ[s])))
                    break
            else:
                state[node] = 2
                stack.pop()
    return True


def validate(p: Program, lowered: bool = False) -> list[str]:
    """Return a list of violation messages; empty iff ``p`` is well formed.

    With ``lowered=True`` also require acyclic CFGs and SSA form.
    """
    out: list[str] = []
    if p.main not in p.procs:
        out.append(f"main procedure {p.main!r} missing")
    for name, proc in p.procs.items():
        where = f"procedure {name}"
        if proc.entry not in proc.nodes:
            out.append(f"{where}: entry {proc.entry!r} is not a node")
        if proc.exit not in proc.nodes:
            out.append(f"{where}: exit {proc.exit!r} is not a node")
            continue
        if not isinstance(proc.nodes[proc.exit], Skip):
            out.append(f"{where}: exit node {proc.exit} must hold skip")
        if proc.succ.get(proc.exit):
            out.append(f"{where}: exit node {proc.exit} must have no successors")
        if set(proc.ins) & set(proc.outs):
            out.append(f"{where}: input and output formals overlap")
        declared = set(proc.vars)
        missing = (set(proc.ins) | set(proc.outs)) - declared
        if missing:
            out.append(f"{where}: formals {sorted(missing)} not in variable list")
        for label, stmt in proc.nodes.items():
            at = f"{where}, node {label}"
            succ = proc.succ.get(label, ())
            for s in succ:
                if s not in proc.nodes:
                    out.append(f"{at}: successor {s!r} does not exist")
            if len(succ) > 2:
                out.append(f"{at}: has {len(succ)} successors, expected <=2 successors")
            elif len(succ) == 2:
                a, b = (proc.nodes.get(s) for s in succ)
                if not _complementary(a, b):
                    out.append(f"{at}: branching successors must assume complementary conditions")
            undeclared = set()
            if isinstance(stmt, (Assign, Assume)):
                undeclared |= expr_vars(stmt.expr) - declared
            if isinstance(stmt, Call):
                for a in stmt.args:
                    undeclared |= expr_vars(a) - declared
            undeclared |= write_set(stmt) - declared
            if undeclared:
                out.append(f"{at}: undeclared variables {sorted(undeclared)}")
            if isinstance(stmt, Assume) and not _is_boolean(stmt.expr):
                out.append(f"{at}: assume expression is not boolean")
            if isinstance(stmt, Call):
                callee = p.procs.get(stmt.callee)
                if callee is None:
                    out.append(f"{at}: unresolved callee {stmt.callee!r}")
                    continue
                if stmt.callee == p.main:
                    out.append(f"{at}: calls into main are not allowed")
                if len(stmt.args) != len(callee.ins):
                    out.append(f"{at}: call passes {len(stmt.args)} actuals, {stmt.callee} has {len(callee.ins)} inputs")
                if stmt.rets and len(stmt.rets) != len(callee.outs):
                    out.append(f"{at}: call binds {len(stmt.rets)} returns, {stmt.callee} has {len(callee.outs)} outputs")
            if isinstance(stmt, Call) and len(succ) > 1:
                out.append(f"{at}: call node must have a unique successor")
        if lowered:
            if not is_acyclic(proc):
                out.append(f"{where}: CFG is not acyclic")
            writers: dict[str, list[str]] = {}
            for label, stmt in proc.nodes.items():
                for v in write_set(stmt):
                    writers.setdefault(v, []).append(label)
            for v, labels in writers.items():
                if len(labels) > 1:
                    out.append(f"{where}: variable {v} written at {len(labels)} nodes (not SSA)")
                if v in proc.ins:
                    out.append(f"{where}: input formal {v} is written (not SSA)")
    return out
