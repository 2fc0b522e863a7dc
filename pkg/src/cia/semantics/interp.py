"""Reference interpreter: stores, call stacks, single steps and maximal traces."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from ..ir.ast import Assign, Assume, Call, Const, Op, Program, Skip, Var

DEFAULT_FUEL = 100_000


class Blocked(Exception):
    """Raised by :func:`eval_expr` for division by zero; the trace blocks."""


class EvalError(Exception):
    pass


@dataclass(frozen=True)
class MapVal:
    """Integer-indexed map with default value 0, stored sparsely."""

    items: tuple = ()

    def get(self, key: int) -> int:
        for k, v in self.items:
            if k == key:
                return v
        return 0

    def set(self, key: int, value) -> "MapVal":
        rest = [(k, v) for k, v in self.items if k != key]
        if value != 0:
            rest.append((key, value))
        return MapVal(tuple(sorted(rest, key=lambda kv: kv[0])))

    def __repr__(self):
        return "{" + ", ".join(f"{k}:{v}" for k, v in self.items) + "}"


def wrap(v: int, width: int = 8) -> int:
    half = 1 << (width - 1)
    return ((v + half) % (1 << width)) - half


def _as_map(v) -> MapVal:
    if isinstance(v, MapVal):
        return v
    if v == 0:
        return MapVal()
    raise EvalError(f"expected a map, got {v!r}")


def _as_int(v) -> int:
    if isinstance(v, MapVal):
        raise EvalError("expected an integer, got a map")
    return v


def _phi_leaves(e) -> list[str]:
    if isinstance(e, Var):
        return [e.name]
    if isinstance(e, Op) and e.op == "phi":
        return _phi_leaves(e.args[0]) + _phi_leaves(e.args[1])
    raise EvalError("phi arguments must be variables")


def eval_expr(e, store: dict, width: int = 8):
    """Evaluate ``e``; unbound variables read as 0 (uninitialized locals)."""
    if isinstance(e, Const):
        return wrap(e.value, width)
    if isinstance(e, Var):
        return store.get(e.name, 0)
    op = e.op
    if op == "phi":
        # SSA merge: the most recently written incoming version wins
        order = {name: i for i, name in enumerate(store)}
        bound = [v for v in _phi_leaves(e) if v in order]
        if not bound:
            return 0
        return store[max(bound, key=order.__getitem__)]
    vals = [eval_expr(a, store, width) for a in e.args]
    if op == "select":
        return _as_map(vals[0]).get(_as_int(vals[1]))
    if op == "update":
        return _as_map(vals[0]).set(_as_int(vals[1]), vals[2])
    if op == "==":
        return int(vals[0] == vals[1])
    if op == "!=":
        return int(vals[0] != vals[1])
    vals = [_as_int(v) for v in vals]
    if op == "!":
        return int(vals[0] == 0)
    if op == "neg":
        return wrap(-vals[0], width)
    a, b = vals
    if op == "+":
        return wrap(a + b, width)
    if op == "-":
        return wrap(a - b, width)
    if op == "*":
        return wrap(a * b, width)
    if op in ("/", "%"):
        if b == 0:
            raise Blocked()
        q = abs(a) // abs(b) * (1 if (a >= 0) == (b >= 0) else -1)
        return wrap(q if op == "/" else a - q * b, width)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    if op == "&&":
        return int(a != 0 and b != 0)
    if op == "||":
        return int(a != 0 or b != 0)
    raise EvalError(f"unknown operator {op!r}")


def union(s1: dict, s2: dict) -> dict:
    """Store union preferring ``s2``; rebinding moves a variable to the end."""
    out = {k: v for k, v in s1.items() if k not in s2}
    out.update(s2)
    return out


def project(s: dict, names) -> dict:
    names = set(names)
    return {k: v for k, v in s.items() if k in names}


@dataclass(frozen=True)
class Frame:
    proc: str
    ret_label: str
    rets: tuple
    store: dict


@dataclass(frozen=True, eq=False)
class State:
    proc: str
    label: str
    store: dict
    stack: Optional[tuple] = None  # cons list: (Frame, rest) or None
    depth: int = 0

    def frames(self) -> list[Frame]:
        out, cur = [], self.stack
        while cur is not None:
            out.append(cur[0])
            cur = cur[1]
        return out

    def __eq__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return (
            self.proc == other.proc
            and self.label == other.label
            and self.store == other.store
            and self.depth == other.depth
            and self.frames() == other.frames()
        )

    __hash__ = None


NORMAL, BLOCKED, EXHAUSTED = "normal", "blocked", "fuel-exhausted"


@dataclass(frozen=True)
class Terminal:
    status: str


def _next_label(p: Program, proc, label: str, store: dict) -> Optional[str]:
    succ = proc.succ[label]
    if not succ:
        return None
    if len(succ) == 2:
        # deterministic branch choice: the successor whose assume holds
        for s in succ:
            stmt = proc.nodes[s]
            if isinstance(stmt, Assume):
                try:
                    if eval_expr(stmt.expr, store, p.width) != 0:
                        return s
                except (Blocked, EvalError):
                    pass
    return succ[0]


def step(st: State, p: Program):
    """One transition; returns the successor :class:`State` or a :class:`Terminal`."""
    proc = p.procs[st.proc]
    stmt = proc.nodes[st.label]
    try:
        if isinstance(stmt, Assign):
            store = union(st.store, {stmt.target: eval_expr(stmt.expr, st.store, p.width)})
            nxt = _next_label(p, proc, st.label, store)
            if nxt is None:
                return Terminal(BLOCKED)
            return State(st.proc, nxt, store, st.stack, st.depth)
        if isinstance(stmt, Assume):
            if eval_expr(stmt.expr, st.store, p.width) == 0:
                return Terminal(BLOCKED)
            nxt = _next_label(p, proc, st.label, st.store)
            if nxt is None:
                return Terminal(BLOCKED)
            return State(st.proc, nxt, st.store, st.stack, st.depth)
        if isinstance(stmt, Call):
            callee = p.procs[stmt.callee]
            succ = proc.succ[st.label]
            if len(succ) != 1:
                return Terminal(BLOCKED)
            args = [eval_expr(a, st.store, p.width) for a in stmt.args]
            frame = Frame(st.proc, succ[0], stmt.rets, st.store)
            return State(callee.name, callee.entry, dict(zip(callee.ins, args)), (frame, st.stack), st.depth + 1)
    except (Blocked, EvalError):
        return Terminal(BLOCKED)
    # skip
    if st.label != proc.exit:
        nxt = _next_label(p, proc, st.label, st.store)
        if nxt is None:
            return Terminal(BLOCKED)
        return State(st.proc, nxt, st.store, st.stack, st.depth)
    if st.stack is None:
        return Terminal(NORMAL)
    frame, rest = st.stack
    caller = p.procs[frame.proc]
    outs = {r: st.store.get(y, 0) for r, y in zip(frame.rets, proc.outs)}
    store = project(union(frame.store, outs), caller.vars)
    return State(frame.proc, frame.ret_label, store, rest, st.depth - 1)


@dataclass
class Trace:
    states: list
    status: str

    def visits(self) -> dict:
        """Stores at each visit, keyed by ``(proc, label)``."""
        out: dict = {}
        for s in self.states:
            out.setdefault((s.proc, s.label), []).append(s.store)
        return out

    @property
    def final(self) -> State:
        return self.states[-1]


def run_from(p: Program, start: State, fuel: int = DEFAULT_FUEL) -> Trace:
    states = [start]
    cur = start
    for _ in range(fuel):
        nxt = step(cur, p)
        if isinstance(nxt, Terminal):
            return Trace(states, nxt.status)
        states.append(nxt)
        cur = nxt
    return Trace(states, EXHAUSTED)


def run(p: Program, inputs: dict, fuel: int = DEFAULT_FUEL) -> Trace:
    """Maximal trace of main from ``inputs``, truncated after ``fuel`` steps."""
    main = p.procs[p.main]
    missing = set(main.ins) - set(inputs)
    if missing:
        raise EvalError(f"missing inputs for main: {sorted(missing)}")
    return run_from(p, State(main.name, main.entry, {x: inputs[x] for x in main.ins}), fuel)


def run_proc(p: Program, proc: str, inputs: dict, fuel: int = DEFAULT_FUEL) -> Trace:
    f = p.procs[proc]
    return run_from(p, State(f.name, f.entry, {x: inputs[x] for x in f.ins}), fuel)


BOTTOM = None


def project_values(t: Trace, proc: str, label: str, x: str) -> list:
    """Values of ``x`` at each visit of the node; ``None`` stands for unbound."""
    return [s.store.get(x, BOTTOM) for s in t.states if s.proc == proc and s.label == label]


def input_stores(domains: dict, names) -> Iterator[dict]:
    names = list(names)
    for combo in itertools.product(*(domains[n] for n in names)):
        yield dict(zip(names, combo))


def format_trace(t: Trace) -> str:
    lines = []
    for s in t.states:
        body = ",".join(f"{k}={v}" for k, v in s.store.items())
        lines.append(f"{s.proc}:{s.label} {{{body}}} {s.depth}")
    lines.append(f"# {t.status}")
    return "\n".join(lines) + "\n"
