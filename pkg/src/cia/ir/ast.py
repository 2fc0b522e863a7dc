"""Abstract syntax of the analysis IR: expressions, statements, procedure CFGs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

UNARY_OPS = frozenset({"neg", "!"})
BINARY_OPS = frozenset(
    {"+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||"}
)
FUNC_ARITY = {"select": 2, "update": 3, "phi": 2}
BOOL_OPS = frozenset({"!", "==", "!=", "<", "<=", ">", ">=", "&&", "||"})


def op_arity(op: str) -> int:
    if op in UNARY_OPS:
        return 1
    if op in BINARY_OPS:
        return 2
    if op in FUNC_ARITY:
        return FUNC_ARITY[op]
    raise ValueError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple

    def __post_init__(self):
        if len(self.args) != op_arity(self.op):
            raise ValueError(
                f"operator {self.op!r} expects {op_arity(self.op)} arguments, got {len(self.args)}"
            )


Expr = Const | Var | Op


def expr_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Op):
        out: frozenset[str] = frozenset()
        for a in e.args:
            out |= expr_vars(a)
        return out
    return frozenset()


def rename_expr(e: Expr, env: Mapping[str, str]) -> Expr:
    if isinstance(e, Var):
        return Var(env.get(e.name, e.name))
    if isinstance(e, Op):
        return Op(e.op, tuple(rename_expr(a, env) for a in e.args))
    return e


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr


@dataclass(frozen=True)
class Assume:
    expr: Expr


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Call:
    callee: str
    args: tuple
    rets: tuple


Stmt = Assign | Assume | Skip | Call


def read_set(stmt: Stmt) -> frozenset[str]:
    """Variables read by a statement; a call reads every actual."""
    if isinstance(stmt, (Assign, Assume)):
        return expr_vars(stmt.expr)
    if isinstance(stmt, Call):
        out: frozenset[str] = frozenset()
        for a in stmt.args:
            out |= expr_vars(a)
        return out
    return frozenset()


def write_set(stmt: Stmt) -> frozenset[str]:
    if isinstance(stmt, Assign):
        return frozenset((stmt.target,))
    if isinstance(stmt, Call):
        return frozenset(stmt.rets)
    return frozenset()


@dataclass(frozen=True, eq=False)
class Procedure:
    """A procedure CFG. ``nodes`` keeps listing order: entry first, exit last."""

    name: str
    ins: tuple[str, ...]
    outs: tuple[str, ...]
    vars: tuple[str, ...]
    nodes: dict[str, Stmt]
    succ: dict[str, tuple[str, ...]]
    entry: str
    exit: str

    def __eq__(self, other):
        if not isinstance(other, Procedure):
            return NotImplemented
        return (
            self.name == other.name
            and self.ins == other.ins
            and self.outs == other.outs
            and set(self.vars) == set(other.vars)
            and self.nodes == other.nodes
            and self.succ == other.succ
            and self.entry == other.entry
            and self.exit == other.exit
        )

    def __hash__(self):
        return hash((self.name, self.ins, self.outs, self.entry, self.exit))

    def same_body(self, other: "Procedure") -> bool:
        return self == other

    def preds(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n: [] for n in self.nodes}
        for n, ss in self.succ.items():
            for s in ss:
                out[s].append(n)
        return out

    def calls(self) -> Iterator[tuple[str, Call]]:
        for label, stmt in self.nodes.items():
            if isinstance(stmt, Call):
                yield label, stmt

    def is_branching(self, label: str) -> bool:
        return len(self.succ.get(label, ())) == 2


@dataclass(frozen=True, eq=False)
class Program:
    procs: dict[str, Procedure]
    main: str = "main"
    domains: dict[str, tuple[int, ...]] = field(default_factory=dict)
    proc_domains: dict[tuple[str, str], tuple[int, ...]] = field(default_factory=dict)
    globals: dict[str, int] = field(default_factory=dict)
    width: int = 8

    def __eq__(self, other):
        if not isinstance(other, Program):
            return NotImplemented
        return (
            self.procs == other.procs
            and self.main == other.main
            and self.domains == other.domains
            and self.proc_domains == other.proc_domains
            and self.globals == other.globals
            and self.width == other.width
        )

    def __hash__(self):
        return hash((self.main, tuple(self.procs)))

    def stmt_at(self, proc: str, label: str) -> Stmt:
        return self.procs[proc].nodes[label]

    def all_nodes(self) -> Iterator[tuple[str, str]]:
        for name, proc in self.procs.items():
            for label in proc.nodes:
                yield name, label

    def call_edges(self) -> set[tuple[str, str]]:
        return {
            (name, call.callee)
            for name, proc in self.procs.items()
            for _, call in proc.calls()
        }

    def callsites_of(self, callee: str) -> list[tuple[str, str, Call]]:
        return [
            (name, label, call)
            for name, proc in self.procs.items()
            for label, call in proc.calls()
            if call.callee == callee
        ]

    def value_domain(self) -> tuple[int, ...]:
        """Default finite domain for formals without a declaration."""
        vals = {0, 1}
        for dom in self.domains.values():
            vals.update(dom)
        for dom in self.proc_domains.values():
            vals.update(dom)
        return tuple(sorted(vals))

    def formal_domain(self, proc: str, var: str) -> tuple[int, ...]:
        if (proc, var) in self.proc_domains:
            return self.proc_domains[(proc, var)]
        if proc == self.main and var in self.domains:
            return self.domains[var]
        if proc == self.main:
            return (0,)
        return self.value_domain()


def collect_vars(ins, outs, nodes: Mapping[str, Stmt]) -> tuple[str, ...]:
    seen: dict[str, None] = dict.fromkeys(ins)
    seen.update(dict.fromkeys(outs))
    for stmt in nodes.values():
        for v in sorted(read_set(stmt)):
            seen.setdefault(v)
        for v in (stmt.rets if isinstance(stmt, Call) else sorted(write_set(stmt))):
            seen.setdefault(v)
    return tuple(seen)


def make_procedure(name, ins, outs, nodes, succ, entry=None, exit=None, extra_vars=()):
    """Build a procedure, deriving ``vars`` from formals and statement operands."""
    labels = list(nodes)
    vars_ = collect_vars(ins, outs, nodes)
    vars_ = vars_ + tuple(v for v in extra_vars if v not in vars_)
    return Procedure(
        name=name,
        ins=tuple(ins),
        outs=tuple(outs),
        vars=vars_,
        nodes=dict(nodes),
        succ={n: tuple(succ.get(n, ())) for n in labels},
        entry=entry if entry is not None else labels[0],
        exit=exit if exit is not None else labels[-1],
    )


def map_typed(p: "Program") -> dict[str, set[str]]:
    """Variables holding maps, per procedure, by propagation from select/update."""
    out: dict[str, set[str]] = {name: set() for name in p.procs}

    def base(e):
        if isinstance(e, Op) and e.op in ("select", "update") and isinstance(e.args[0], Var):
            yield e.args[0].name
        for a in getattr(e, "args", ()):
            yield from base(a)

    for name, proc in p.procs.items():
        for stmt in proc.nodes.values():
            for e in (getattr(stmt, "expr", None), *getattr(stmt, "args", ())):
                if e is not None:
                    out[name].update(base(e))
    changed = True
    while changed:
        changed = False
        for name, proc in p.procs.items():
            mine = out[name]
            for stmt in proc.nodes.values():
                links = []
                if isinstance(stmt, Assign):
                    e = stmt.expr
                    if isinstance(e, Op) and e.op == "update":
                        links.append(((name, stmt.target), None))
                    elif isinstance(e, Var):
                        links.append(((name, stmt.target), (name, e.name)))
                    elif isinstance(e, Op) and e.op == "phi":
                        links += [((name, stmt.target), (name, a.name)) for a in e.args if isinstance(a, Var)]
                elif isinstance(stmt, Call) and stmt.callee in p.procs:
                    g = p.procs[stmt.callee]
                    links += [((name, a.name), (g.name, x)) for a, x in zip(stmt.args, g.ins) if isinstance(a, Var)]
                    links += [((name, r), (g.name, y)) for r, y in zip(stmt.rets, g.outs)]
                for a, b in links:
                    if b is None:
                        if a[1] not in mine:
                            mine.add(a[1])
                            changed = True
                        continue
                    ia, ib = a[1] in out[a[0]], b[1] in out[b[0]]
                    if ia != ib:
                        out[a[0]].add(a[1])
                        out[b[0]].add(b[1])
                        changed = True
    return out
