"""Equivalence inference over a product of the two versions.

A product procedure pairs the two bodies of one procedure. Its obligations
are discharged by a bounded enumerative checker: entry stores range over the
declared finite domains, calls to in-scope callees are paired positionally
(the k-th call to ``g`` in one version against the k-th in the other) and
their outputs constrained by the callee's live summary candidates, while any
other call output is havocked over the value domain. Candidates are removed
Houdini-style until no obligation fails.
"""
from __future__ import annotations

import itertools
import logging
import os
from dataclasses import dataclass, field

from .depends import branch_reads, compute_depends, dep_of
from .impact import ASSUMED, INFERRED, EquivalenceSet
from .ir.ast import Assume, Call, Const, Op, Program, map_typed, read_set
from .semantics.interp import (
    BLOCKED,
    EXHAUSTED,
    NORMAL,
    Blocked,
    EvalError,
    State,
    Terminal,
    eval_expr,
    run_proc,
    step,
    union,
)
from .semantics.oracles import MAP_DOMAIN, formal_domains

log = logging.getLogger(__name__)

HOLDS, REFUTED, UNKNOWN = "holds", "refuted", "unknown"
DEFAULT_CHECK_FUEL = 10_000
DEFAULT_ENUM_BUDGET = 2_000_000


def _env_int(name: str, default: int) -> int:
    try:
        return int(os.environ[name])
    except (KeyError, ValueError):
        return default


@dataclass
class CheckerConfig:
    fuel: int = field(default_factory=lambda: _env_int("CIA_FUEL", DEFAULT_CHECK_FUEL))
    enum_budget: int = field(default_factory=lambda: _env_int("CIA_ENUM_BUDGET", DEFAULT_ENUM_BUDGET))
    backend: str = "enum"


@dataclass(frozen=True)
class Candidate:
    kind: str  # "pre" or "summ"
    proc: str
    var: str

    def __str__(self):
        return f"{'PreEquiv' if self.kind == 'pre' else 'SummaryEquiv'}({self.var}, {self.proc})"


@dataclass
class ProductProcedure:
    """The pair ``f1 x f2`` with its interface and pairing structure."""

    name: str
    f1: object
    f2: object
    ins: tuple
    outs: tuple
    paired_callees: tuple
    unpaired_callees: tuple

    def describe(self) -> str:
        lines = [f"proc {self.name}({', '.join(self.ins)}) : ({', '.join(self.outs)})"]
        for g in self.paired_callees:
            lines.append(f"  pair calls to {g} -> {g}$1x2")
        for g in self.unpaired_callees:
            lines.append(f"  havoc outputs of {g}")
        lines.append("  assert calls1 ==procs calls2")
        return "\n".join(lines)


def build_product(p1: Program, p2: Program, scope) -> dict:
    """One product procedure per in-scope procedure."""
    out = {}
    for name in p1.procs:
        if name not in scope:
            continue
        f1, f2 = p1.procs[name], p2.procs[name]
        callees = []
        for f in (f1, f2):
            for _, c in f.calls():
                if c.callee not in callees:
                    callees.append(c.callee)
        out[name] = ProductProcedure(
            name=f"{name}$1x2",
            f1=f1,
            f2=f2,
            ins=tuple(f"{x}$1" for x in f1.ins) + tuple(f"{x}$2" for x in f2.ins),
            outs=tuple(f"{y}$1" for y in f1.outs) + tuple(f"{y}$2" for y in f2.outs),
            paired_callees=tuple(g for g in callees if g in scope),
            unpaired_callees=tuple(g for g in callees if g not in scope),
        )
    return out


class BudgetExceeded(Exception):
    pass


class _Budget:
    def __init__(self, limit):
        self.left = limit

    def spend(self, n=1):
        self.left -= n
        if self.left < 0:
            raise BudgetExceeded


@dataclass
class _Path:
    status: str
    store: dict
    calls: tuple  # (callee, args, outputs)


def _paths(p: Program, proc, store: dict, resolve, budget: _Budget):
    """Every execution of ``proc`` from ``store`` under each call-output resolution."""
    work = [(State(proc.name, proc.entry, dict(store), None, 0), ())]
    while work:
        st, calls = work.pop()
        while True:
            budget.spend()
            stmt = proc.nodes[st.label]
            if isinstance(stmt, Call):
                succ = proc.succ[st.label]
                try:
                    args = tuple(eval_expr(a, st.store, p.width) for a in stmt.args)
                except (Blocked, EvalError):
                    yield _Path(BLOCKED, st.store, calls)
                    break
                if len(succ) != 1:
                    yield _Path(BLOCKED, st.store, calls)
                    break
                options = resolve(stmt, args, calls)
                for outs in options[1:]:
                    bound = union(st.store, dict(zip(stmt.rets, outs)))
                    work.append((State(st.proc, succ[0], bound, None, 0), calls + ((stmt.callee, args, outs),)))
                outs = options[0]
                calls = calls + ((stmt.callee, args, outs),)
                st = State(st.proc, succ[0], union(st.store, dict(zip(stmt.rets, outs))), None, 0)
                continue
            nxt = step(st, p)
            if isinstance(nxt, Terminal):
                yield _Path(nxt.status, st.store, calls)
                break
            st = nxt


class ObligationContext:
    """Shared facts for one Houdini round."""

    def __init__(self, p1, p2, scope, live, assumed, deps, domain):
        self.p1, self.p2, self.scope = p1, p2, scope
        self.live, self.assumed = live, assumed
        self.deps, self.domain = deps, domain
        m1, m2 = map_typed(p1), map_typed(p2)
        self.maps = {f: m1[f] | m2[f] for f in p1.procs}
        self._positions: dict = {}
        self._v1_paths: dict = {}

    def out_domain(self, g, i):
        outs = self.p1.procs[g].outs
        return MAP_DOMAIN if i < len(outs) and outs[i] in self.maps[g] else self.domain

    def has(self, kind, proc, var) -> bool:
        # out-of-scope procedures only contribute facts already established
        c = Candidate(kind, proc, var)
        if c in self.live and (kind == "pre" or proc in self.scope):
            return True
        facts = self.assumed.pre if kind == "pre" else self.assumed.summ
        return (proc, var) in facts

    def dep_positions(self, g, y):
        if (g, y) not in self._positions:
            dep = dep_of(self.deps[0], self.deps[1], g, y)
            self._positions[(g, y)] = [j for j, x in enumerate(self.p1.procs[g].ins) if x in dep]
        return self._positions[(g, y)]

    def havoc(self, call: Call, live_rets=None):
        doms = [
            self.out_domain(call.callee, i) if live_rets is None or r in live_rets else (0,)
            for i, r in enumerate(call.rets)
        ]
        return list(itertools.product(*doms))

    def resolve_v1(self, live_rets):
        return lambda call, args, calls: self.havoc(call, live_rets)

    def resolve_v2(self, v1_calls, live_rets):
        def resolve(call, args, calls):
            g = call.callee
            k = sum(1 for c in calls if c[0] == g)
            mine = [c for c in v1_calls if c[0] == g]
            if k >= len(mine) or not call.rets:
                return self.havoc(call, live_rets)
            _, args1, outs1 = mine[k]
            outs_g = self.p2.procs[g].outs
            choices = []
            for i in range(len(call.rets)):
                y = outs_g[i]
                tied = self.has("summ", g, y) and all(args1[j] == args[j] for j in self.dep_positions(g, y))
                if call.rets[i] not in live_rets:
                    choices.append((0,))
                else:
                    choices.append((outs1[i],) if tied and i < len(outs1) else self.out_domain(g, i))
            return list(itertools.product(*choices))

        return resolve


def _seq_mismatch(c1, c2) -> set:
    names1, names2 = [c[0] for c in c1], [c[0] for c in c2]
    if names1 == names2:
        return set()
    i = 0
    while i < min(len(names1), len(names2)) and names1[i] == names2[i]:
        i += 1
    return set(names1[i:]) | set(names2[i:])


def _prefix_mismatch(c1, c2) -> set:
    n = min(len(c1), len(c2))
    return _seq_mismatch(c1[:n], c2[:n])


def _entry_pairs(ctx: ObligationContext, name: str, tied: set):
    f = ctx.p1.procs[name]
    doms = formal_domains(ctx.p1, ctx.p2, name)
    free = [x for x in f.ins if x not in tied]
    for s1 in _stores(doms, f.ins):
        for vals in itertools.product(*(doms[x] for x in free)):
            s2 = dict(s1)
            s2.update(zip(free, vals))
            yield s1, s2


def _stores(doms, names):
    for combo in itertools.product(*(doms[x] for x in names)):
        yield dict(zip(names, combo))


def _live_rets(f) -> set:
    """Call results that can influence anything observable in ``f``."""
    used = set(f.outs)
    for stmt in f.nodes.values():
        used |= read_set(stmt)
    return used


def _relevant(ctx: ObligationContext, name: str, y: str) -> set:
    """Variables that can affect ``y`` or whether the procedure blocks."""
    roots = {y}
    for f in (ctx.p1.procs[name], ctx.p2.procs[name]):
        blocking = [l for l, stmt in f.nodes.items() if _may_block(stmt, _is_guard(f, l))]
        for label in blocking:
            roots |= read_set(f.nodes[label])
        if blocking:
            # branches decide whether a blocking node is reached
            for n in f.nodes:
                if len(f.succ[n]) == 2:
                    roots |= branch_reads(f, n)
    out = set(roots)
    for r in roots:
        out |= dep_of(ctx.deps[0], ctx.deps[1], name, r)
    return out


def _may_block(stmt, guard: bool) -> bool:
    if isinstance(stmt, Assume) and not guard:
        return True
    return any(_has_partial_op(e) for e in (getattr(stmt, "expr", None), *getattr(stmt, "args", ())) if e is not None)


def _has_partial_op(e) -> bool:
    if isinstance(e, Op):
        return e.op in ("/", "%", "select", "update") or any(_has_partial_op(a) for a in e.args)
    return False


def _is_guard(f, label) -> bool:
    return any(label in f.succ[n] for n in f.nodes if len(f.succ[n]) == 2)


def _exec_pair(ctx: ObligationContext, name: str, s1: dict, s2: dict, budget: _Budget, live=None):
    f1, f2 = ctx.p1.procs[name], ctx.p2.procs[name]
    if live is None:
        live = _live_rets(f1) | _live_rets(f2)
    # version-1 runs do not depend on s2, so they are shared across entry pairs
    key = (name, tuple(s1.items()), frozenset(live))
    if key not in ctx._v1_paths:
        ctx._v1_paths[key] = list(_paths(ctx.p1, f1, s1, ctx.resolve_v1(live), budget))
    for t1 in ctx._v1_paths[key]:
        for t2 in _paths(ctx.p2, f2, s2, ctx.resolve_v2(t1.calls, live), budget):
            yield t1, t2


def check_product_obligation(pp: ProductProcedure, ctx: ObligationContext, config: CheckerConfig) -> dict:
    """Verdict per candidate this product procedure can refute."""
    name = pp.f1.name
    verdicts: dict = {}
    budget = _Budget(config.enum_budget)
    p1 = ctx.p1
    is_main = name == p1.main
    f1 = p1.procs[name]

    # Summary candidates: entry tied on the dependency set, free elsewhere.
    summs = [Candidate("summ", name, y) for y in f1.outs if Candidate("summ", name, y) in ctx.live]
    if summs and not _terminates(ctx, name, config):
        for c in summs:
            verdicts[c] = UNKNOWN
        summs = []
    for c in summs:
        tied = set(dep_of(ctx.deps[0], ctx.deps[1], name, c.var)) & set(f1.ins)
        # results that cannot reach the output or a blocking point stay at 0
        relevant = _relevant(ctx, name, c.var)
        try:
            ok = True
            for s1, s2 in _entry_pairs(ctx, name, tied):
                for t1, t2 in _exec_pair(ctx, name, s1, s2, budget, relevant):
                    if t1.status != t2.status or (
                        t1.status == NORMAL and t1.store.get(c.var, 0) != t2.store.get(c.var, 0)
                    ):
                        ok = False
                        break
                if not ok:
                    break
            verdicts[c] = HOLDS if ok else REFUTED
        except BudgetExceeded:
            verdicts[c] = UNKNOWN
            budget = _Budget(config.enum_budget)

    # Precondition candidates of callees, and the call-sequence assertion.
    tied = set(f1.ins) if is_main else {x for x in f1.ins if ctx.has("pre", name, x)}
    own_pre = [Candidate("pre", name, x) for x in f1.ins if Candidate("pre", name, x) in ctx.live]
    callees = pp.paired_callees + pp.unpaired_callees
    callee_pre = {Candidate("pre", g, x) for g in callees for x in p1.procs[g].ins if Candidate("pre", g, x) in ctx.live}
    if not callee_pre and not own_pre:
        return verdicts
    refuted: set = set()
    try:
        for s1, s2 in _entry_pairs(ctx, name, tied):
            for t1, t2 in _exec_pair(ctx, name, s1, s2, budget):
                if t1.status == NORMAL and t2.status == NORMAL:
                    bad = _seq_mismatch(t1.calls, t2.calls)
                else:
                    bad = _prefix_mismatch(t1.calls, t2.calls)
                if bad:
                    refuted |= set(own_pre)
                    refuted |= {c for c in callee_pre if c.proc in bad}
                for (g, a1, _), (g2, a2, _) in zip(t1.calls, t2.calls):
                    if g != g2:
                        break
                    for j, x in enumerate(p1.procs[g].ins):
                        c = Candidate("pre", g, x)
                        if c in callee_pre and a1[j] != a2[j]:
                            refuted.add(c)
    except BudgetExceeded:
        refuted |= callee_pre | set(own_pre)
    for c in callee_pre | set(own_pre):
        verdicts[c] = REFUTED if c in refuted else HOLDS
    return verdicts


def _terminates(ctx: ObligationContext, name: str, config: CheckerConfig) -> bool:
    """Concrete probe: both versions of ``name`` halt within fuel on every entry store."""
    doms = formal_domains(ctx.p1, ctx.p2, name)
    for p in (ctx.p1, ctx.p2):
        for s in _stores(doms, p.procs[name].ins):
            if run_proc(p, name, s, config.fuel).status == EXHAUSTED:
                return False
    return True


class EnumChecker:
    name = "enum"

    def check(self, pp, ctx, config):
        return check_product_obligation(pp, ctx, config)


class SmtChecker:
    """Placeholder for a solver-backed checker; every obligation is unknown."""

    name = "smt"

    def check(self, pp, ctx, config):
        name = pp.f1.name
        cands = [Candidate("summ", name, y) for y in pp.f1.outs]
        callees = pp.paired_callees + pp.unpaired_callees
        cands += [Candidate("pre", g, x) for g in callees for x in ctx.p1.procs[g].ins]
        cands += [Candidate("pre", name, x) for x in pp.f1.ins]
        return {c: UNKNOWN for c in cands if c in ctx.live}


CHECKERS = {"enum": EnumChecker, "smt": SmtChecker}


def external_callsites(p1: Program, p2: Program, scope) -> dict:
    """Per procedure: is it called from outside the scope in either version?"""
    flags = {}
    for name in p1.procs:
        callers = {f for p in (p1, p2) for f, _, _ in p.callsites_of(name)}
        flags[name] = bool(callers - set(scope))
    return flags


def make_candidates(p1: Program, p2: Program, scope, flags=None) -> set:
    """Summary candidates for in-scope procedures; precondition candidates for
    every procedure whose callsites all lie in scope."""
    flags = flags if flags is not None else external_callsites(p1, p2, scope)
    cands = set()
    for name, f in p1.procs.items():
        if name in scope:
            cands |= {Candidate("summ", name, y) for y in f.outs}
        if name != p1.main and not flags.get(name, True):
            cands |= {Candidate("pre", name, x) for x in f.ins}
    return cands


def _domain(p1: Program, p2: Program) -> tuple:
    vals = set(p1.value_domain()) | set(p2.value_domain())
    for p in (p1, p2):
        for proc in p.procs.values():
            for stmt in proc.nodes.values():
                vals |= _consts(stmt)
    return tuple(sorted(v % (1 << p1.width) for v in vals))


def _consts(stmt) -> set:
    out = set()

    def walk(e):
        if isinstance(e, Const):
            out.add(e.value)
        else:
            for a in getattr(e, "args", ()):
                walk(a)

    for e in (getattr(stmt, "expr", None), *getattr(stmt, "args", ())):
        if e is not None:
            walk(e)
    return out


def houdini_infer(
    p1: Program,
    p2: Program,
    scope,
    assumed: EquivalenceSet | None = None,
    config: CheckerConfig | None = None,
    flags=None,
    deps=None,
    order=None,
) -> EquivalenceSet:
    """Greatest set of candidates that survives every product obligation."""
    config = config or CheckerConfig()
    assumed = assumed or EquivalenceSet()
    scope = set(scope)
    deps = deps or (compute_depends(p1), compute_depends(p2))
    products = build_product(p1, p2, scope)
    cands = make_candidates(p1, p2, scope, flags)
    live = {c for c in cands if not (assumed.has_pre(c.proc, c.var) if c.kind == "pre" else assumed.has_summ(c.proc, c.var))}
    checker = CHECKERS[config.backend]()
    domain = _domain(p1, p2)
    names = list(order) if order is not None else sorted(products)
    while True:
        ctx = ObligationContext(p1, p2, scope, frozenset(live), assumed, deps, domain)
        refuted = set()
        for name in names:
            if name not in products:
                continue
            for c, verdict in checker.check(products[name], ctx, config).items():
                if verdict != HOLDS:
                    if verdict == UNKNOWN:
                        log.info("checker could not decide %s; treating as refuted", c)
                    refuted.add(c)
        if not refuted & live:
            break
        live -= refuted
    out = EquivalenceSet(dict(assumed.pre), dict(assumed.summ))
    for c in sorted(live, key=lambda c: (c.kind, c.proc, c.var)):
        (out.pre if c.kind == "pre" else out.summ).setdefault((c.proc, c.var), INFERRED)
    return out


__all__ = [
    "ASSUMED",
    "ObligationContext",
    "Candidate",
    "CheckerConfig",
    "EnumChecker",
    "ProductProcedure",
    "SmtChecker",
    "build_product",
    "check_product_obligation",
    "external_callsites",
    "houdini_infer",
    "make_candidates",
]
