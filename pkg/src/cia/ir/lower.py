"""Lowering to the analyzable form.

Three passes, applied in order: globals become paired input/output formals,
natural loops become tail-recursive procedures, and every procedure is put
into SSA form. All generated names are deterministic so that two versions
with identical bodies lower to identical procedures.
"""
from __future__ import annotations

from dataclasses import replace

from .ast import (
    Assign,
    Assume,
    Call,
    Op,
    Procedure,
    Program,
    Skip,
    Var,
    make_procedure,
    read_set,
    rename_expr,
    write_set,
)
from .parser import IRError
from .validate import is_acyclic


class LoweringError(IRError):
    pass


def _rebuild(proc: Procedure, nodes, succ, entry=None, exit=None, ins=None, outs=None) -> Procedure:
    rebuilt = make_procedure(
        proc.name,
        proc.ins if ins is None else ins,
        proc.outs if outs is None else outs,
        nodes,
        succ,
        entry=proc.entry if entry is None else entry,
        exit=proc.exit if exit is None else exit,
    )
    live = set(rebuilt.vars)
    kept = tuple(v for v in proc.vars if v in live)
    return replace(rebuilt, vars=kept + tuple(v for v in rebuilt.vars if v not in kept))


def _fresh_label(base: str, taken) -> str:
    if base not in taken:
        return base
    k = 1
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


def insert_before(nodes: dict, succ: dict, target: str, chain: list, entry: str):
    """Splice ``chain`` (list of (label, stmt)) in front of ``target``.

    Every edge into ``target`` is redirected to the head of the chain. Returns
    the new ``(nodes, succ, entry)``.
    """
    if not chain:
        return nodes, succ, entry
    head = chain[0][0]
    new_succ = {n: tuple(head if s == target else s for s in ss) for n, ss in succ.items()}
    new_nodes = {}
    for label, stmt in nodes.items():
        if label == target:
            for i, (cl, cs) in enumerate(chain):
                new_nodes[cl] = cs
                new_succ[cl] = (chain[i + 1][0] if i + 1 < len(chain) else target,)
        new_nodes[label] = stmt
    new_succ = {n: new_succ[n] for n in new_nodes}
    return new_nodes, new_succ, (head if entry == target else entry)


# ---------------------------------------------------------------------------
# globals


def _globals_used(p: Program) -> dict[str, list[str]]:
    direct = {name: {g for g in p.globals if g in proc.vars} for name, proc in p.procs.items()}
    changed = True
    while changed:
        changed = False
        for name, proc in p.procs.items():
            for _, call in proc.calls():
                extra = direct[call.callee] - direct[name]
                if extra:
                    direct[name] |= extra
                    changed = True
    return {name: sorted(gs) for name, gs in direct.items()}


def globals_to_formals(p: Program) -> Program:
    if not p.globals:
        return p
    used = _globals_used(p)
    procs = {}
    for name, proc in p.procs.items():
        gs = used[name]
        nodes, succ = dict(proc.nodes), dict(proc.succ)
        for label, call in list(proc.calls()):
            cgs = used[call.callee]
            if not cgs:
                continue
            callee = p.procs[call.callee]
            rets = call.rets or tuple(f"{label}$discard{i}" for i in range(len(callee.outs)))
            nodes[label] = Call(call.callee, call.args + tuple(Var(g) for g in cgs), rets + tuple(cgs))
        ins, outs, entry = proc.ins, proc.outs, proc.entry
        if gs and name == p.main:
            chain = [(f"$init_{g}", Assign(g, _const(p.globals[g]))) for g in gs]
            nodes, succ, entry = insert_before(nodes, succ, proc.entry, chain, entry)
            outs = outs + tuple(gs)
        elif gs:
            ins = ins + tuple(gs)
            outs = outs + tuple(f"{g}$o" for g in gs)
            chain = [(f"$ret_{g}", Assign(f"{g}$o", Var(g))) for g in gs]
            nodes, succ, entry = insert_before(nodes, succ, proc.exit, chain, entry)
        procs[name] = _rebuild(proc, nodes, succ, entry=entry, ins=ins, outs=outs)
    return replace(p, procs=procs, globals={})


def _const(v):
    from .ast import Const

    return Const(v)


# ---------------------------------------------------------------------------
# loops


def dominators(proc: Procedure) -> dict[str, set[str]]:
    order = _reverse_postorder(proc)
    preds = proc.preds()
    reach = set(order)
    dom = {n: set(order) for n in order}
    dom[proc.entry] = {proc.entry}
    changed = True
    while changed:
        changed = False
        for n in order:
            if n == proc.entry:
                continue
            ps = [dom[q] for q in preds[n] if q in reach]
            new = set.intersection(*ps) if ps else set()
            new = new | {n}
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


def _reverse_postorder(proc: Procedure) -> list[str]:
    seen, post = set(), []
    stack = [(proc.entry, iter(proc.succ[proc.entry]))]
    seen.add(proc.entry)
    while stack:
        node, it = stack[-1]
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, iter(proc.succ[s])))
                break
        else:
            post.append(node)
            stack.pop()
    return post[::-1]


def _back_edges(proc: Procedure) -> list[tuple[str, str]]:
    """Back edges in DFS order from the entry (retreating edges)."""
    on_stack, seen, back = set(), set(), []
    stack = [(proc.entry, iter(proc.succ[proc.entry]))]
    seen.add(proc.entry)
    on_stack.add(proc.entry)
    while stack:
        node, it = stack[-1]
        for s in it:
            if s in on_stack:
                back.append((node, s))
            elif s not in seen:
                seen.add(s)
                on_stack.add(s)
                stack.append((s, iter(proc.succ[s])))
                break
        else:
            on_stack.discard(node)
            stack.pop()
    return back


def _natural_loop(proc: Procedure, header: str, tails: list[str]) -> set[str]:
    preds = proc.preds()
    body = {header}
    work = [t for t in tails if t != header]
    body.update(work)
    while work:
        n = work.pop()
        for q in preds[n]:
            if q not in body:
                body.add(q)
                work.append(q)
    return body


def _extract_one(p: Program, proc: Procedure, procs: dict) -> Procedure | None:
    back = _back_edges(proc)
    if not back:
        return None
    dom = dominators(proc)
    for u, h in back:
        if h not in dom.get(u, ()):
            raise LoweringError(f"procedure {proc.name}: irreducible control flow at edge {u}->{h}")
    header = back[0][1]
    tails = [u for u, h in back if h == header]
    body = _natural_loop(proc, header, tails)
    order = [n for n in proc.nodes if n in body]

    k = 1
    while f"{proc.name}$loop{k}" in procs:
        k += 1
    lname = f"{proc.name}$loop{k}"
    carried = [v for v in proc.vars if any(v in read_set(proc.nodes[n]) | write_set(proc.nodes[n]) for n in order)]
    targets = []
    for n in order:
        for s in proc.succ[n]:
            if s not in body and s not in targets:
                targets.append(s)
    multi = len(targets) > 1
    which = "$which"
    outs = [f"{v}$o" for v in carried] + ([which] if multi else [])
    rets = tuple(carried) + ((which,) if multi else ())

    lnodes, lsucc = {}, {}
    out_head = "$out0" if carried or multi else "$exit"
    extra_nodes: dict = {}
    extra_succ: dict = {}
    for n in order:
        lnodes[n] = proc.nodes[n]
        new_succ = []
        branching = len(proc.succ[n]) == 2
        for s in proc.succ[n]:
            if s == header and n in tails:
                rec = f"{n}$rec"
                extra_nodes[rec] = Call(lname, tuple(Var(v) for v in carried), rets)
                extra_succ[rec] = (out_head,)
                if branching and isinstance(proc.nodes[header], Assume):
                    bk = f"{n}$bk"
                    extra_nodes[bk] = proc.nodes[header]
                    extra_succ[bk] = (rec,)
                    new_succ.append(bk)
                else:
                    new_succ.append(rec)
            elif s not in body:
                nxt = out_head
                if multi:
                    sel = f"{s}$sel"
                    extra_nodes[sel] = Assign(which, _const(targets.index(s)))
                    extra_succ[sel] = (nxt,)
                    nxt = sel
                if branching and isinstance(proc.nodes[s], Assume):
                    extra_nodes[s] = proc.nodes[s]
                    extra_succ[s] = (nxt,)
                    nxt = s
                new_succ.append(nxt)
            else:
                new_succ.append(s)
        lsucc[n] = tuple(new_succ)
    lnodes.update(extra_nodes)
    lsucc.update(extra_succ)
    chain = [(f"$out{i}", Assign(f"{v}$o", Var(v))) for i, v in enumerate(carried)]
    for i, (label, stmt) in enumerate(chain):
        lnodes[label] = stmt
        lsucc[label] = (chain[i + 1][0] if i + 1 < len(chain) else "$exit",)
    if multi and not chain:
        # no carried vars: keep out_head label valid
        lnodes["$out0"] = Skip()
        lsucc["$out0"] = ("$exit",)
    lnodes["$exit"] = Skip()
    lsucc["$exit"] = ()
    loop_proc = make_procedure(lname, carried, outs, lnodes, lsucc, entry=header, exit="$exit")

    # caller side
    nodes, succ = {}, {}
    call_label = header
    h_is_assume = isinstance(proc.nodes[header], Assume)
    if h_is_assume:
        call_label = _fresh_label(f"{header}$call", proc.nodes)
    call = Call(lname, tuple(Var(v) for v in carried), rets)
    dispatch: dict = {}
    dsucc: dict = {}
    if multi:
        nxt = targets[-1]
        for i in range(len(targets) - 2, -1, -1):
            t, y, no = f"{header}$d{i}", f"{header}$y{i}", f"{header}$n{i}"
            cond = f"{header}$t{i}"
            dispatch[t] = Assign(cond, Op("==", (Var(which), _const(i))))
            dsucc[t] = (y, no)
            dispatch[y] = Assume(Var(cond))
            dsucc[y] = (targets[i],)
            dispatch[no] = Assume(Op("!", (Var(cond),)))
            dsucc[no] = (nxt,)
            nxt = t
        after_call = nxt
    else:
        after_call = targets[0] if targets else proc.exit
    for n, stmt in proc.nodes.items():
        if n == header:
            if h_is_assume:
                nodes[header] = stmt
                succ[header] = (call_label,)
            nodes[call_label] = call
            succ[call_label] = (after_call,)
            nodes.update(dispatch)
            succ.update(dsucc)
        elif n not in body:
            nodes[n] = stmt
            succ[n] = proc.succ[n]
    procs[lname] = loop_proc
    return _rebuild(proc, nodes, succ)


def extract_loops(p: Program) -> Program:
    procs = dict(p.procs)
    work = list(procs)
    while work:
        name = work.pop(0)
        while True:
            before = set(procs)
            new = _extract_one(p, procs[name], procs)
            if new is None:
                break
            procs[name] = new
            work.extend(sorted(set(procs) - before))
    ordered = {}
    for name in p.procs:
        ordered[name] = procs[name]
        for extra in sorted(n for n in procs if n.startswith(name + "$loop") and n not in p.procs):
            ordered.setdefault(extra, procs[extra])
    for name in procs:
        ordered.setdefault(name, procs[name])
    return replace(p, procs=ordered)


# ---------------------------------------------------------------------------
# SSA


def _topo(proc: Procedure) -> list[str]:
    index = {n: i for i, n in enumerate(proc.nodes)}
    indeg = {n: 0 for n in proc.nodes}
    for ss in proc.succ.values():
        for s in ss:
            indeg[s] += 1
    ready = sorted((n for n, d in indeg.items() if d == 0), key=index.get)
    out = []
    while ready:
        n = ready.pop(0)
        out.append(n)
        for s in proc.succ[n]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
                ready.sort(key=index.get)
    return out


def _phi(versions: list[str]):
    expr = Var(versions[-1])
    for v in reversed(versions[:-1]):
        expr = Op("phi", (Var(v), expr))
    return expr


def to_ssa(proc: Procedure) -> Procedure:
    if not is_acyclic(proc):
        raise LoweringError(f"procedure {proc.name}: SSA requires an acyclic CFG")
    writers: dict[str, int] = {}
    for stmt in proc.nodes.values():
        for v in write_set(stmt):
            writers[v] = writers.get(v, 0) + 1
    renamed = {v for v, c in writers.items() if c > 1 or v in proc.ins}
    if not renamed:
        return proc
    taken = set(proc.vars)

    def fresh(v, at):
        # names follow the defining node so unrelated edits keep them stable
        name = f"{v}${at}"
        while name in taken:
            name += "$"
        taken.add(name)
        return name

    var_order = [v for v in proc.vars if v in renamed] + sorted(renamed - set(proc.vars))
    preds = proc.preds()
    initial = {v: v for v in renamed}
    out_map: dict[str, dict] = {}
    nodes, succ, entry = dict(proc.nodes), dict(proc.succ), proc.entry
    new_stmts = {}
    for n in _topo(proc):
        ps = preds[n]
        if not ps:
            env = dict(initial)
        elif len(ps) == 1:
            env = dict(out_map[ps[0]])
        else:
            env = {}
            chain = []
            for v in var_order:
                versions = []
                for q in ps:
                    if out_map[q][v] not in versions:
                        versions.append(out_map[q][v])
                if len(versions) == 1:
                    env[v] = versions[0]
                else:
                    label = f"{n}$phi_{v}"
                    nv = fresh(v, label)
                    chain.append((label, Assign(nv, _phi(versions))))
                    env[v] = nv
            nodes, succ, entry = insert_before(nodes, succ, n, chain, entry)
        stmt = proc.nodes[n]
        if isinstance(stmt, Assign):
            expr = rename_expr(stmt.expr, env)
            target = stmt.target
            if target in renamed:
                env[target] = fresh(target, n)
                target = env[target]
            stmt = Assign(target, expr)
        elif isinstance(stmt, Assume):
            stmt = Assume(rename_expr(stmt.expr, env))
        elif isinstance(stmt, Call):
            args = tuple(rename_expr(a, env) for a in stmt.args)
            rets = []
            for r in stmt.rets:
                if r in renamed:
                    env[r] = fresh(r, n)
                    r = env[r]
                rets.append(r)
            stmt = Call(stmt.callee, args, tuple(rets))
        new_stmts[n] = stmt
        out_map[n] = env
    nodes.update(new_stmts)
    exit_env = out_map.get(proc.exit, initial)
    copies = [
        (f"$copy_{r}", Assign(r, Var(exit_env[r])))
        for r in proc.outs
        if r in renamed and exit_env[r] != r
    ]
    nodes, succ, entry = insert_before(nodes, succ, proc.exit, copies, entry)
    return _rebuild(proc, nodes, succ, entry=entry)


def lower(p: Program) -> Program:
    """Lower a program: globals to formals, loops to tail recursion, then SSA.

    Deterministic and idempotent; raises :class:`LoweringError` on
    irreducible control flow.
    """
    p = globals_to_formals(p)
    p = extract_loops(p)
    return replace(p, procs={name: to_ssa(proc) for name, proc in p.procs.items()})
