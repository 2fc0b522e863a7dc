"""Control dependence and the DependsOnVar / DependsOnNode fixpoint."""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .ir.ast import Assume, Call, Procedure, Program, expr_vars, read_set, write_set


def postdominators(proc: Procedure) -> dict[str, set[str]]:
    """Post-dominator sets. Nodes that cannot reach the exit get the full node set."""
    all_nodes = set(proc.nodes)
    pdom = {n: set(all_nodes) for n in proc.nodes}
    pdom[proc.exit] = {proc.exit}
    changed = True
    while changed:
        changed = False
        for n in proc.nodes:
            if n == proc.exit:
                continue
            succ = proc.succ[n]
            new = set.intersection(*(pdom[s] for s in succ)) | {n} if succ else set(all_nodes)
            if new != pdom[n]:
                pdom[n] = new
                changed = True
    return pdom


def control_dependence(proc: Procedure, pdom=None) -> dict[str, set[str]]:
    """Map each branching node to the set of nodes control-dependent on it."""
    pdom = pdom or postdominators(proc)
    out: dict[str, set[str]] = {}
    for n, succ in proc.succ.items():
        if len(succ) != 2:
            continue
        deps = set()
        for s in succ:
            deps |= pdom[s] - pdom[n]
        out[n] = deps
    return out


@dataclass
class DependencyRelation:
    var: dict = field(default_factory=dict)   # proc -> {(y, x)}
    node: dict = field(default_factory=dict)  # proc -> {(y, label)}
    ctrl: dict = field(default_factory=dict)  # proc -> {branch: {dependent labels}}

    def depends_on(self, proc: str, y: str) -> set[str]:
        return {x for (yy, x) in self.var.get(proc, ()) if yy == y}

    def to_json(self) -> dict:
        return {
            "depends_on_var": [[p, y, x] for p in self.var for (y, x) in sorted(self.var[p])],
            "depends_on_node": [[p, y, n] for p in self.node for (y, n) in sorted(self.node[p])],
        }


def _closure(pairs: set) -> set:
    succ: dict = {}
    for y, x in pairs:
        succ.setdefault(y, set()).add(x)
    out = set()
    for y in succ:
        seen, work = set(), list(succ[y])
        while work:
            x = work.pop()
            if x in seen:
                continue
            seen.add(x)
            work.extend(succ.get(x, ()))
        out |= {(y, x) for x in seen}
    return out


def call_graph(p: Program) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(p.procs)
    g.add_edges_from(p.call_edges())
    return g


def branch_reads(proc: Procedure, n1: str) -> set[str]:
    """Variables read by a branching node, counting its guarding assumes."""
    out = set(read_set(proc.nodes[n1]))
    for s in proc.succ[n1]:
        if isinstance(proc.nodes[s], Assume):
            out |= read_set(proc.nodes[s])
    return out


def _local_deps(proc: Procedure, ctrl) -> set:
    base = {(x, x) for x in proc.ins}
    for label, stmt in proc.nodes.items():
        if isinstance(stmt, Call):
            continue
        for y in write_set(stmt):
            base |= {(y, x) for x in read_set(stmt)}
    for n1, deps in ctrl.items():
        reads = branch_reads(proc, n1)
        for n2 in deps:
            for y in write_set(proc.nodes[n2]):
                base |= {(y, x) for x in reads}
    return base


def compute_depends(p: Program) -> DependencyRelation:
    """Least fixpoint of the dependency rules, callees before callers."""
    rel = DependencyRelation()
    local = {}
    for name, proc in p.procs.items():
        rel.ctrl[name] = control_dependence(proc)
        local[name] = _local_deps(proc, rel.ctrl[name])
        rel.var[name] = _closure(local[name])
    cg = call_graph(p)
    cond = nx.condensation(cg)
    for comp in reversed(list(nx.topological_sort(cond))):
        members = sorted(cond.nodes[comp]["members"])
        changed = True
        while changed:
            changed = False
            for name in members:
                proc = p.procs[name]
                facts = set(local[name])
                for label, call in proc.calls():
                    callee = p.procs[call.callee]
                    dov = rel.var[call.callee]
                    for i, r in enumerate(call.rets):
                        y = callee.outs[i]
                        for j, x in enumerate(callee.ins):
                            if (y, x) in dov:
                                facts |= {(r, w) for w in expr_vars(call.args[j])}
                new = _closure(facts)
                if new != rel.var[name]:
                    rel.var[name] = new
                    changed = True
    for name, proc in p.procs.items():
        dov = rel.var[name]
        by_x: dict = {}
        for y, x in dov:
            by_x.setdefault(x, set()).add(y)
        facts = set()
        for label, stmt in proc.nodes.items():
            for x in write_set(stmt):
                # a written variable trivially depends on its own defining node
                facts.add((x, label))
                facts |= {(y, label) for y in by_x.get(x, ())}
        # a branch decides which writes reach y, so y also depends on the
        # branching node and its guards
        for n1, deps in rel.ctrl[name].items():
            written = set()
            for n2 in deps:
                written |= write_set(proc.nodes[n2])
            ys = written | {y for y, x in dov if x in written}
            guards = [n1] + [s for s in proc.succ[n1] if isinstance(proc.nodes[s], Assume)]
            facts |= {(y, g) for y in ys for g in guards}
        rel.node[name] = facts
    return rel


def dep_of(d1: DependencyRelation, d2: DependencyRelation, proc: str, y: str) -> set[str]:
    """Variables ``y`` depends on in either version."""
    return d1.depends_on(proc, y) | d2.depends_on(proc, y)
