"""Dataflow change-impact analysis, optionally sharpened by equivalence facts."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .depends import DependencyRelation, compute_depends
from .ir.ast import Assume, Call, Program, expr_vars, read_set, write_set

DATAFLOW, INFERRED, ASSUMED = "dataflow", "inferred", "assumed"


@dataclass
class EquivalenceSet:
    """PreEquiv and SummaryEquiv facts keyed by (proc, formal), valued by provenance."""

    pre: dict = field(default_factory=dict)
    summ: dict = field(default_factory=dict)

    def has_pre(self, proc: str, x: str) -> bool:
        return (proc, x) in self.pre

    def has_summ(self, proc: str, y: str) -> bool:
        return (proc, y) in self.summ

    def __add__(self, other: "EquivalenceSet") -> "EquivalenceSet":
        pre = dict(other.pre)
        pre.update(self.pre)
        summ = dict(other.summ)
        summ.update(self.summ)
        return EquivalenceSet(pre, summ)

    def __len__(self):
        return len(self.pre) + len(self.summ)

    def issubset(self, other: "EquivalenceSet") -> bool:
        return set(self.pre) <= set(other.pre) and set(self.summ) <= set(other.summ)

    def to_json(self) -> dict:
        return {
            "pre_equiv": [{"proc": p, "var": x, "provenance": t} for (p, x), t in sorted(self.pre.items())],
            "summary_equiv": [{"proc": p, "var": y, "provenance": t} for (p, y), t in sorted(self.summ.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> "EquivalenceSet":
        pre = {(r["proc"], r["var"]): r.get("provenance", ASSUMED) for r in data.get("pre_equiv", ())}
        summ = {(r["proc"], r["var"]): r.get("provenance", ASSUMED) for r in data.get("summary_equiv", ())}
        return cls(pre, summ)


@dataclass
class ImpactResult:
    nodes: set = field(default_factory=set)  # (version, proc, label)
    vars: set = field(default_factory=set)  # (proc, var)
    summs: set = field(default_factory=set)  # (proc, out formal)
    exprs: set = field(default_factory=set)  # (proc, call label, actual index)

    def __or__(self, other: "ImpactResult") -> "ImpactResult":
        return ImpactResult(self.nodes | other.nodes, self.vars | other.vars,
                            self.summs | other.summs, self.exprs | other.exprs)

    def issubset(self, other: "ImpactResult") -> bool:
        return (self.nodes <= other.nodes and self.vars <= other.vars
                and self.summs <= other.summs and self.exprs <= other.exprs)

    def mapped_nodes(self, nmap) -> set:
        return {n for n in self.nodes if nmap.is_mapped(n[0], n[1:])}

    def impacted_pairs(self, nmap) -> set:
        """Mapped node pairs (keyed by the version-1 node) impacted on either side."""
        return {a for a, b in nmap.pairs.items() if (1,) + a in self.nodes or (2,) + b in self.nodes}


def version_fixpoint(p: Program, mapped: set, deps: DependencyRelation, eq: EquivalenceSet, seed=None):
    """Least fixpoint of the impact rules on one version.

    Returns ``(nodes, vars, summs, exprs)`` with nodes keyed ``(proc, label)``.
    ``seed`` optionally supplies starting sets in the same shape.
    """
    nodes = {(f, n) for f, n in p.all_nodes() if (f, n) not in mapped}
    vars_, summs, exprs, recounted = set(), set(), set(), set()
    if seed is not None:
        nodes |= seed[0]
        vars_, summs, exprs = set(seed[1]), set(seed[2]), set(seed[3])
    callsites = [(f, n, c) for f, proc in p.procs.items() for n, c in proc.calls()]
    # a call to g with equal PreEquiv sequences is entered equally often
    count_safe = {g for g, proc in p.procs.items() if any(eq.has_pre(g, x) for x in proc.ins)}

    changed = True
    while changed:
        before = (len(nodes), len(vars_), len(summs), len(exprs), len(recounted))
        for f, proc in p.procs.items():
            for n, stmt in proc.nodes.items():
                if (f, n) not in nodes and any((f, x) in vars_ for x in read_set(stmt)):
                    nodes.add((f, n))
                if (f, n) in nodes:
                    # a mapped call impacts its results only through the
                    # summary rules, unless it may run a different number of times
                    if isinstance(stmt, Call) and not _rebinds(p, deps, f, n, nodes, mapped, recounted):
                        continue
                    vars_ |= {(f, x) for x in write_set(stmt)}
            for n1, deps_of in deps.ctrl[f].items():
                guards = [n1] + [s for s in proc.succ[n1] if isinstance(proc.nodes[s], Assume)]
                if any((f, g) in nodes for g in guards):
                    nodes |= {(f, n2) for n2 in deps_of}
        for g in recounted:
            nodes |= {(g, n) for n in p.procs[g].nodes}
        for f, n, call in callsites:
            callee = p.procs[call.callee]
            if (f, n) in nodes and _rebinds(p, deps, f, n, nodes, mapped, recounted):
                exprs |= {(f, n, j) for j in range(len(call.args))}
                if call.callee not in count_safe:
                    recounted.add(call.callee)
            for j, e in enumerate(call.args):
                if any((f, x) in vars_ for x in expr_vars(e)):
                    exprs.add((f, n, j))
            for j, x in enumerate(callee.ins):
                if (f, n, j) in exprs and not eq.has_pre(call.callee, x):
                    vars_.add((call.callee, x))
            dov = deps.var[call.callee]
            for i, r in enumerate(call.rets):
                y = callee.outs[i]
                if (call.callee, y) in summs:
                    vars_.add((f, r))
                    continue
                for j, x in enumerate(callee.ins):
                    if (y, x) in dov and (f, n, j) in exprs and not (
                        eq.has_pre(call.callee, x) and eq.has_summ(call.callee, y)
                    ):
                        vars_.add((f, r))
                        break
        for f, proc in p.procs.items():
            dov, don = deps.var[f], deps.node[f]
            for y in proc.outs:
                if (f, y) in summs or eq.has_summ(f, y):
                    continue
                if any((y, m) in don and (f, m) not in mapped for m in proc.nodes):
                    summs.add((f, y))
                    continue
                for n, call in proc.calls():
                    callee = p.procs[call.callee]
                    if any(
                        (call.callee, callee.outs[j]) in summs and (w == y or (y, w) in dov)
                        for j, w in enumerate(call.rets)
                    ):
                        summs.add((f, y))
                        break
        changed = before != (len(nodes), len(vars_), len(summs), len(exprs), len(recounted))
    return nodes, vars_, summs, exprs


def _rebinds(p, deps, f, n, nodes, mapped, recounted) -> bool:
    return (f, n) not in mapped or f in recounted or _reexecuted(p, deps, f, n, nodes)


def _reexecuted(p: Program, deps: DependencyRelation, f: str, n: str, nodes: set) -> bool:
    """True when a mapped call node may run a different number of times."""
    proc = p.procs[f]
    for n1, deps_of in deps.ctrl[f].items():
        if n in deps_of:
            guards = [n1] + [s for s in proc.succ[n1] if isinstance(proc.nodes[s], Assume)]
            if any((f, g) in nodes for g in guards):
                return True
    return False


def sem_dcia(p1: Program, p2: Program, nmap, eq: EquivalenceSet | None = None, deps=None) -> ImpactResult:
    """Impact sets of both versions under the equivalence facts in ``eq``."""
    eq = eq or EquivalenceSet()
    deps = deps or (compute_depends(p1), compute_depends(p2))
    out = ImpactResult()
    for version, p, d in ((1, p1, deps[0]), (2, p2, deps[1])):
        nodes, vars_, summs, exprs = version_fixpoint(p, nmap.mapped(version), d, eq)
        out = out | ImpactResult({(version,) + n for n in nodes}, vars_, summs, exprs)
    return out


def dcia(p1: Program, p2: Program, nmap, deps=None) -> ImpactResult:
    return sem_dcia(p1, p2, nmap, EquivalenceSet(), deps)


def reduction_pct(base: int, sem: int) -> float:
    return round(100.0 * (base - sem) / base, 2) if base else 0.0


def report(result: ImpactResult, nmap, baseline: ImpactResult | None = None) -> dict:
    """Versioned JSON report; counts are impacted mapped node pairs."""
    sem = len(result.impacted_pairs(nmap))
    base = len(baseline.impacted_pairs(nmap)) if baseline is not None else sem
    return {
        "schema": "cia-report/1",
        "impacted_nodes": [
            {"version": v, "proc": f, "label": n, "mapped": nmap.is_mapped(v, (f, n))}
            for v, f, n in sorted(result.nodes)
        ],
        "impacted_vars": [{"proc": f, "var": x} for f, x in sorted(result.vars)],
        "impacted_summaries": [{"proc": f, "var": y} for f, y in sorted(result.summs)],
        "counts": {"dcia": base, "sem": sem, "reduction_pct": reduction_pct(base, sem)},
    }


def format_report(rep: dict) -> str:
    lines = []
    by_proc: dict = {}
    for row in rep["impacted_nodes"]:
        if row["mapped"]:
            by_proc.setdefault((row["version"], row["proc"]), []).append(row["label"])
    for (v, f), labels in sorted(by_proc.items()):
        lines.append(f"v{v} {f}: {', '.join(labels)}")
    c = rep["counts"]
    lines.append(f"impacted mapped nodes: dcia={c['dcia']} sem={c['sem']} reduction={c['reduction_pct']}%")
    return "\n".join(lines)


def dumps(rep: dict) -> str:
    return json.dumps(rep, indent=2)
