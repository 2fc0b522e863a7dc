"""Normalization of a version pair and the partial node bijection between them."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .ir.ast import Call, Const, Procedure, Program, Skip, make_procedure
from .ir.parser import IRError
from .semantics.interp import DEFAULT_FUEL, EXHAUSTED, input_stores, run


class NormalizationError(IRError):
    pass


class MapError(IRError):
    pass


Node = tuple  # (proc, label)


@dataclass(frozen=True)
class NodeMap:
    """Partial injective map from version-1 nodes to version-2 nodes."""

    pairs: dict = field(default_factory=dict)

    @property
    def inverse(self) -> dict:
        return {v: k for k, v in self.pairs.items()}

    def mapped(self, version: int) -> set:
        return set(self.pairs) if version == 1 else set(self.pairs.values())

    def is_mapped(self, version: int, node: Node) -> bool:
        return node in self.pairs if version == 1 else node in self.inverse

    def procs_delta(self, p1: Program, p2: Program) -> set[str]:
        """Procedures owning an unmapped node in either version."""
        m1, m2 = self.mapped(1), self.mapped(2)
        out = {n[0] for n in p1.all_nodes() if n not in m1}
        out |= {n[0] for n in p2.all_nodes() if n not in m2}
        return out

    def to_json(self) -> str:
        rows = [{"proc": a[0], "from": a[1], "to": b[1]} for a, b in sorted(self.pairs.items())]
        return json.dumps({"map": rows}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NodeMap":
        data = json.loads(text)
        pairs = {}
        for row in data["map"]:
            pairs[(row["proc"], row["from"])] = (row.get("to_proc", row["proc"]), row["to"])
        return cls(pairs)


def check_map_invariants(p1: Program, p2: Program, nmap: NodeMap) -> list[str]:
    out = []
    seen = {}
    for a, b in nmap.pairs.items():
        if a[0] != b[0]:
            out.append(f"{a} maps across procedures to {b}")
        if a[0] not in p1.procs or a[1] not in p1.procs[a[0]].nodes:
            out.append(f"{a} is not a version-1 node")
            continue
        if b[0] not in p2.procs or b[1] not in p2.procs[b[0]].nodes:
            out.append(f"{b} is not a version-2 node")
            continue
        if b in seen:
            out.append(f"{b} is the image of both {seen[b]} and {a} (not injective)")
        seen[b] = a
        if p1.stmt_at(*a) != p2.stmt_at(*b):
            out.append(f"{a} and {b} hold different statements")
    for a, b in nmap.pairs.items():
        if a[0] in p1.procs and b[0] in p2.procs and a[1] in p1.procs[a[0]].nodes and b[1] in p2.procs[b[0]].nodes:
            if _diverges(p1, p2, nmap, a, b):
                out.append(f"{a} and {b} have diverging successors")
    return out


def load_map(text: str, p1: Program, p2: Program) -> NodeMap:
    nmap = NodeMap.from_json(text)
    problems = check_map_invariants(p1, p2, nmap)
    if problems:
        raise MapError("invalid node map: " + "; ".join(problems))
    return nmap


def _empty_like(proc: Procedure) -> Procedure:
    nodes = {proc.exit: Skip()}
    return make_procedure(proc.name, proc.ins, proc.outs, nodes, {proc.exit: ()}, entry=proc.exit, exit=proc.exit)


def _union_order(a, b):
    return tuple(a) + tuple(x for x in b if x not in a)


def _pad_formals(p: Program, ins: dict, outs: dict) -> Program:
    """Extend formals to the given vectors; callsites pass 0 / bind dummies."""
    procs = {}
    for name, proc in p.procs.items():
        nodes = dict(proc.nodes)
        for label, call in proc.calls():
            callee = p.procs[call.callee]
            want_in, want_out = ins[call.callee], outs[call.callee]
            if want_in == callee.ins and want_out == callee.outs:
                continue
            args = dict(zip(callee.ins, call.args))
            new_args = tuple(args.get(x, Const(0)) for x in want_in)
            new_rets = call.rets
            if call.rets:
                rets = dict(zip(callee.outs, call.rets))
                new_rets = tuple(rets.get(y, f"{label}$pad_{y}") for y in want_out)
            nodes[label] = Call(call.callee, new_args, new_rets)
        procs[name] = replace(
            make_procedure(name, ins[name], outs[name], nodes, proc.succ, proc.entry, proc.exit),
        )
        procs[name] = replace(procs[name], vars=_union_order(proc.vars, procs[name].vars))
    return replace(p, procs=procs)


def normalize_pair(p1: Program, p2: Program) -> tuple[Program, Program]:
    """Give both versions the same procedures, formals, variables and labels.

    Missing procedures become empty (entry = exit skip); missing nodes become
    unreachable skips with no successors.
    """
    if p1.main != p2.main:
        raise NormalizationError(f"main differs: {p1.main!r} vs {p2.main!r}")
    names = list(_union_order(list(p1.procs), list(p2.procs)))
    a = {n: p1.procs.get(n) or _empty_like(p2.procs[n]) for n in names}
    b = {n: p2.procs.get(n) or _empty_like(p1.procs[n]) for n in names}
    ins = {n: _union_order(a[n].ins, b[n].ins) for n in names}
    outs = {n: _union_order(a[n].outs, b[n].outs) for n in names}
    for n in names:
        if set(ins[n]) & set(outs[n]):
            raise NormalizationError(f"procedure {n}: formal used as input in one version and output in the other")
    q1 = _pad_formals(replace(p1, procs=a), ins, outs)
    q2 = _pad_formals(replace(p2, procs=b), ins, outs)
    out1, out2 = {}, {}
    for n in names:
        f1, f2 = q1.procs[n], q2.procs[n]
        out1[n] = _add_missing(f1, f2)
        out2[n] = _add_missing(f2, f1)
        vars_ = _union_order(out1[n].vars, out2[n].vars)
        out1[n] = replace(out1[n], vars=vars_)
        out2[n] = replace(out2[n], vars=vars_)
    domains = {**p2.domains, **p1.domains}
    proc_domains = {**p2.proc_domains, **p1.proc_domains}
    return (
        replace(q1, procs=out1, domains=domains, proc_domains=proc_domains),
        replace(q2, procs=out2, domains=domains, proc_domains=proc_domains),
    )


def _add_missing(f: Procedure, other: Procedure) -> Procedure:
    missing = [l for l in other.nodes if l not in f.nodes]
    if not missing:
        return f
    nodes, succ = {}, {}
    for label, stmt in f.nodes.items():
        if label == f.exit:
            for m in missing:
                nodes[m] = Skip()
                succ[m] = ()
        nodes[label] = stmt
        succ[label] = f.succ[label]
    return replace(f, nodes=nodes, succ=succ)


def structural_diff(p1: Program, p2: Program) -> NodeMap:
    """Identity map on procedures whose bodies are identical; nothing elsewhere."""
    pairs = {}
    for name, f1 in p1.procs.items():
        f2 = p2.procs.get(name)
        if f2 is not None and f1.same_body(f2):
            for label in f1.nodes:
                pairs[(name, label)] = (name, label)
    return NodeMap(pairs)


@dataclass
class SoundnessReport:
    violations: list
    exhausted: int
    checked: int

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.violations:
            return "violation: " + "; ".join(str(v) for v in self.violations)
        note = f" ({self.exhausted} traces hit the fuel bound)" if self.exhausted else ""
        return f"no violation found (bounded, {self.checked} input stores){note}"


def check_map_soundness(p1: Program, p2: Program, nmap: NodeMap, domains=None, fuel: int = DEFAULT_FUEL) -> SoundnessReport:
    """Bounded falsification of the diff soundness conditions over input stores."""
    domains = domains or _main_domains(p1, p2)
    main = p1.procs[p1.main]
    m1, m2 = nmap.mapped(1), nmap.mapped(2)
    violations, exhausted, checked = [], 0, 0
    for store in input_stores(domains, main.ins):
        checked += 1
        t1, t2 = run(p1, store, fuel), run(p2, store, fuel)
        if EXHAUSTED in (t1.status, t2.status):
            exhausted += 1
        in1 = all((s.proc, s.label) in m1 for s in t1.states)
        in2 = all((s.proc, s.label) in m2 for s in t2.states)
        if in1 != in2:
            violations.append(("stays-in-map mismatch", store))
            continue
        if in1:
            same = t1.status == t2.status and len(t1.states) == len(t2.states) and all(
                nmap.pairs[(a.proc, a.label)] == (b.proc, b.label) and a.store == b.store and a.depth == b.depth
                for a, b in zip(t1.states, t2.states)
            )
            if not same:
                violations.append(("traces differ", store))
    return SoundnessReport(violations, exhausted, checked)


def _main_domains(p1: Program, p2: Program) -> dict:
    from .semantics.oracles import main_domains

    return main_domains(p1, p2)


def label_diff(p1: Program, p2: Program) -> NodeMap:
    """Pair same-labelled nodes with equal statements, then drop pairs whose
    outgoing edges diverge until the map is edge-consistent."""
    pairs = {}
    for name, f1 in p1.procs.items():
        f2 = p2.procs.get(name)
        if f2 is None:
            continue
        for label, stmt in f1.nodes.items():
            if f2.nodes.get(label) == stmt:
                pairs[(name, label)] = (name, label)
    while True:
        nmap = NodeMap(pairs)
        # drop branching-shape mismatches first; they can clear later conflicts
        bad = {a for a, b in pairs.items() if len(p1.procs[a[0]].succ[a[1]]) != len(p2.procs[b[0]].succ[b[1]])}
        bad = bad or {a for a, b in pairs.items() if _diverges(p1, p2, nmap, a, b)}
        if not bad:
            return nmap
        pairs = {a: b for a, b in pairs.items() if a not in bad}


def _diverges(p1, p2, nmap, a, b) -> bool:
    s1 = p1.procs[a[0]].succ[a[1]]
    s2 = p2.procs[b[0]].succ[b[1]]
    if len(s1) != len(s2):
        return True
    img = {(b[0], t) for t in s2}
    pre = {(a[0], s) for s in s1}
    inv = nmap.inverse
    return any((a[0], s) in nmap.pairs and nmap.pairs[(a[0], s)] not in img for s in s1) or any(
        (b[0], t) in inv and inv[(b[0], t)] not in pre for t in s2
    )


def prepare_pair(p1: Program, p2: Program, map_text: str | None = None):
    """Normalize and lower a version pair, then build (or load) the node map."""
    from .ir.lower import globals_to_formals, lower

    n1, n2 = normalize_pair(globals_to_formals(p1), globals_to_formals(p2))
    # extracted loop procedures may differ in formals between versions
    l1, l2 = normalize_pair(lower(n1), lower(n2))
    nmap = load_map(map_text, l1, l2) if map_text else label_diff(l1, l2)
    return l1, l2, nmap
