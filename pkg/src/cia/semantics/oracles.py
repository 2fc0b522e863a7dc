"""Exhaustive ground-truth checks over finite input domains.

Verdicts are strings: ``impacted`` / ``not-impacted`` / ``unknown`` for nodes
and ``holds`` / ``fails`` / ``unknown`` for equivalence facts. Fuel exhaustion
never produces a definite verdict.
"""
from __future__ import annotations

from ..ir.ast import Program, map_typed, read_set
from .interp import BOTTOM, MapVal, DEFAULT_FUEL, EXHAUSTED, NORMAL, input_stores, run, run_proc

IMPACTED, NOT_IMPACTED, UNKNOWN = "impacted", "not-impacted", "unknown"
HOLDS, FAILS = "holds", "fails"


MAP_DOMAIN = (MapVal(), MapVal(((0, 1),)), MapVal(((1, 1),)))


def main_domains(p1: Program, p2: Program | None = None) -> dict:
    return formal_domains(p1, p2 or p1, p1.main)


def formal_domains(p1: Program, p2: Program, proc: str) -> dict:
    """Finite entry domain per input formal; map-typed formals get a few small maps."""
    vals = tuple(sorted(set(p1.value_domain()) | set(p2.value_domain())))
    maps = map_typed(p1)[proc] | map_typed(p2)[proc]
    out = {}
    for x in p1.procs[proc].ins:
        if x in maps and (proc, x) not in p1.proc_domains and x not in p1.domains:
            out[x] = MAP_DOMAIN
        elif proc == p1.main or (proc, x) in p1.proc_domains:
            out[x] = p1.formal_domain(proc, x)
        elif (proc, x) in p2.proc_domains:
            out[x] = p2.proc_domains[(proc, x)]
        else:
            out[x] = vals
    return out


def _pair_traces(p1, p2, domains, fuel):
    main = p1.procs[p1.main]
    for store in input_stores(domains, main.ins):
        yield store, run(p1, store, fuel), run(p2, store, fuel)


def _seq(visits, node, x):
    return [s.get(x, BOTTOM) for s in visits.get(node, ())]


def oracle_impacted(p1: Program, p2: Program, nmap, domains=None, fuel: int = DEFAULT_FUEL) -> dict:
    """Per-node verdicts keyed by ``(version, proc, label)``."""
    domains = domains or main_domains(p1, p2)
    verdict = {}
    for node in p1.all_nodes():
        if node not in nmap.pairs:
            verdict[(1, *node)] = IMPACTED
    image = set(nmap.pairs.values())
    for node in p2.all_nodes():
        if node not in image:
            verdict[(2, *node)] = IMPACTED
    pending = dict(nmap.pairs)
    unknown = set()
    for _, t1, t2 in _pair_traces(p1, p2, domains, fuel):
        if not pending:
            break
        exhausted = EXHAUSTED in (t1.status, t2.status)
        v1, v2 = t1.visits(), t2.visits()
        for a, b in list(pending.items()):
            reads = read_set(p1.stmt_at(*a))
            differs = any(_seq(v1, a, x) != _seq(v2, b, x) for x in reads)
            if exhausted:
                unknown.add(a)
            elif differs:
                verdict[(1, *a)] = verdict[(2, *b)] = IMPACTED
                del pending[a]
    for a, b in pending.items():
        v = UNKNOWN if a in unknown else NOT_IMPACTED
        verdict[(1, *a)] = verdict[(2, *b)] = v
    return verdict


def oracle_preequiv(p1: Program, p2: Program, nmap, proc: str, formal: str, domains=None, fuel: int = DEFAULT_FUEL) -> str:
    """Whether every run pair from a common input passes equal value sequences for ``formal``."""
    domains = domains or main_domains(p1, p2)
    e1 = (proc, p1.procs[proc].entry)
    e2 = nmap.pairs.get(e1, (proc, p2.procs[proc].entry))
    unknown = False
    for _, t1, t2 in _pair_traces(p1, p2, domains, fuel):
        if EXHAUSTED in (t1.status, t2.status):
            unknown = True
            continue
        if _seq(t1.visits(), e1, formal) != _seq(t2.visits(), e2, formal):
            return FAILS
    return UNKNOWN if unknown else HOLDS


def oracle_summaryequiv(
    p1: Program, p2: Program, proc: str, out: str, dep, domains=None, fuel: int = DEFAULT_FUEL
) -> str:
    """Check equal outputs from entry stores agreeing on ``dep``, in both directions."""
    ins = p1.procs[proc].ins
    domains = domains or formal_domains(p1, p2, proc)
    dep = [x for x in ins if x in set(dep)]
    stores = list(input_stores(domains, ins))
    progs = {1: p1, 2: p2}
    cache: dict = {}

    def result(version, store):
        key = (version, tuple(store[x] for x in ins))
        if key not in cache:
            t = run_proc(progs[version], proc, store, fuel)
            cache[key] = (t.status, t.final.store.get(out, BOTTOM) if t.status == NORMAL else None)
        return cache[key]

    unknown = False
    for i, j in ((1, 2), (2, 1)):
        for s1 in stores:
            st1, y1 = result(i, s1)
            if st1 == EXHAUSTED:
                unknown = True
                continue
            if st1 != NORMAL:
                continue
            for s3 in stores:
                if any(s1[x] != s3[x] for x in dep):
                    continue
                st3, y3 = result(j, s3)
                if st3 == EXHAUSTED:
                    unknown = True
                elif st3 != NORMAL or y1 != y3:
                    return FAILS
    return UNKNOWN if unknown else HOLDS


def uncovered(verdicts: dict, impacted: set, nmap) -> set:
    """Oracle-impacted nodes an analysis result misses.

    A mapped pair is covered when either of its two nodes is in ``impacted``.
    """
    out = set()
    for key, v in verdicts.items():
        if v != IMPACTED:
            continue
        version, node = key[0], key[1:]
        if version == 1 and node in nmap.pairs:
            other = (2,) + nmap.pairs[node]
        elif version == 2 and node in nmap.inverse:
            other = (1,) + nmap.inverse[node]
        else:
            other = key
        if key not in impacted and other not in impacted:
            out.add(key)
    return out
