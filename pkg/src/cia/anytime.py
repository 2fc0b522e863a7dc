"""The anytime loop: widen the analyzed scope around the change, infer
equivalences there, and re-run the semantic impact analysis."""
from __future__ import annotations

from dataclasses import dataclass, field

from .depends import compute_depends
from .impact import DATAFLOW, EquivalenceSet, ImpactResult, dcia, sem_dcia
from .ir.ast import Program
from .productequiv import CheckerConfig, external_callsites, houdini_infer


def _neighbors(p1: Program, p2: Program):
    callees: dict = {}
    callers: dict = {}
    for p in (p1, p2):
        for f, g in p.call_edges():
            callees.setdefault(f, set()).add(g)
            callers.setdefault(g, set()).add(f)
    return callees, callers


def procs_within(delta, p1: Program, p2: Program, k: int) -> set:
    """Procedures within ``k`` widening steps of ``delta``.

    One step adds callers and callees, plus the other callers of those
    callees, since a callee's precondition can only be inferred once all of
    its callsites are visible.
    """
    callees, callers = _neighbors(p1, p2)
    scope = set(delta)
    for _ in range(max(k, 0)):
        down = set().union(*(callees.get(f, ()) for f in scope))
        up = set().union(*(callers.get(f, ()) for f in scope))
        side = set().union(*(callers.get(g, ()) for g in down))
        grown = scope | down | up | side
        if grown == scope:
            break
        scope = grown
    return scope


@dataclass
class ScopedView:
    program: Program
    scope: frozenset
    external: dict  # in-scope proc -> has callsites outside the scope


def drop_procs(p: Program, outside) -> ScopedView:
    scope = frozenset(set(p.procs) - set(outside))
    flags = external_callsites(p, p, scope)
    return ScopedView(p, scope, flags)


@dataclass
class AnytimeState:
    k: int
    scope: frozenset
    eq: EquivalenceSet
    result: ImpactResult


@dataclass
class AnytimeRun:
    result: ImpactResult
    trace: list = field(default_factory=list)

    @property
    def eq(self) -> EquivalenceSet:
        return self.trace[-1].eq if self.trace else EquivalenceSet()


def harvest(p1: Program, p2: Program, nmap, result: ImpactResult) -> EquivalenceSet:
    """Equivalences read off the non-impacted formals and summaries."""
    pre, summ = {}, {}
    for name, f in p1.procs.items():
        sites_mapped = all(
            nmap.is_mapped(v, (caller, label))
            for v, p in ((1, p1), (2, p2))
            for caller, label, _ in p.callsites_of(name)
        )
        if sites_mapped:
            for x in f.ins:
                if (name, x) not in result.vars:
                    pre[(name, x)] = DATAFLOW
        for y in f.outs:
            if (name, y) not in result.summs:
                summ[(name, y)] = DATAFLOW
    return EquivalenceSet(pre, summ)


def sem_dcia_anytime(
    p1: Program,
    p2: Program,
    nmap,
    delta=None,
    k_max: int | None = None,
    config: CheckerConfig | None = None,
) -> AnytimeRun:
    """Run the anytime loop for iterations k = 0..k_max (``None`` for no bound).

    ``k_max = -1`` stops before the loop and returns the plain dataflow result.
    """
    deps = (compute_depends(p1), compute_depends(p2))
    delta = set(nmap.procs_delta(p1, p2) if delta is None else delta)
    procs = set(p1.procs)
    eq = EquivalenceSet()
    result = dcia(p1, p2, nmap, deps)
    trace = [AnytimeState(-1, frozenset(delta), eq, result)]
    scope = set(delta)
    k = 0
    while delta and scope < procs:
        if k_max is not None and k > k_max:
            break
        eq = eq + harvest(p1, p2, nmap, result)
        grown = procs_within(delta, p1, p2, k)
        if k > 0 and grown == scope:
            break  # the rest of the program is unreachable from the change
        scope = grown
        view = drop_procs(p1, procs - scope)
        flags = external_callsites(p1, p2, view.scope)
        eq = houdini_infer(p1, p2, view.scope, eq, config, flags=flags, deps=deps)
        result = sem_dcia(p1, p2, nmap, eq, deps)
        trace.append(AnytimeState(k, frozenset(scope), eq, result))
        k += 1
    return AnytimeRun(result, trace)
