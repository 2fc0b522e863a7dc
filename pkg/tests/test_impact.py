import json
from pathlib import Path

import pytest

from cia import corpus
from cia.impact import (
    ASSUMED,
    EquivalenceSet,
    dcia,
    format_report,
    reduction_pct,
    report,
    sem_dcia,
    version_fixpoint,
)
from cia.depends import compute_depends
from cia.semantics.oracles import oracle_impacted, uncovered

GOLDEN = Path(__file__).parent / "golden"


def hand_eq():
    return EquivalenceSet.from_json(json.loads((GOLDEN / "coreutils_eq.json").read_text()))


def test_identical_pair_has_no_impact(pair):
    l1, l2, nmap = pair("identical")
    assert dcia(l1, l2, nmap).nodes == set()


def test_empty_equivalences_match_dataflow(pair):
    for name in corpus.names():
        l1, l2, nmap = pair(name)
        assert sem_dcia(l1, l2, nmap, EquivalenceSet()) == dcia(l1, l2, nmap)


def test_unmapped_nodes_are_impacted(pair):
    for name in corpus.names():
        l1, l2, nmap = pair(name)
        res = sem_dcia(l1, l2, nmap, hand_eq() if name == "coreutils_like" else None)
        for n in l1.all_nodes():
            if n not in nmap.pairs:
                assert (1,) + n in res.nodes
        for n in l2.all_nodes():
            if not nmap.is_mapped(2, n):
                assert (2,) + n in res.nodes


def test_coreutils_dataflow_golden(pair):
    l1, l2, nmap = pair("coreutils_like")
    want = {tuple(x) for x in json.loads((GOLDEN / "coreutils_dcia.json").read_text())["impacted_pairs"]}
    assert dcia(l1, l2, nmap).impacted_pairs(nmap) == want
    assert len(want) == 32


def test_coreutils_with_equivalences(pair):
    l1, l2, nmap = pair("coreutils_like")
    res = sem_dcia(l1, l2, nmap, hand_eq())
    assert res.impacted_pairs(nmap) == {("print_minor_version", "pr")}
    assert ("print_product_info", "line_delim") in res.summs
    assert ("print_product_info", "printed") not in res.summs


@pytest.mark.parametrize("name", ["coreutils_like", "bugfix", "branch_swap", "loop_sum", "heap_map"])
def test_dataflow_is_sound(pair, name):
    l1, l2, nmap = pair(name)
    res = dcia(l1, l2, nmap)
    assert uncovered(oracle_impacted(l1, l2, nmap), res.nodes, nmap) == set()


def test_more_equivalences_never_add_impact(pair):
    l1, l2, nmap = pair("coreutils_like")
    eq = hand_eq()
    rows = sorted(eq.pre.items()) + sorted(eq.summ.items())
    prev = dcia(l1, l2, nmap)
    acc = EquivalenceSet()
    for i, (key, t) in enumerate(rows):
        target = acc.pre if i < len(eq.pre) else acc.summ
        target[key] = t
        cur = sem_dcia(l1, l2, nmap, acc)
        assert cur.issubset(prev)
        prev = cur


def test_fixpoint_is_stable_when_reseeded(pair):
    l1, l2, nmap = pair("loop_sum")
    d = compute_depends(l1)
    first = version_fixpoint(l1, nmap.mapped(1), d, EquivalenceSet())
    again = version_fixpoint(l1, nmap.mapped(1), d, EquivalenceSet(), seed=first)
    assert again == first


def test_equivalence_set_json_round_trip():
    eq = hand_eq()
    assert set(eq.pre.values()) == {ASSUMED}
    assert EquivalenceSet.from_json(eq.to_json()) == eq
    assert len(eq + EquivalenceSet(summ={("g", "y"): ASSUMED})) == len(eq) + 1


def test_report_schema_and_counts(pair):
    l1, l2, nmap = pair("coreutils_like")
    base = dcia(l1, l2, nmap)
    rep = report(sem_dcia(l1, l2, nmap, hand_eq()), nmap, base)
    assert rep["schema"] == "cia-report/1"
    assert rep["counts"] == {"dcia": 32, "sem": 1, "reduction_pct": 96.88}
    assert {"version", "proc", "label", "mapped"} == set(rep["impacted_nodes"][0])
    assert "dcia=32 sem=1" in format_report(rep)


def test_reduction_pct():
    assert reduction_pct(0, 0) == 0.0
    assert reduction_pct(4, 1) == 75.0
