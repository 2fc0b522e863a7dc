import pytest

from cia import corpus
from cia.anytime import drop_procs, harvest, procs_within, sem_dcia_anytime
from cia.impact import DATAFLOW, dcia


def test_scope_growth_on_the_chain(pair):
    l1, l2, nmap = pair("anytime_chain")
    delta = nmap.procs_delta(l1, l2)
    assert delta == {"main"}
    assert procs_within(delta, l1, l2, 0) == {"main"}
    assert procs_within(delta, l1, l2, 1) == {"main", "f1"}
    assert procs_within(delta, l1, l2, 99) == set(l1.procs)


def test_step_adds_the_other_callers_of_callees(pair):
    l1, l2, nmap = pair("patho_chain_n2")
    assert procs_within({"f4"}, l1, l2, 1) == {"f4", "f3", "f1", "main"}


def test_drop_procs_flags_external_callsites(pair):
    l1, _, _ = pair("patho_chain_n2")
    view = drop_procs(l1, {"main", "f2", "f3"})
    assert view.scope == {"f1", "f4"}
    assert view.external["f1"] is True
    assert view.external["f4"] is True
    assert drop_procs(l1, set()).external["f1"] is False


def test_negative_bound_returns_dataflow(pair):
    l1, l2, nmap = pair("coreutils_like")
    run = sem_dcia_anytime(l1, l2, nmap, k_max=-1)
    assert [s.k for s in run.trace] == [-1]
    assert run.result == dcia(l1, l2, nmap)


@pytest.mark.parametrize("name", corpus.names())
def test_iterations_only_shrink_the_impact(pair, name):
    l1, l2, nmap = pair(name)
    run = sem_dcia_anytime(l1, l2, nmap)
    for before, after in zip(run.trace, run.trace[1:]):
        assert after.result.issubset(before.result)
        assert before.eq.issubset(after.eq)
        assert before.scope <= after.scope
    assert run.result == run.trace[-1].result


def test_chain_example_collapses_at_first_iteration(pair):
    l1, l2, nmap = pair("anytime_chain")
    sizes = [len(s.result.impacted_pairs(nmap)) for s in sem_dcia_anytime(l1, l2, nmap).trace]
    assert sizes[0] == 10 and sizes[1] == 0


def test_pathological_chain_needs_a_wide_scope(pair):
    l1, l2, nmap = pair("patho_chain_n2")
    trace = sem_dcia_anytime(l1, l2, nmap).trace
    sizes = [len(s.result.impacted_pairs(nmap)) for s in trace]
    assert sizes == [11, 11, 11, 0]
    assert trace[-1].scope == frozenset(l1.procs)


def test_bounded_run_stops_early(pair):
    l1, l2, nmap = pair("patho_chain_n2")
    run = sem_dcia_anytime(l1, l2, nmap, k_max=0)
    assert [s.k for s in run.trace] == [-1, 0]


def test_harvest_only_uses_fully_mapped_callsites(pair):
    l1, l2, nmap = pair("coreutils_like")
    eq = harvest(l1, l2, nmap, dcia(l1, l2, nmap))
    assert set(eq.pre.values()) <= {DATAFLOW}
    # the call to print_header changed, so its inputs get no precondition
    assert not nmap.is_mapped(1, ("print_product_info", "hdr"))
    assert not any(f == "print_header" for f, _ in eq.pre)
    assert ("setlocale", "r") in eq.summ
