import itertools

from cia import corpus
from cia.depends import (
    call_graph,
    compute_depends,
    control_dependence,
    postdominators,
)
from cia.ir import parse_program

DIAMOND = """
proc main(a, b) : (r) {
  c: skip; goto t, f;
  t: assume a > 0;
  w: r := b; goto j;
  f: assume !(a > 0);
  j: skip;
}
"""


def test_postdominators_of_diamond():
    proc = parse_program(DIAMOND).procs["main"]
    pdom = postdominators(proc)
    assert pdom["j"] == {"j"}
    assert pdom["c"] == {"c", "j"}
    assert pdom["t"] == {"t", "w", "j"}


def test_control_dependence_of_diamond():
    cd = control_dependence(parse_program(DIAMOND).procs["main"])
    assert cd == {"c": {"t", "w", "f"}}


def test_branch_write_depends_on_guard():
    rel = compute_depends(parse_program(DIAMOND))
    assert rel.depends_on("main", "r") == {"a", "b"}
    nodes = {n for y, n in rel.node["main"] if y == "r"}
    assert {"c", "t", "f", "w"} <= nodes


def test_call_dependencies_follow_callee_positions():
    p = parse_program("""
    proc main(a, b) : (r) { s: r := g(a, b); x: skip; }
    proc g(u, v) : (o) { s: o := u + 1; x: skip; }
    """)
    rel = compute_depends(p)
    assert rel.depends_on("g", "o") == {"u"}
    assert rel.depends_on("main", "r") == {"a"}


def test_recursive_procedures_reach_a_fixpoint():
    p = parse_program("""
    proc main(a, b) : (r) { s: r := g(a, b); x: skip; }
    proc g(u, v) : (o) {
      c: skip; goto t, f;
      t: assume u > 0;
      rec: o := g(v, u); goto x;
      f: assume !(u > 0);
      base: o := 0;
      x: skip;
    }
    """)
    rel = compute_depends(p)
    assert rel.depends_on("g", "o") == {"u", "v"}
    assert rel.depends_on("main", "r") == {"a", "b"}
    assert compute_depends(p).to_json() == rel.to_json()


def test_call_graph_edges(pair):
    l1, _, _ = pair("anytime_chain")
    g = call_graph(l1)
    assert ("main", "f1") in g.edges and ("f4", "f5") in g.edges


def test_dependencies_are_transitive(pair):
    for name in corpus.names():
        l1, _, _ = pair(name)
        rel = compute_depends(l1)
        for proc, pairs in rel.var.items():
            succ = {}
            for y, x in pairs:
                succ.setdefault(y, set()).add(x)
            for y, xs in succ.items():
                for x in xs:
                    assert succ.get(x, set()) <= xs, (name, proc, y, x)


def test_dependency_is_sound_against_execution(pair):
    # changing an input y does not depend on must never change y
    from cia.semantics import oracles
    from cia.semantics.interp import NORMAL, run_proc

    for name in ("coreutils_like", "bugfix", "branch_swap", "loop_sum"):
        l1, l2, _ = pair(name)
        rel = compute_depends(l1)
        for proc, f in l1.procs.items():
            doms = oracles.formal_domains(l1, l2, proc)
            stores = [dict(zip(f.ins, c)) for c in itertools.product(*(doms[x] for x in f.ins))]
            finals = {}
            for s in stores:
                t = run_proc(l1, proc, s, 2000)
                if t.status == NORMAL:
                    finals[tuple(s.values())] = t.final.store
            for y in f.outs:
                dep = rel.depends_on(proc, y)
                for a, b in itertools.combinations(finals, 2):
                    same = all(u == v for x, u, v in zip(f.ins, a, b) if x in dep)
                    if same:
                        assert finals[a].get(y) == finals[b].get(y), (name, proc, y)


def test_coreutils_golden_dependencies(pair):
    l1, _, _ = pair("coreutils_like")
    rel = compute_depends(l1)
    ins = lambda f, y: rel.depends_on(f, y) & set(l1.procs[f].ins)
    assert ins("setlocale", "r") == {"lc"}
    assert ins("locale_ok", "r") == {"lc"}
    assert ins("print_name", "r") == {"locale"}
    assert ins("print_product_info", "printed") == {"name", "version", "lc"}
    assert ins("print_product_info", "line_delim") == set()
