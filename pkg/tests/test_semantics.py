import pytest

from cia.diffmap import NodeMap
from cia.ir import parse_program
from cia.semantics import (
    BLOCKED,
    EXHAUSTED,
    NORMAL,
    MapVal,
    eval_expr,
    format_trace,
    input_stores,
    oracle_impacted,
    oracle_preequiv,
    oracle_summaryequiv,
    run,
    run_proc,
    wrap,
)
from cia.ir import Const, Op, Var


def test_wrap_is_signed_8_bit():
    assert wrap(127) == 127
    assert wrap(128) == -128
    assert wrap(-129) == 127
    assert wrap(300, 16) == 300


def test_unbound_reads_zero():
    assert eval_expr(Op("+", (Var("u"), Const(3))), {}) == 3


def test_maps():
    m = eval_expr(Op("update", (Var("m"), Const(1), Const(7))), {})
    assert isinstance(m, MapVal)
    assert eval_expr(Op("select", (Var("m"), Const(1))), {"m": m}) == 7
    assert eval_expr(Op("select", (Var("m"), Const(2))), {"m": m}) == 0


def test_phi_takes_most_recent_binding():
    p = parse_program("""
    proc main(a) : (r) {
      b: skip; goto t, f;
      t: assume a > 0;
      u: x1 := 10; goto j;
      f: assume !(a > 0);
      v: x2 := 20;
      j: r := phi(x1, x2);
      x: skip;
    }""")
    assert run(p, {"a": 1}).final.store["r"] == 10
    assert run(p, {"a": 0}).final.store["r"] == 20


def test_division_by_zero_blocks():
    p = parse_program("proc main(a) : (r) { d: r := 4 / a; x: skip; }")
    assert run(p, {"a": 0}).status == BLOCKED
    assert run(p, {"a": 2}).final.store["r"] == 2


def test_fuel_exhaustion():
    p = parse_program("proc main() { a: call main$r(); x: skip; } proc main$r() { b: call main$r(); y: skip; }")
    assert run(p, {}, fuel=50).status == EXHAUSTED


def test_call_returns_outputs():
    p = parse_program("""
    proc main(a) : (r) { c: r := inc(a); x: skip; }
    proc inc(v) : (o) { s: o := v + 1; y: skip; }
    """)
    t = run(p, {"a": 4})
    assert t.status == NORMAL and t.final.store["r"] == 5
    assert max(s.depth for s in t.states) == 1
    assert run_proc(p, "inc", {"v": 1}).final.store["o"] == 2


def test_trace_dump_format():
    p = parse_program("proc main(a) { s: b := a; x: skip; }")
    text = format_trace(run(p, {"a": 1}))
    assert text.splitlines()[0] == "main:s {a=1} 0"
    assert text.splitlines()[-1] == "# normal"


def test_input_stores_enumerates_product():
    stores = list(input_stores({"a": (0, 1), "b": (5, 6, 7)}, ["a", "b"]))
    assert len(stores) == 6 and {"a": 1, "b": 7} in stores


V1 = """
main main;
domain a in {0, 1, 2};
proc main(a) : (r) { c: r := g(a, 1); u: o := r; x: skip; }
proc g(p, q) : (s) { w: s := p * 0 + q; y: skip; }
"""
V2 = V1.replace("c: r := g(a, 1);", "c: r := g(a + 1, 1);")


def _ident_map(p1, p2, drop=()):
    pairs = {}
    for name, f in p1.procs.items():
        for label in f.nodes:
            if (name, label) not in drop:
                pairs[(name, label)] = (name, label)
    return NodeMap(pairs)


def test_oracle_impacted_basic():
    p1, p2 = parse_program(V1), parse_program(V2)
    nmap = _ident_map(p1, p2, drop={("main", "c")})
    verdicts = oracle_impacted(p1, p2, nmap)
    assert verdicts[(1, "main", "c")] == "impacted"
    # w reads p, whose values differ even though s does not
    assert verdicts[(1, "g", "w")] == "impacted"
    assert verdicts[(1, "main", "u")] == "not-impacted"


def test_oracle_equivalences():
    p1, p2 = parse_program(V1), parse_program(V2)
    nmap = _ident_map(p1, p2, drop={("main", "c")})
    assert oracle_preequiv(p1, p2, nmap, "g", "p") == "fails"
    assert oracle_preequiv(p1, p2, nmap, "g", "q") == "holds"
    assert oracle_summaryequiv(p1, p2, "g", "s", {"q"}) == "holds"


def test_oracle_unknown_on_exhaustion():
    p1 = parse_program("proc main() : (r) { c: r := f(); x: skip; } proc f() : (o) { a: o := 1; y: skip; }")
    p2 = parse_program(
        "proc main() : (r) { c: r := f(); x: skip; } proc f() : (o) { a: o := 1; b: o := f(); y: skip; }"
    )
    nmap = NodeMap({("main", "c"): ("main", "c"), ("main", "x"): ("main", "x")})
    verdicts = oracle_impacted(p1, p2, nmap, fuel=200)
    assert verdicts[(1, "main", "x")] == "unknown"
    assert oracle_summaryequiv(p1, p2, "f", "o", set(), fuel=200) == "unknown"


@pytest.mark.parametrize("a", [0, 1, 2])
def test_run_is_deterministic(a):
    p = parse_program(V1)
    assert run(p, {"a": a}).states == run(p, {"a": a}).states
