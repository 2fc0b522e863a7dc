"""``cia`` command line: analyze, diff, run, oracle."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .anytime import sem_dcia_anytime
from .depends import compute_depends, dep_of
from .diffmap import MapError, NodeMap, prepare_pair
from .impact import EquivalenceSet, dcia, format_report, report, sem_dcia
from .ir import IRError, parse_file, validate
from .ir.lower import lower
from .productequiv import DEFAULT_CHECK_FUEL, DEFAULT_ENUM_BUDGET, CheckerConfig
from .semantics.interp import DEFAULT_FUEL, format_trace, run
from .semantics.oracles import oracle_impacted, oracle_preequiv, oracle_summaryequiv

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _k(text: str):
    if text in ("inf", "infinity", "∞"):
        return None
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'inf', got {text!r}")
    if k < -1:
        raise argparse.ArgumentTypeError("k must be >= -1")
    return k


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _env(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return _positive(raw)
    except (ValueError, argparse.ArgumentTypeError):
        raise InputError(f"{name} must be a positive integer, got {raw!r}")


def _load(path: str):
    try:
        p = parse_file(path)
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}")
    except IRError as e:
        raise InputError(f"{path}:{e}")
    problems = validate(p)
    if problems:
        raise InputError(f"{path}: " + "; ".join(problems))
    return p


def _pair(args):
    p1, p2 = _load(args.v1), _load(args.v2)
    map_text = None
    if getattr(args, "map", None):
        try:
            map_text = Path(args.map).read_text()
        except OSError as e:
            raise InputError(f"{args.map}: {e.strerror or e}")
    try:
        return prepare_pair(p1, p2, map_text)
    except (json.JSONDecodeError, KeyError) as e:
        raise InputError(f"{args.map}: malformed map file ({e})")
    except (IRError, MapError) as e:
        raise InputError(str(e))


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text if text.endswith("\n") else text + "\n")


def cmd_analyze(args) -> int:
    l1, l2, nmap = _pair(args)
    fuel = args.fuel or _env("CIA_FUEL", DEFAULT_CHECK_FUEL)
    budget = args.enum_budget or _env("CIA_ENUM_BUDGET", DEFAULT_ENUM_BUDGET)
    config = CheckerConfig(fuel=fuel, enum_budget=budget, backend=args.checker)
    deps = (compute_depends(l1), compute_depends(l2))
    base = dcia(l1, l2, nmap, deps)
    iterations = []
    if args.mode == "dcia":
        result, eq = base, EquivalenceSet()
    elif args.eq:
        try:
            eq = EquivalenceSet.from_json(json.loads(Path(args.eq).read_text()))
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise InputError(f"{args.eq}: cannot read equivalences ({e})")
        result = sem_dcia(l1, l2, nmap, eq, deps)
    else:
        anytime = sem_dcia_anytime(l1, l2, nmap, k_max=args.k, config=config)
        result, eq, iterations = anytime.result, anytime.eq, anytime.trace
    rep = report(result, nmap, base)
    rep["mode"] = args.mode
    _write(args.output, json.dumps(rep, indent=2) if args.report == "json" else format_report(rep))
    if args.dump_depends:
        data = {"v1": deps[0].to_json(), "v2": deps[1].to_json()}
        _write(args.dump_depends, json.dumps(data, indent=2))
    if args.dump_equivs:
        _write(args.dump_equivs, json.dumps(eq.to_json(), indent=2))
    if args.emit_iterations:
        out = Path(args.emit_iterations)
        out.mkdir(parents=True, exist_ok=True)
        for st in iterations:
            r = report(st.result, nmap, base)
            r["iteration"] = st.k
            r["scope"] = sorted(st.scope)
            tag = "dcia" if st.k < 0 else f"k{st.k}"
            (out / f"iteration_{tag}.json").write_text(json.dumps(r, indent=2) + "\n")
    return EXIT_OK


def cmd_diff(args) -> int:
    _, _, nmap = _pair(args)
    _write(args.output, nmap.to_json())
    return EXIT_OK


def _inputs(pairs, p):
    store = {}
    for item in pairs or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"expected name=value, got {item!r}")
        try:
            store[name] = int(value)
        except ValueError:
            raise InputError(f"input {name!r} must be an integer")
    main = p.procs[p.main]
    unknown = set(store) - set(main.ins)
    if unknown:
        raise InputError(f"{p.main} has no inputs {sorted(unknown)}")
    for x in main.ins:
        store.setdefault(x, 0)
    return store


def cmd_run(args) -> int:
    p = _load(args.program)
    try:
        low = lower(p) if args.lowered else p
    except IRError as e:
        raise InputError(str(e))
    trace = run(low, _inputs(args.input, low), args.fuel or _env("CIA_FUEL", DEFAULT_FUEL))
    _write(args.output, format_trace(trace))
    return EXIT_OK


def cmd_oracle(args) -> int:
    l1, l2, nmap = _pair(args)
    fuel = args.fuel or _env("CIA_FUEL", DEFAULT_FUEL)
    verdicts = oracle_impacted(l1, l2, nmap, fuel=fuel)
    d1, d2 = compute_depends(l1), compute_depends(l2)
    equivs = []
    for name, f in l1.procs.items():
        if name != l1.main:
            for x in f.ins:
                equivs.append({"kind": "pre", "proc": name, "var": x,
                               "verdict": oracle_preequiv(l1, l2, nmap, name, x, fuel=fuel)})
        for y in f.outs:
            v = oracle_summaryequiv(l1, l2, name, y, dep_of(d1, d2, name, y), fuel=fuel)
            equivs.append({"kind": "summ", "proc": name, "var": y, "verdict": v})
    nodes = [
        {"version": v, "proc": f, "label": n, "mapped": nmap.is_mapped(v, (f, n)), "verdict": verdict}
        for (v, f, n), verdict in sorted(verdicts.items())
    ]
    if args.report == "json":
        text = json.dumps({"schema": "cia-oracle/1", "nodes": nodes, "equivalences": equivs}, indent=2)
    else:
        lines = [f"v{r['version']} {r['proc']}:{r['label']} {r['verdict']}" for r in nodes
                 if r["mapped"] and r["verdict"] != "not-impacted"]
        lines += [f"{e['kind']} {e['proc']}.{e['var']} {e['verdict']}" for e in equivs]
        text = "\n".join(lines)
    _write(args.output, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cia", description="Change-impact analysis for two program versions.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log checker decisions")
    sub = ap.add_subparsers(dest="command", required=True)

    def pair_args(sp):
        sp.add_argument("--v1", required=True, help="first version (.ir)")
        sp.add_argument("--v2", required=True, help="second version (.ir)")
        sp.add_argument("--map", help="node map JSON (default: match labels and statements)")
        sp.add_argument("-o", "--output", help="write the result here instead of stdout")

    an = sub.add_parser("analyze", help="compute impacted nodes")
    pair_args(an)
    an.add_argument("--mode", choices=("dcia", "sem"), default="sem")
    an.add_argument("--k", type=_k, default=None, help="anytime iterations: N or 'inf' (default)")
    an.add_argument("--eq", help="use these equivalence facts (JSON) instead of inferring them")
    an.add_argument("--report", choices=("json", "text"), default="json")
    an.add_argument("--dump-depends", metavar="FILE")
    an.add_argument("--dump-equivs", metavar="FILE")
    an.add_argument("--emit-iterations", metavar="DIR")
    an.add_argument("--fuel", type=_positive)
    an.add_argument("--enum-budget", type=_positive)
    an.add_argument("--checker", choices=("enum", "smt"), default="enum")
    an.set_defaults(func=cmd_analyze)

    df = sub.add_parser("diff", help="emit the node map")
    pair_args(df)
    df.set_defaults(func=cmd_diff)

    rn = sub.add_parser("run", help="execute a program and dump its trace")
    rn.add_argument("program")
    rn.add_argument("--input", action="append", metavar="NAME=VALUE")
    rn.add_argument("--fuel", type=_positive)
    rn.add_argument("--lowered", action="store_true", help="run the lowered program")
    rn.add_argument("-o", "--output")
    rn.set_defaults(func=cmd_run)

    oc = sub.add_parser("oracle", help="ground-truth verdicts by exhaustive execution")
    pair_args(oc)
    oc.add_argument("--fuel", type=_positive)
    oc.add_argument("--report", choices=("json", "text"), default="text")
    oc.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except InputError as e:
        print(f"cia: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001
        print(f"cia: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
