"""Parser for the labeled-node textual IR (``.ir`` files)."""
from __future__ import annotations

import re

from .ast import (
    FUNC_ARITY,
    Assign,
    Assume,
    Call,
    Const,
    Op,
    Program,
    Skip,
    Var,
    make_procedure,
)


class IRError(ValueError):
    pass


class ParseError(IRError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*|\#[^\n]*)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>:=|==|!=|<=|>=|&&|\|\||[-+*/%<>!(){},;:.])
    """,
    re.VERBOSE,
)

KEYWORDS = {"proc", "goto", "skip", "assume", "call", "true", "false"}


def tokenize(text: str):
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        val = m.group()
        if kind != "ws":
            toks.append((kind, val, line, pos - line_start + 1))
        nl = val.count("\n")
        if nl:
            line += nl
            line_start = pos + val.rfind("\n") + 1
        pos = m.end()
    toks.append(("eof", "", line, pos - line_start + 1))
    return toks


_BINARY_LEVELS = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/", "%")]


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    def peek(self, off=0):
        return self.toks[min(self.i + off, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok[2], tok[3])

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def at(self, val, off=0):
        tok = self.peek(off)
        return tok[0] in ("op", "id") and tok[1] == val

    def expect(self, val):
        tok = self.next()
        if tok[1] != val or tok[0] not in ("op", "id"):
            self.i -= 1
            self.error(f"expected {val!r}, found {tok[1] or 'end of input'!r}")
        return tok

    def ident(self):
        tok = self.next()
        if tok[0] != "id" or tok[1] in KEYWORDS:
            self.i -= 1
            self.error(f"expected identifier, found {tok[1] or 'end of input'!r}")
        return tok[1]

    def int_lit(self):
        neg = False
        if self.at("-"):
            self.next()
            neg = True
        tok = self.next()
        if tok[0] != "num":
            self.i -= 1
            self.error("expected integer literal")
        return -int(tok[1]) if neg else int(tok[1])

    def ident_list(self, close):
        names = []
        if not self.at(close):
            names.append(self.ident())
            while self.at(","):
                self.next()
                names.append(self.ident())
        return names

    # expressions
    def expr(self, level=0):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        lhs = self.expr(level + 1)
        while self.peek()[0] == "op" and self.peek()[1] in _BINARY_LEVELS[level]:
            op = self.next()[1]
            rhs = self.expr(level + 1)
            lhs = Op(op, (lhs, rhs))
        return lhs

    def unary(self):
        if self.at("!"):
            self.next()
            return Op("!", (self.unary(),))
        if self.at("-"):
            self.next()
            if self.peek()[0] == "num":
                return Const(-int(self.next()[1]))
            return Op("neg", (self.unary(),))
        return self.atom()

    def atom(self):
        tok = self.peek()
        if tok[0] == "num":
            self.next()
            return Const(int(tok[1]))
        if self.at("("):
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if tok[0] == "id" and tok[1] in ("true", "false"):
            self.next()
            return Const(1 if tok[1] == "true" else 0)
        if tok[0] == "id" and tok[1] in FUNC_ARITY and self.at("(", 1):
            self.next()
            self.next()
            args = self.expr_list(")")
            self.expect(")")
            if len(args) != FUNC_ARITY[tok[1]]:
                self.error(f"arity mismatch: {tok[1]} expects {FUNC_ARITY[tok[1]]} arguments", tok)
            return Op(tok[1], tuple(args))
        return Var(self.ident())

    def expr_list(self, close):
        args = []
        if not self.at(close):
            args.append(self.expr())
            while self.at(","):
                self.next()
                args.append(self.expr())
        return args

    # statements
    def call_rest(self, rets, tok):
        callee = self.ident()
        self.expect("(")
        args = self.expr_list(")")
        self.expect(")")
        self.call_sites.append((callee, len(args), len(rets), tok))
        return Call(callee, tuple(args), tuple(rets))

    def stmt(self):
        tok = self.peek()
        if self.at("skip"):
            self.next()
            return Skip()
        if self.at("assume"):
            self.next()
            return Assume(self.expr())
        if self.at("call"):
            self.next()
            rets = []
            if not self.at("(", 1):
                rets = self.ident_list(":=")
                self.expect(":=")
            return self.call_rest(rets, tok)
        if tok[0] == "id" and self.at("(", 1):
            return self.call_rest([], tok)
        targets = self.ident_list(":=")
        self.expect(":=")
        nxt = self.peek()
        is_call = (
            nxt[0] == "id"
            and nxt[1] not in FUNC_ARITY
            and nxt[1] not in KEYWORDS
            and self.at("(", 1)
        )
        if len(targets) > 1 or is_call:
            return self.call_rest(targets, tok)
        return Assign(targets[0], self.expr())

    def proc(self):
        self.expect("proc")
        name_tok = self.peek()
        name = self.ident()
        self.expect("(")
        ins = self.ident_list(")")
        self.expect(")")
        outs = []
        if self.at(":"):
            self.next()
            self.expect("(")
            outs = self.ident_list(")")
            self.expect(")")
        self.expect("{")
        nodes, gotos, order = {}, {}, []
        while not self.at("}"):
            ltok = self.peek()
            label = self.ident()
            if label in nodes:
                self.error(f"duplicate label {label!r} in procedure {name!r}", ltok)
            self.expect(":")
            nodes[label] = self.stmt()
            self.expect(";")
            order.append(label)
            if self.at("goto"):
                self.next()
                gotos[label] = (self.ident_list(";"), ltok)
                self.expect(";")
        self.expect("}")
        if not order:
            self.error(f"procedure {name!r} has no nodes", name_tok)
        succ = {}
        for idx, label in enumerate(order):
            if label in gotos:
                targets, ltok = gotos[label]
                for t in targets:
                    if t not in nodes:
                        self.error(f"unknown goto target {t!r}", ltok)
                succ[label] = tuple(targets)
            elif idx + 1 < len(order):
                succ[label] = (order[idx + 1],)
            else:
                succ[label] = ()
        exit_label = order[-1]
        if not isinstance(nodes[exit_label], Skip) or succ[exit_label]:
            self.error(f"procedure {name!r}: last node must be a skip without goto (exit)", name_tok)
        dup = set(ins) & set(outs)
        if dup or len(set(ins)) != len(ins) or len(set(outs)) != len(outs):
            self.error(f"procedure {name!r}: formals must be distinct", name_tok)
        return make_procedure(name, ins, outs, nodes, succ), name_tok

    def program(self):
        self.call_sites = []
        procs, domains, proc_domains, globals_ = {}, {}, {}, {}
        main, width = None, 8
        while self.peek()[0] != "eof":
            if self.at("domain"):
                self.next()
                first = self.ident()
                target = first
                if self.at("."):
                    self.next()
                    target = (first, self.ident())
                self.expect("in")
                self.expect("{")
                vals = []
                if not self.at("}"):
                    vals.append(self.int_lit())
                    while self.at(","):
                        self.next()
                        vals.append(self.int_lit())
                self.expect("}")
                self.expect(";")
                if isinstance(target, tuple):
                    proc_domains[target] = tuple(vals)
                else:
                    domains[target] = tuple(vals)
            elif self.at("global"):
                self.next()
                g = self.ident()
                init = 0
                if self.at(":="):
                    self.next()
                    init = self.int_lit()
                self.expect(";")
                globals_[g] = init
            elif self.at("main"):
                self.next()
                main = self.ident()
                self.expect(";")
            elif self.at("width"):
                self.next()
                width = self.int_lit()
                self.expect(";")
            else:
                proc, tok = self.proc()
                if proc.name in procs:
                    self.error(f"duplicate procedure {proc.name!r}", tok)
                procs[proc.name] = proc
        if not procs:
            self.error("program has no procedures")
        if main is None:
            main = "main" if "main" in procs else next(iter(procs))
        if main not in procs:
            raise ParseError(f"main procedure {main!r} not defined")
        for callee, nargs, nrets, tok in self.call_sites:
            if callee not in procs:
                raise ParseError(f"unresolved callee {callee!r}", tok[2], tok[3])
            p = procs[callee]
            if nargs != len(p.ins) or nrets > len(p.outs) or (nrets and nrets != len(p.outs)):
                raise ParseError(
                    f"arity mismatch calling {callee!r}: {nargs} args/{nrets} rets for "
                    f"{len(p.ins)} ins/{len(p.outs)} outs",
                    tok[2],
                    tok[3],
                )
        return Program(procs, main, domains, proc_domains, globals_, width)


def parse_program(text: str) -> Program:
    """Parse IR source text into a :class:`Program`.

    Raises :class:`ParseError` with line/column for syntax errors, duplicate
    labels, unresolved callees and call arity mismatches.
    """
    return _Parser(text).program()


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())
