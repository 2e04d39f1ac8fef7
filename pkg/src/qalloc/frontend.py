"""Concrete syntax: parsers and printers for source, target and graph files."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DisconnectedInput, GraphError, ParseError
from .syntax import (
    CallLet,
    CnotLet,
    CouplingGraph,
    Discard,
    Expr,
    FunDef,
    HLet,
    If,
    Init,
    InitLet,
    Return,
    SourceProgram,
    SwapLet,
    TargetFunType,
    TargetProgram,
    TgtFunDef,
    TupleLet,
    constraint,
)

KEYWORDS = frozenset(
    {"let", "in", "init", "discard", "cnot", "swap", "if", "then", "else", "fun", "main", "qubits", "H"}
)

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<arrow>->)|(?P<name>%?[A-Za-z0-9_]+)|(?P<punct>[(){},;=~|<>@:*])"
)


@dataclass(frozen=True)
class Token:
    kind: str  # "name", "punct", "eof"
    text: str
    line: int
    col: int

    @property
    def pos(self) -> tuple[int, int]:
        return (self.line, self.col)


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    line, start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", (line, i - start + 1))
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind in ("name", "punct", "arrow"):
            out.append(Token("punct" if kind == "arrow" else kind, m.group(), line, i - start + 1))
        i = m.end()
    out.append(Token("eof", "<eof>", line, i - start + 1))
    return out


class _Parser:
    def __init__(self, text: str, target: bool, allow_h: bool) -> None:
        self.toks = tokenize(text)
        self.i = 0
        self.target = target
        self.allow_h = allow_h

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and (t.kind != "name" or text in KEYWORDS)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"unexpected {self.tok.text!r}", (repr(text),))
        t = self.tok
        self.i += 1
        return t

    def fail(self, msg: str, expected: tuple[str, ...] = ()):
        raise ParseError(msg, self.tok.pos, expected)

    def var(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.fail(f"unexpected {t.text!r}", ("variable",))
        if t.text.startswith("%"):
            if not self.target:
                self.fail(f"names starting with '%' are reserved: {t.text!r}")
        elif not (t.text[0].isalpha() or t.text[0] == "_"):
            self.fail(f"invalid variable name {t.text!r}", ("variable",))
        self.i += 1
        return t.text

    def qidx(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.fail(f"unexpected {t.text!r}", ("qidx",))
        self.i += 1
        return t.text

    def fname(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS or t.text.startswith("%") or t.text[0].isdigit():
            self.fail(f"unexpected {t.text!r}", ("function name",))
        self.i += 1
        return t.text

    def varlist(self) -> tuple[str, ...]:
        self.expect("(")
        out: list[str] = []
        if not self.at(")"):
            out.append(self.var())
            while self.at(","):
                self.i += 1
                out.append(self.var())
        self.expect(")")
        return tuple(out)

    # expressions
    def expr(self) -> Expr:
        t = self.tok
        if self.at("("):
            return Return(self.varlist(), t.pos)
        if self.at("{"):
            self.i += 1
            e = self.expr()
            self.expect("}")
            return e
        if self.at("discard"):
            if self.target:
                self.fail("'discard' is not part of the target language")
            self.i += 1
            x = self.var()
            self.expect(";")
            return Discard(x, self.expr(), t.pos)
        if self.at("init"):
            if not self.target:
                self.fail("'init x;' is target syntax; use 'let x = init() in'")
            self.i += 1
            x = self.var()
            self.expect(";")
            return Init(x, self.expr(), t.pos)
        if self.at("if"):
            self.i += 1
            x = self.var()
            self.expect("then")
            self.expect("{")
            e1 = self.expr()
            self.expect("}")
            self.expect("else")
            self.expect("{")
            e2 = self.expr()
            self.expect("}")
            return If(x, e1, e2, t.pos)
        if self.at("let"):
            return self.let()
        self.fail(f"unexpected {t.text!r}", ("'('", "'let'", "'if'", "'discard'" if not self.target else "'init'"))

    def let(self) -> Expr:
        t = self.expect("let")
        if not self.at("("):
            x = self.var()
            self.expect("=")
            if self.at("init"):
                if self.target:
                    self.fail("'let x = init()' is source syntax; use 'init x;'")
                self.i += 1
                self.expect("(")
                self.expect(")")
                self.expect("in")
                return InitLet(x, self.expr(), t.pos)
            if self.at("H"):
                if not self.allow_h:
                    self.fail("single-qubit gates are disabled")
                self.i += 1
                self.expect("(")
                y = self.var()
                self.expect(")")
                self.expect("in")
                return HLet(x, y, self.expr(), t.pos)
            self.fail(f"unexpected {self.tok.text!r}", ("'init'", "'H'"))
        outs = self.varlist()
        self.expect("=")
        for gate in ("cnot", "swap"):
            if self.at(gate):
                if gate == "swap" and not self.target:
                    self.fail("'swap' is not part of the source language")
                self.i += 1
                ins = self.varlist()
                if len(outs) != 2 or len(ins) != 2:
                    raise ParseError(f"{gate} binds exactly two qubits", t.pos)
                self.expect("in")
                node = CnotLet if gate == "cnot" else SwapLet
                return node((outs[0], outs[1]), (ins[0], ins[1]), self.expr(), t.pos)
        if self.tok.kind == "name" and self.tok.text not in KEYWORDS and self.peek().text == "(":
            f = self.fname()
            args = self.varlist()
            self.expect("in")
            return CallLet(outs, f, args, self.expr(), t.pos)
        rhs = self.expr()
        self.expect("in")
        return TupleLet(outs, rhs, self.expr(), t.pos)

    # programs
    def source_program(self) -> SourceProgram:
        defs = []
        while self.at("fun"):
            t = self.expect("fun")
            f = self.fname()
            params = self.varlist()
            self.expect("{")
            body = self.expr()
            self.expect("}")
            defs.append(FunDef(f, params, body, t.pos))
        self.expect("main")
        self.expect("{")
        main = self.expr()
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail(f"unexpected {self.tok.text!r}", ("end of input",))
        return SourceProgram(tuple(defs), main)

    def target_program(self) -> TargetProgram:
        defs = []
        while self.at("fun"):
            t = self.expect("fun")
            f = self.fname()
            self.expect("<")
            quant: list[str] = []
            cons: list[tuple[str, str]] = []
            if not self.at(">") and not self.at("|"):
                quant.append(self.qidx())
                while self.at(","):
                    self.i += 1
                    quant.append(self.qidx())
            if self.at("|"):
                self.i += 1
                if not self.at(">"):
                    cons.append(self._constraint())
                    while self.at(","):
                        self.i += 1
                        cons.append(self._constraint())
            self.expect(">")
            self.expect("(")
            params: list[str] = []
            ptys: list[str] = []
            if not self.at(")"):
                while True:
                    params.append(self.var())
                    self.expect(":")
                    ptys.append(self._qtype())
                    if not self.at(","):
                        break
                    self.i += 1
            self.expect(")")
            self.expect("->")
            self.expect("(")
            rtys: list[str] = []
            if not self.at(")"):
                rtys.append(self._qtype())
                while self.at(","):
                    self.i += 1
                    rtys.append(self._qtype())
            self.expect(")")
            self.expect("{")
            body = self.expr()
            self.expect("}")
            sig = TargetFunType(tuple(quant), frozenset(cons), tuple(ptys), tuple(rtys))
            defs.append(TgtFunDef(f, sig, tuple(params), body, t.pos))
        self.expect("main")
        self.expect("{")
        pre: list[tuple[str, str]] = []
        if self.at("qubits"):
            self.i += 1
            self.expect(":")
            if not self.at(";"):
                while True:
                    x = self.var()
                    self.expect("@")
                    pre.append((x, self.qidx()))
                    if not self.at(","):
                        break
                    self.i += 1
            self.expect(";")
        main = self.expr()
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail(f"unexpected {self.tok.text!r}", ("end of input",))
        return TargetProgram(tuple(defs), tuple(pre), main)

    def _constraint(self) -> tuple[str, str]:
        a = self.qidx()
        self.expect("~")
        return constraint(a, self.qidx())

    def _qtype(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text != "q":
            self.fail(f"unexpected {t.text!r}", ("'q('",))
        self.i += 1
        self.expect("(")
        a = self.qidx()
        self.expect(")")
        return a


def parse_source(text: str, allow_h: bool = False) -> SourceProgram:
    return _Parser(text, target=False, allow_h=allow_h).source_program()


def parse_source_expr(text: str, allow_h: bool = False) -> Expr:
    p = _Parser(text, target=False, allow_h=allow_h)
    e = p.expr()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r}", ("end of input",))
    return e


def parse_target(text: str, allow_h: bool = False) -> TargetProgram:
    return _Parser(text, target=True, allow_h=allow_h).target_program()


def parse_target_expr(text: str, allow_h: bool = False) -> Expr:
    p = _Parser(text, target=True, allow_h=allow_h)
    e = p.expr()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r}", ("end of input",))
    return e


# ---------------------------------------------------------------------------
# Printing


def _tuple(xs) -> str:
    return "(" + ", ".join(xs) + ")"


def print_expr(e: Expr, indent: int = 0) -> str:
    pad = "  " * indent
    lines: list[str] = []
    while True:
        if isinstance(e, Return):
            lines.append(pad + _tuple(e.vars))
            break
        if isinstance(e, InitLet):
            lines.append(f"{pad}let {e.var} = init() in")
        elif isinstance(e, Discard):
            lines.append(f"{pad}discard {e.var};")
        elif isinstance(e, Init):
            lines.append(f"{pad}init {e.var};")
        elif isinstance(e, CnotLet):
            lines.append(f"{pad}let {_tuple(e.outs)} = cnot{_tuple(e.ins)} in")
        elif isinstance(e, SwapLet):
            lines.append(f"{pad}let {_tuple(e.outs)} = swap{_tuple(e.ins)} in")
        elif isinstance(e, HLet):
            lines.append(f"{pad}let {e.out} = H({e.inp}) in")
        elif isinstance(e, CallLet):
            lines.append(f"{pad}let {_tuple(e.outs)} = {e.fn}{_tuple(e.args)} in")
        elif isinstance(e, TupleLet):
            if isinstance(e.rhs, Return):
                lines.append(f"{pad}let {_tuple(e.outs)} = {_tuple(e.rhs.vars)} in")
            else:
                lines.append(f"{pad}let {_tuple(e.outs)} = {{")
                lines.append(print_expr(e.rhs, indent + 1))
                lines.append(f"{pad}}} in")
        elif isinstance(e, If):
            lines.append(f"{pad}if {e.var} then {{")
            lines.append(print_expr(e.then, indent + 1))
            lines.append(f"{pad}}} else {{")
            lines.append(print_expr(e.orelse, indent + 1))
            lines.append(f"{pad}}}")
            break
        else:
            raise TypeError(f"not an expression: {e!r}")
        e = e.body
    return "\n".join(lines)


def print_source(p: SourceProgram) -> str:
    parts = []
    for d in p.defs:
        parts.append(f"fun {d.name}{_tuple(d.params)} {{\n{print_expr(d.body, 1)}\n}}\n")
    parts.append(f"main {{\n{print_expr(p.main, 1)}\n}}\n")
    return "\n".join(parts)


def print_signature_header(name: str, sig: TargetFunType, params) -> str:
    quant = ", ".join(sig.quantified)
    cons = ", ".join(f"{a}~{b}" for a, b in sorted(sig.constraints))
    bound = f"{quant} | {cons}" if cons else quant
    ps = ", ".join(f"{x}: q({a})" for x, a in zip(params, sig.params))
    rs = ", ".join(f"q({a})" for a in sig.results)
    return f"fun {name}<{bound}>({ps}) -> ({rs})"


def print_target(p: TargetProgram) -> str:
    parts = []
    for d in p.defs:
        head = print_signature_header(d.name, d.sig, d.params)
        parts.append(f"{head} {{\n{print_expr(d.body, 1)}\n}}\n")
    pre = ""
    if p.preamble:
        pre = "  qubits: " + ", ".join(f"{x}@{a}" for x, a in p.preamble) + ";\n"
    parts.append(f"main {{\n{pre}{print_expr(p.main, 1)}\n}}\n")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Graph files

_EDGE = re.compile(r"^([A-Za-z0-9_]+)(?:->|--|-)([A-Za-z0-9_]+)$")
_NODE = re.compile(r"^[A-Za-z0-9_]+$")


def parse_graph(text: str) -> CouplingGraph:
    """``nodes: a b c`` and ``edges: a-b b-c`` lines; ``#`` starts a comment."""
    nodes: list[str] = []
    edges: list[tuple[str, str, tuple[int, int]]] = []
    seen_nodes = False
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep or key not in ("nodes", "edges"):
            raise ParseError(f"unexpected line {line!r}", (ln, 1), ("'nodes:'", "'edges:'"))
        col = raw.index(":") + 2
        for item in rest.replace(",", " ").split():
            pos = (ln, raw.find(item, col - 1) + 1)
            if key == "nodes":
                if not _NODE.match(item):
                    raise ParseError(f"invalid node name {item!r}", pos)
                if item in nodes:
                    raise GraphError(f"duplicate node {item!r}", pos)
                nodes.append(item)
                seen_nodes = True
            else:
                m = _EDGE.match(item)
                if not m:
                    raise ParseError(f"invalid edge {item!r}", pos, ("a-b",))
                edges.append((m.group(1), m.group(2), pos))
    if not seen_nodes:
        raise ParseError("missing 'nodes:' line", (1, 1))
    known = set(nodes)
    for a, b, pos in edges:
        for v in (a, b):
            if v not in known:
                raise GraphError(f"edge mentions unknown node {v!r}", pos)
        if a == b:
            raise GraphError(f"self-loop on {a!r}", pos)
    g = CouplingGraph.make(nodes, [(a, b) for a, b, _ in edges])
    from .graphs import is_connected

    if not is_connected(g):
        raise DisconnectedInput("coupling graph is not connected")
    return g


def print_graph(g: CouplingGraph) -> str:
    es = " ".join(f"{a}-{b}" for a, b in sorted(g.edges))
    return f"nodes: {' '.join(g.nodes)}\nedges: {es}\n"
