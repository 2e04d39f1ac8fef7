from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from conftest import sample
from qalloc.alloc import qubit_alloc
from qalloc.errors import DisconnectedInput, GraphError, ParseError
from qalloc.frontend import (
    parse_graph,
    parse_source,
    parse_source_expr,
    parse_target,
    print_graph,
    print_source,
    print_target,
    tokenize,
)
from qalloc.fuzz import gen_case, gen_program
from qalloc.srccheck import check_program_src
from qalloc.syntax import CnotLet, If, InitLet, Return


def test_tokenize_skips_comments():
    toks = [t.text for t in tokenize("// hi\nmain { () } // bye")]
    assert toks[:5] == ["main", "{", "(", ")", "}"]


def test_parse_shapes():
    e = parse_source_expr("let x = init() in let (a, b) = cnot(x, y) in if a then { (a, b) } else { (a, b) }")
    assert isinstance(e, InitLet)
    assert isinstance(e.body, CnotLet)
    assert isinstance(e.body.body, If)
    assert e.body.body.then == Return(("a", "b"))


def test_positions_are_recorded():
    e = parse_source_expr("let x = init() in\n  (x)")
    assert e.pos == (1, 1)
    assert e.body.pos == (2, 3)


@pytest.mark.parametrize(
    "text, where",
    [
        ("main { let x = init( in (x) }", (1, 22)),
        ("main { (%v1) }", (1, 9)),
        ("main { let y = H(x) in (y) }", (1, 16)),
        ("main { (x) ", None),
        ("fun f(a) { (a) }", None),
    ],
)
def test_parse_errors(text, where):
    with pytest.raises(ParseError) as info:
        parse_source(text)
    if where is not None:
        assert info.value.pos == where


def test_h_gate_behind_flag():
    p = parse_source("main { let x = init() in let y = H(x) in (y) }", allow_h=True)
    assert "H(x)" in print_source(p)


def test_diagnostic_format():
    with pytest.raises(ParseError) as info:
        parse_source("main {\n  (x\n}")
    assert info.value.render("prog.qsrc").startswith("prog.qsrc:3:1: error[ParseError]")


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_source_round_trip(seed, with_h):
    prog = gen_program(random.Random(seed), with_h=with_h, recursion=True)
    text = print_source(prog)
    again = parse_source(text, allow_h=with_h)
    assert again == prog
    assert print_source(again) == text


@given(st.integers(0, 2**32 - 1))
def test_target_round_trip(seed):
    case = gen_case(seed, max_depth=6)
    tgt = qubit_alloc(check_program_src(case.program), case.graph).program
    text = print_target(tgt)
    again = parse_target(text)
    assert again == tgt
    assert print_target(again) == text


def test_sample_target_round_trip():
    g = parse_graph(sample("triangle_tail.graph").read_text())
    src = parse_source(sample("two_calls.qsrc").read_text())
    text = print_target(qubit_alloc(check_program_src(src), g).program)
    assert "fun func<" in text
    assert "qubits:" in text
    assert print_target(parse_target(text)) == text


def test_graph_format(qx2):
    assert len(qx2.nodes) == 5 and len(qx2.edges) == 6
    assert parse_graph(print_graph(qx2)) == qx2


def test_graph_edge_spellings():
    g = parse_graph("# directed input is made undirected\nnodes: a b c\nedges: a->b b--c")
    assert g.has_edge("b", "a") and g.has_edge("c", "b")


@pytest.mark.parametrize(
    "text, err",
    [
        ("nodes: a b\nedges: a-c", GraphError),
        ("nodes: a b\nedges: a-a", GraphError),
        ("nodes: a a\nedges: a-a", GraphError),
        ("nodes: a b c\nedges: a-b", DisconnectedInput),
    ],
)
def test_graph_errors(text, err):
    with pytest.raises(err):
        parse_graph(text)
