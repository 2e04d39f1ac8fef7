from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import sample
from qalloc.alloc import qubit_alloc
from qalloc.errors import ConnectivityStuck, FuelExhausted, StuckNoFreeQubit, TooLargeWithoutHint
from qalloc.frontend import parse_graph, parse_source, parse_target
from qalloc.fuzz import gen_case, gen_program
from qalloc.sim import (
    CNOT,
    HADAMARD,
    SWAP,
    DensityState,
    SrcConfig,
    check_semantic_preservation,
    default_fuel,
    density_isomorphic,
    run_source,
    run_target,
    source_wires,
    step_src,
    step_tgt,
    target_initial,
)
from qalloc.srccheck import check_expr_src, check_program_src
from qalloc.syntax import CouplingGraph, Return, free_vars


def basis(labels, bits) -> DensityState:
    n = len(labels)
    k = int("".join(map(str, bits)), 2)
    m = np.zeros((2**n, 2**n), dtype=complex)
    m[k, k] = 1.0
    return DensityState(tuple(labels), m)


def random_state(rng: np.random.Generator, labels) -> DensityState:
    d = 2 ** len(labels)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return DensityState(tuple(labels), rho / np.trace(rho))


def valid(st: DensityState) -> bool:
    m = st.matrix
    return (
        np.allclose(m, m.conj().T, atol=1e-12)
        and np.linalg.eigvalsh(m).min() >= -1e-9
        and st.trace() <= 1 + 1e-12
    )


def test_gate_algebra():
    eye = np.eye(4)
    assert np.allclose(CNOT @ CNOT, eye, atol=1e-12)
    assert np.allclose(SWAP @ SWAP, eye, atol=1e-12)
    assert np.allclose(HADAMARD @ HADAMARD, np.eye(2), atol=1e-12)


def test_cnot_flips_target_when_control_set():
    out = basis("ab", [1, 0]).apply(CNOT, ["a", "b"])
    assert np.allclose(out.matrix, basis("ab", [1, 1]).matrix)


def test_cnot_control_is_first_argument():
    out = basis("ab", [1, 0]).apply(CNOT, ["b", "a"])
    assert np.allclose(out.matrix, basis("ab", [1, 0]).matrix)


def test_swap_exchanges_wires():
    out = basis("ab", [1, 0]).apply(SWAP, ["a", "b"])
    assert np.allclose(out.matrix, basis("ab", [0, 1]).matrix)


def test_reset_channel():
    out = basis("ab", [1, 1]).reset("a")
    assert np.allclose(out.matrix, basis("ab", [0, 1]).matrix)
    assert abs(out.trace() - 1) < 1e-12


def test_measuring_a_mixed_wire():
    mixed = DensityState(("a",), np.eye(2, dtype=complex) / 2)
    p0, p1 = mixed.project("a", False), mixed.project("a", True)
    assert abs(p0.trace() - 0.5) < 1e-12 and abs(p1.trace() - 0.5) < 1e-12


def test_init_takes_a_free_wire():
    e = parse_source("main { let x = init() in (x) }").main
    [(o, nxt)] = step_src(SrcConfig(frozenset({"@0"}), DensityState.zero(["@0"]), e), {})
    assert o is None and nxt.free == frozenset() and nxt.expr == Return(("@0",))


def test_init_without_free_wire_is_stuck():
    e = parse_source("main { let x = init() in (x) }").main
    with pytest.raises(StuckNoFreeQubit):
        step_src(SrcConfig(frozenset(), DensityState.zero([]), e), {})


def test_if_splits_into_two_branches():
    src = parse_source("main { let a = init() in let b = H(a) in if b then { (b) } else { (b) } }", allow_h=True)
    traces = run_source(src, 1)
    assert len(traces) == 2
    assert all(abs(t.weight - 0.5) < 1e-12 for t in traces)


def test_straight_line_run():
    [t] = run_source(parse_source(sample("line_cnot.qsrc").read_text()), 3)
    assert t.outcomes == () and abs(t.weight - 1) < 1e-12


def test_diverging_recursion_runs_out_of_fuel():
    p = parse_source("fun loop(x) { let (y) = loop(x) in (y) }\nmain { let a = init() in let (b) = loop(a) in (b) }")
    with pytest.raises(FuelExhausted):
        run_source(p, 1, fuel=200)


def test_fuel_env_override(monkeypatch):
    monkeypatch.setenv("QALLOC_FUEL", "123")
    assert default_fuel() == 123


def test_target_swap_and_init():
    g = CouplingGraph.make(["q0", "q1"], [("q0", "q1")])
    p = parse_target("main { qubits: a@q0, b@q1; let (y, x) = swap(a, b) in init x; (x, y) }")
    [t] = run_target(p, g)
    assert abs(t.weight - 1) < 1e-12


def test_missing_edge_gets_stuck(qx2):
    p = parse_target(sample("bad_cnot.qtgt").read_text())
    with pytest.raises(ConnectivityStuck):
        run_target(p, qx2)


def test_isomorphism_examples():
    a = basis(["x1", "x2"], [0, 1])
    assert density_isomorphic(a, basis(["x2", "x1"], [1, 0]))
    assert not density_isomorphic(a, basis(["x1", "x2"], [1, 1]))
    assert density_isomorphic(a, a.permuted(["x2", "x1"]))


def test_isomorphism_needs_hint_when_large():
    labels = [f"w{i}" for i in range(7)]
    st = DensityState.zero(labels)
    with pytest.raises(TooLargeWithoutHint):
        density_isomorphic(st, basis(labels, [1] + [0] * 6))
    assert density_isomorphic(st, st, {w: w for w in labels})


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_operations_keep_states_valid(seed, n):
    rng = np.random.default_rng(seed)
    labels = [f"w{i}" for i in range(n)]
    s = random_state(rng, labels)
    for _ in range(20):
        t0 = s.trace()
        kind = rng.integers(4)
        if kind == 0 and n >= 2:
            a, b = rng.choice(labels, 2, replace=False)
            s = s.apply(CNOT if rng.integers(2) else SWAP, [a, b])
        elif kind == 1:
            s = s.apply(HADAMARD, [rng.choice(labels)])
        elif kind == 2:
            s = s.reset(rng.choice(labels))
        else:
            w = rng.choice(labels)
            p0, p1 = s.project(w, False), s.project(w, True)
            assert abs(p0.trace() + p1.trace() - t0) <= 1e-12
            s = p0 if rng.integers(2) else p1
            continue
        assert abs(s.trace() - t0) <= 1e-12
        assert valid(s)


@given(st.integers(0, 2**32 - 1))
def test_subject_reduction_on_source_runs(seed):
    prog = gen_program(random.Random(seed), max_qubits=4, recursion=True)
    deriv = check_program_src(prog)
    wires = source_wires(deriv.budget)
    defs = {d.name: (d.params, d.body) for d in prog.defs}
    todo = [SrcConfig(frozenset(wires), DensityState.zero(wires), prog.main)]
    steps = 0
    while todo and steps < 60:
        c = todo.pop()
        assert len(c.free) + len(free_vars(c.expr)) == len(wires)
        assert not c.free & free_vars(c.expr)
        check_expr_src(deriv.theta, len(c.free), free_vars(c.expr), c.expr)
        if isinstance(c.expr, Return):
            continue
        steps += 1
        todo.extend(n for o, n in step_src(c, defs) if n.state.trace() > 1e-12)


@given(st.integers(0, 2**32 - 1))
def test_preservation_small(seed):
    case = gen_case(seed, max_qubits=3, min_nodes=3, max_nodes=4, with_h=True)
    res = qubit_alloc(check_program_src(case.program), case.graph)
    try:
        rep = check_semantic_preservation(case.program, res.program, case.graph, fuel=3000)
    except FuelExhausted:
        return
    assert rep.max_state_error <= 1e-9 and rep.max_weight_error <= 1e-9


def test_preservation_on_samples(path3):
    src = parse_source(sample("line_cnot.qsrc").read_text())
    res = qubit_alloc(check_program_src(src), path3)
    assert check_semantic_preservation(src, res.program, path3).pairs == 1
    g = parse_graph(sample("triangle_tail.graph").read_text())
    src = parse_source(sample("two_calls.qsrc").read_text())
    res = qubit_alloc(check_program_src(src), g)
    assert check_semantic_preservation(src, res.program, g).pairs == 1


def test_measured_program_on_qx2(qx2):
    src = parse_source(
        """main {
          let a = init() in let b = init() in let c = init() in
          let a = H(a) in
          let (a, c) = cnot(a, c) in
          if a then { let (b, c) = cnot(b, c) in (a, b, c) } else { discard b; let d = init() in (a, d, c) }
        }""",
        allow_h=True,
    )
    res = qubit_alloc(check_program_src(src), qx2)
    rep = check_semantic_preservation(src, res.program, qx2)
    assert rep.pairs == 2 and rep.max_weight_error <= 1e-9


def test_target_step_checks_edges(path3):
    e = parse_target("main { qubits: a@q0, b@q1, c@q2; let (x, y) = cnot(a, c) in (x, b, y) }")
    cfg = target_initial(e, path3)
    with pytest.raises(ConnectivityStuck):
        step_tgt(cfg, {}, path3)
