"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import itertools
import random
import time

import numpy as np
import pytest

from conftest import sample
from progtools import (
    mutate,
    rename_graph,
    rename_nodes,
    rename_source_vars,
    rename_target_vars,
    src_verdict,
    with_unused_fun,
)
from qalloc.alloc import qubit_alloc
from qalloc.errors import (
    BudgetExceeded,
    ConnectivityStuck,
    FuelExhausted,
    StuckNoFreeQubit,
)
from qalloc.frontend import parse_graph, parse_source, parse_target, print_target
from qalloc.fuzz import case_seeds, gen_case, random_graph, run_fuzz
from qalloc.graphs import (
    articulation_points,
    articulation_points_naive,
    construct_subgraphs,
    is_connected,
    replay_swaps,
    token_swapping,
    token_swapping_exact,
)
from qalloc.sim import (
    CNOT,
    HADAMARD,
    SWAP,
    DensityState,
    SrcConfig,
    TgtConfig,
    check_semantic_preservation,
    run_source,
    run_target,
    step_src,
    step_tgt,
)
from qalloc.srccheck import check_program_src
from qalloc.syntax import CnotLet, CouplingGraph, Discard, HLet, If, InitLet, Return, SwapLet, TupleLet
from qalloc.tgtcheck import check_program_tgt

SEED = 20240601


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")

    return emit


def _tgt_verdict(text: str, g: CouplingGraph) -> list[str]:
    return [type(d).__name__ for d in check_program_tgt(parse_target(text), g).diagnostics]


# 1. allocator output always passes the target checker


def test_type_preservation(report):
    t0 = time.perf_counter()
    rep = run_fuzz(SEED, 500, max_qubits=5, max_funcs=3, max_depth=8, min_nodes=5, max_nodes=8, recursion=True)
    elapsed = time.perf_counter() - t0
    ok = rep.passed == 500 and elapsed < 60
    report(1, ok, f"{rep.passed}/500 allocator outputs type-check, {rep.swaps} swaps, {elapsed:.1f}s")
    assert not rep.failures, rep.failures[:3]
    assert elapsed < 60


# 2. source and target agree branch by branch on small devices


def test_semantic_preservation(report):
    t0 = time.perf_counter()
    pairs = 0
    worst_state = worst_weight = 0.0
    failures = []
    for s in case_seeds(SEED + 2, 200):
        case = gen_case(s, max_qubits=3, min_nodes=3, max_nodes=4, with_h=True)
        assert len(case.graph.nodes) <= 4
        res = qubit_alloc(check_program_src(case.program), case.graph)
        try:
            pres = check_semantic_preservation(case.program, res.program, case.graph, fuel=10_000, tol=1e-9)
        except Exception as exc:  # noqa: BLE001 - every failure kind is reported
            failures.append((s, f"{type(exc).__name__}: {exc}"))
            continue
        pairs += pres.pairs
        worst_state = max(worst_state, pres.max_state_error)
        worst_weight = max(worst_weight, pres.max_weight_error)
    elapsed = time.perf_counter() - t0
    ok = not failures and worst_state <= 1e-9 and worst_weight <= 1e-9 and elapsed < 300
    report(
        2,
        ok,
        f"{200 - len(failures)}/200 cases, {pairs} branch pairs isomorphic, "
        f"state err {worst_state:.1e}, weight err {worst_weight:.1e}, {elapsed:.1f}s",
    )
    assert ok, failures[:3]


# 3. checked source programs never run out of qubits at their budget


def test_source_soundness(report):
    runs = stuck = exhausted = 0
    mutated = rejected = 0
    for s in case_seeds(SEED + 3, 300):
        case = gen_case(s, max_qubits=4, with_h=True, recursion=True)
        deriv = check_program_src(case.program)
        n = deriv.budget
        try:
            run_source(case.program, n, fuel=10_000, prune=0.0)
            runs += 1
        except StuckNoFreeQubit:
            stuck += 1
        except FuelExhausted:
            exhausted += 1
        if n > 0:
            mutated += 1
            try:
                check_program_src(case.program, n - 1)
            except BudgetExceeded:
                rejected += 1
    ok = stuck == 0 and mutated > 0 and rejected == mutated
    report(
        3,
        ok,
        f"{runs} runs at minimal budget, {stuck} stuck, {exhausted} out of fuel; "
        f"budget-1 rejected {rejected}/{mutated}",
    )
    assert ok


# 4. checked target programs never get stuck on connectivity


def test_target_soundness(report, qx2):
    runs = exhausted = 0
    stuck = []
    for s in case_seeds(SEED + 4, 150):
        case = gen_case(s, max_qubits=5, min_nodes=5, max_nodes=8, with_h=True, recursion=True)
        res = qubit_alloc(check_program_src(case.program), case.graph)
        assert check_program_tgt(res.program, case.graph).ok
        try:
            run_target(res.program, case.graph, fuel=10_000, prune=0.0)
            runs += 1
        except ConnectivityStuck as exc:
            stuck.append((s, exc.message))
        except FuelExhausted:
            exhausted += 1
    bad = parse_target(sample("bad_cnot.qtgt").read_text())
    rejected = not check_program_tgt(bad, qx2).ok
    try:
        run_target(bad, qx2)
        bad_stuck = False
    except ConnectivityStuck:
        bad_stuck = True
    ok = not stuck and rejected and bad_stuck
    report(
        4,
        ok,
        f"{runs} target runs, {len(stuck)} stuck, {exhausted} out of fuel; "
        f"q1-q4 cnot rejected={rejected}, stuck when forced={bad_stuck}",
    )
    assert ok, stuck[:3]


# 5. token swapping is correct and within four times optimal


def test_token_swapping(report):
    rng = random.Random(SEED + 5)
    correct = within = 0
    worst = 0.0
    for _ in range(100):
        g = random_graph(rng, rng.randint(2, 7))
        k = rng.randint(1, len(g.nodes))
        p = dict(zip(rng.sample(g.nodes, k), rng.sample(g.nodes, k)))
        approx = token_swapping(g, p)
        exact = token_swapping_exact(g, p)
        final = replay_swaps(approx, g.nodes)
        if all(g.has_edge(a, b) for a, b in approx) and all(final[v] == w for v, w in p.items()):
            correct += 1
        if len(approx) <= 4 * len(exact):
            within += 1
        if exact:
            worst = max(worst, len(approx) / len(exact))
    ok = correct == 100 and within == 100
    report(5, ok, f"replay correct {correct}/100, ratio <= 4 on {within}/100, worst ratio {worst:.2f}")
    assert ok


# 6. subgraph chain shape and articulation points


def test_subgraph_chain(report):
    rng = random.Random(SEED + 6)
    chains_ok = ap_ok = 0
    for _ in range(100):
        g = random_graph(rng, rng.randint(1, 32), p_extra=rng.choice([0.02, 0.1, 0.3]))
        chain = construct_subgraphs(g)
        good = len(chain) == len(g.nodes)
        for i, gi in enumerate(chain.graphs, start=1):
            good &= len(gi.nodes) == i and is_connected(gi)
            if i < len(chain):
                nxt = chain.graphs[i]
                good &= set(gi.nodes) < set(nxt.nodes) and gi == nxt.induced(gi.nodes)
        chains_ok += good
        ap_ok += articulation_points(g) == articulation_points_naive(g)
    ok = chains_ok == 100 and ap_ok == 100
    report(6, ok, f"chain invariants hold on {chains_ok}/100, articulation points match on {ap_ok}/100")
    assert ok


# 7. reference scenarios


def test_reference_scenarios(report):
    qx2 = parse_graph(sample("qx2.graph").read_text())
    qx2_ok = len(qx2.nodes) == 5 and len(qx2.edges) == 6

    path3 = parse_graph(sample("path3.graph").read_text())
    line = qubit_alloc(check_program_src(parse_source(sample("line_cnot.qsrc").read_text())), path3)
    [cnot_event] = [ev for ev in line.events if ev["kind"] == "cnot"]
    line_ok = line.swaps == 1 and len(cnot_event["swaps"]) == 1 and check_program_tgt(line.program, path3).ok

    g = parse_graph(sample("triangle_tail.graph").read_text())
    calls = qubit_alloc(check_program_src(parse_source(sample("two_calls.qsrc").read_text())), g)
    first, second = calls.call_sites
    calls_ok = first.swaps == 0 and second.swaps >= 1 and check_program_tgt(calls.program, g).ok

    ok = qx2_ok and line_ok and calls_ok
    report(
        7,
        ok,
        f"bow-tie {len(qx2.nodes)} nodes/{len(qx2.edges)} edges; line cnot {line.swaps} swap; "
        f"call sites {first.swaps} then {second.swaps} swaps, output type-checks",
    )
    assert ok


# 8. metamorphic properties


def test_metamorphic_suite(report):
    changes = {"renaming": 0, "budget": 0, "extension": 0, "qidx": 0}
    accepted = 0
    for s in case_seeds(SEED + 8, 200):
        rng = random.Random(s)
        case = gen_case(s, max_depth=6, recursion=True)
        prog = mutate(case.program, rng) if rng.random() < 0.5 else case.program
        verdict = src_verdict(prog)
        accepted += verdict[0] == "accept"

        if src_verdict(rename_source_vars(prog, rng)) != verdict:
            changes["renaming"] += 1
        if src_verdict(with_unused_fun(prog, rng.random() < 0.5)) != verdict:
            changes["extension"] += 1
        if verdict[0] == "accept":
            n = verdict[1]
            if any(src_verdict(prog, n + k)[0] != "accept" for k in (1, 2, 5)):
                changes["budget"] += 1

        deriv = check_program_src(case.program)
        text = print_target(qubit_alloc(deriv, case.graph).program)
        graphs = [case.graph]
        edges = sorted(case.graph.edges)
        weaker = CouplingGraph.make(case.graph.nodes, [e for e in edges if e != rng.choice(edges)])
        if is_connected(weaker):
            graphs.append(weaker)
        fresh = [f"n{i}" for i in range(len(case.graph.nodes))]
        rng.shuffle(fresh)
        mapping = dict(zip(case.graph.nodes, fresh))
        for g in graphs:
            base = _tgt_verdict(text, g)
            if _tgt_verdict(rename_target_vars(text, rng), g) != base:
                changes["renaming"] += 1
            extra = "fun spare<s | >(x: q(s)) -> (q(s)) {\n  init x;\n  (x)\n}\n\n"
            if _tgt_verdict(extra + text, g) != base:
                changes["extension"] += 1
            if _tgt_verdict(rename_nodes(text, mapping), rename_graph(g, mapping)) != base:
                changes["qidx"] += 1
    ok = not any(changes.values())
    detail = ", ".join(f"{k} {v}" for k, v in changes.items())
    report(8, ok, f"verdict changes over 200 cases each ({accepted} accepted sources): {detail}")
    assert ok, changes


# 9. simulator algebra


def _long_source(rng: random.Random, wires: int, length: int):
    """Straight-line program of ``length`` gates, resets and measurements."""
    names = [f"x{i}" for i in range(wires)]
    fresh = (f"c{i}" for i in itertools.count())
    ops = []
    for _ in range(length):
        kind = rng.choice(["cnot", "cnot", "h", "reset", "if"])
        if kind == "cnot":
            a, b = rng.sample(range(wires), 2)
            new_a, new_b = next(fresh), next(fresh)
            ops.append(("cnot", (new_a, new_b), (names[a], names[b])))
            names[a], names[b] = new_a, new_b
        elif kind == "h":
            a = rng.randrange(wires)
            new = next(fresh)
            ops.append(("h", new, names[a]))
            names[a] = new
        elif kind == "reset":
            a = rng.randrange(wires)
            new = next(fresh)
            ops.append(("reset", names[a], new))
            names[a] = new
        else:
            old = tuple(names)
            names = [next(fresh) for _ in range(wires)]
            ops.append(("if", old[rng.randrange(wires)], old, tuple(names)))
    e = Return(tuple(names))
    for op in reversed(ops):
        if op[0] == "cnot":
            e = CnotLet(op[1], op[2], e)
        elif op[0] == "h":
            e = HLet(op[1], op[2], e)
        elif op[0] == "reset":
            e = Discard(op[1], InitLet(op[2], e))
        else:
            _, x, old, new = op
            e = TupleLet(new, If(x, Return(old), Return(old)), e)
    for i in reversed(range(wires)):
        e = InitLet(f"x{i}", e)
    return e


def test_simulator_algebra(report):
    eye4 = np.eye(4)
    gate_err = max(np.abs(CNOT @ CNOT - eye4).max(), np.abs(SWAP @ SWAP - eye4).max())
    worst_drift = worst_split = 0.0
    steps = 0
    rng = random.Random(SEED + 9)
    for _ in range(3):
        wires = ["@0", "@1", "@2", "@3"]
        cfg = SrcConfig(frozenset(wires), DensityState.zero(wires), _long_source(rng, 4, 1000))
        run_steps = 0
        while not isinstance(cfg.expr, Return):
            before = cfg.state.trace()
            nxt = step_src(cfg, {})
            total = sum(c.state.trace() for _, c in nxt)
            if len(nxt) == 2:
                worst_split = max(worst_split, abs(total - before))
                live = [c for _, c in nxt if c.state.trace() > 1e-6]
                cfg = rng.choice(live)
                cfg = SrcConfig(cfg.free, DensityState(cfg.state.labels, cfg.state.matrix / cfg.state.trace()), cfg.expr)
            else:
                worst_drift = max(worst_drift, abs(total - before))
                cfg = nxt[0][1]
            run_steps += 1
        assert run_steps >= 1000
        steps += run_steps

    g = CouplingGraph.make(["q0", "q1", "q2"], [("q0", "q1"), ("q1", "q2")])
    tstate = DensityState.zero(["@q0", "@q1", "@q2"]).apply(HADAMARD, ["@q0"])
    e: object = Return(("@q0", "@q1", "@q2"))
    for i in range(1000):
        a, b = rng.choice([("@q0", "@q1"), ("@q1", "@q2"), ("@q1", "@q0")])
        e = (SwapLet if i % 2 else CnotLet)((a, b), (a, b), e)
    tcfg = TgtConfig(tstate, e)
    while not isinstance(tcfg.expr, Return):
        before = tcfg.state.trace()
        [(_, tcfg)] = step_tgt(tcfg, {}, g)
        worst_drift = max(worst_drift, abs(tcfg.state.trace() - before))
        steps += 1

    ok = worst_drift <= 1e-12 and gate_err <= 1e-12 and worst_split <= 1e-12
    report(
        9,
        ok,
        f"{steps} steps, max trace drift {worst_drift:.1e}, gate identity error {gate_err:.1e}, "
        f"branch split error {worst_split:.1e}",
    )
    assert ok
