"""Random well-typed source programs and random coupling graphs.

Programs are built top down following the typing rules, so every generated
program checks by construction. The harness runs the whole pipeline on each
case and reports failures by case seed.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .alloc import qubit_alloc
from .errors import FuelExhausted, QallocError
from .srccheck import check_program_src, infer_signatures
from .syntax import (
    CallLet,
    CnotLet,
    CouplingGraph,
    Discard,
    Expr,
    FunDef,
    HLet,
    If,
    InitLet,
    Return,
    SourceProgram,
    SrcFunType,
    TupleLet,
)
from .tgtcheck import check_program_tgt


def random_tree(rng: random.Random, nodes: list[str]) -> list[tuple[str, str]]:
    """Uniform labelled spanning tree via a Pruefer sequence."""
    n = len(nodes)
    if n < 2:
        return []
    if n == 2:
        return [(nodes[0], nodes[1])]
    seq = [rng.randrange(n) for _ in range(n - 2)]
    degree = [1] * n
    for s in seq:
        degree[s] += 1
    edges = []
    for s in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((nodes[leaf], nodes[s]))
        degree[leaf] -= 1
        degree[s] -= 1
    u, v = [i for i in range(n) if degree[i] == 1]
    edges.append((nodes[u], nodes[v]))
    return edges


def random_graph(rng: random.Random, n: int, p_extra: float = 0.3, prefix: str = "q") -> CouplingGraph:
    nodes = [f"{prefix}{i}" for i in range(n)]
    edges = random_tree(rng, nodes)
    tree = {frozenset(e) for e in edges}
    for i in range(n):
        for j in range(i + 1, n):
            if frozenset((nodes[i], nodes[j])) not in tree and rng.random() < p_extra:
                edges.append((nodes[i], nodes[j]))
    return CouplingGraph.make(nodes, edges)


@dataclass
class _Fn:
    name: str
    n_params: int
    budget: int
    n_results: int


class _Gen:
    def __init__(self, rng: random.Random, with_h: bool, funcs: list[_Fn], me: _Fn | None) -> None:
        self.rng = rng
        self.with_h = with_h
        self.funcs = funcs
        self.me = me
        self.counter = 0
        self.dead: list[str] = []

    def name(self, live: list[str]) -> str:
        reuse = [x for x in self.dead if x not in live]
        if reuse and self.rng.random() < 0.2:
            x = self.rng.choice(reuse)
            self.dead.remove(x)
            return x
        self.counter += 1
        return f"v{self.counter}"

    def finish(self, live: list[str], n: int, arity: int | None) -> Expr:
        rng = self.rng
        live = list(live)
        if arity is None:
            if live and rng.random() < 0.3:
                arity = rng.randrange(len(live) + 1)
            else:
                arity = len(live)
        if arity > len(live) + n:
            raise AssertionError("tail arity out of reach")
        steps: list[tuple[str, str]] = []
        while len(live) > arity:
            x = rng.choice(live)
            live.remove(x)
            steps.append(("discard", x))
            self.dead.append(x)
        while len(live) < arity:
            x = self.name(live)
            live.append(x)
            steps.append(("init", x))
        rng.shuffle(live)
        e: Expr = Return(tuple(live))
        for kind, x in reversed(steps):
            e = Discard(x, e) if kind == "discard" else InitLet(x, e)
        return e

    def expr(self, live: list[str], n: int, depth: int, arity: int | None) -> tuple[Expr, int]:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.12:
            e = self.finish(live, n, arity)
            return e, _tail(e)
        opts = ["let", "call"]
        if n >= 1:
            opts += ["init", "init"]
        if live:
            opts += ["discard", "if"]
            if self.with_h:
                opts.append("h")
        if len(live) >= 2:
            opts += ["cnot", "cnot", "cnot"]
        kind = rng.choice(opts)

        if kind == "init":
            x = self.name(live)
            body, a = self.expr(live + [x], n - 1, depth - 1, arity)
            return InitLet(x, body), a
        if kind == "discard":
            x = rng.choice(live)
            rest = [y for y in live if y != x]
            self.dead.append(x)
            body, a = self.expr(rest, n + 1, depth - 1, arity)
            return Discard(x, body), a
        if kind == "cnot":
            y1, y2 = rng.sample(live, 2)
            rest = [y for y in live if y not in (y1, y2)]
            x1 = self.name(rest)
            x2 = self.name(rest + [x1])
            body, a = self.expr(rest + [x1, x2], n, depth - 1, arity)
            return CnotLet((x1, x2), (y1, y2), body), a
        if kind == "h":
            y = rng.choice(live)
            rest = [v for v in live if v != y]
            x = self.name(rest)
            body, a = self.expr(rest + [x], n, depth - 1, arity)
            return HLet(x, y, body), a
        if kind == "if":
            x = rng.choice(live)
            e1, a = self.expr(live, n, depth - 1, arity)
            e2, _ = self.expr(live, n, depth - 1, a)
            return If(x, e1, e2), a
        if kind == "call":
            cands = [f for f in self.funcs if f.n_params <= len(live) and f.budget <= n]
            me = self.me
            if me is not None and me.n_params <= len(live) and n >= me.budget and rng.random() < 0.5:
                cands.append(me)
            if not cands:
                return self.expr(live, n, depth, arity)
            f = rng.choice(cands)
            args = rng.sample(live, f.n_params)
            rest = [y for y in live if y not in args]
            outs: list[str] = []
            for _ in range(f.n_results):
                outs.append(self.name(rest + outs))
            n2 = n - f.n_results + f.n_params
            body, a = self.expr(rest + outs, n2, depth - 1, arity)
            return CallLet(tuple(outs), f.name, tuple(args), body), a
        # let
        k = rng.randrange(len(live) + 1)
        sub = rng.sample(live, k)
        rest = [y for y in live if y not in sub]
        rhs, a1 = self.expr(sub, n, depth // 2, None)
        outs = []
        for _ in range(a1):
            outs.append(self.name(rest + outs))
        body, a = self.expr(rest + outs, n + k - a1, depth - 1, arity)
        return TupleLet(tuple(outs), rhs, body), a


def _tail(e: Expr) -> int:
    while not isinstance(e, Return):
        e = e.then if isinstance(e, If) else e.body
    return len(e.vars)


def gen_program(
    rng: random.Random,
    max_qubits: int = 5,
    max_funcs: int = 3,
    max_depth: int = 8,
    with_h: bool = False,
    recursion: bool = False,
) -> SourceProgram:
    funcs: list[_Fn] = []
    defs: list[FunDef] = []
    for i in range(rng.randint(0, max_funcs)):
        n_params = rng.randint(0, min(3, max_qubits))
        budget = rng.randint(0, max_qubits - n_params)
        arity = rng.randint(0, n_params + budget)
        me = _Fn(f"f{i}", n_params, budget, arity) if recursion else None
        g = _Gen(rng, with_h, funcs, me)
        params = [f"p{j}" for j in range(n_params)]
        body, _ = g.expr(params, budget, rng.randint(1, max_depth), arity)
        d = FunDef(f"f{i}", tuple(params), body)
        theta = infer_signatures(defs + [d])
        sig: SrcFunType = theta[d.name]
        defs.append(d)
        funcs.append(_Fn(d.name, sig.n_params, sig.budget, sig.n_results))
    g = _Gen(rng, with_h, funcs, None)
    main, _ = g.expr([], rng.randint(1, max_qubits), max_depth, None)
    return SourceProgram(tuple(defs), main)


@dataclass
class FuzzCase:
    seed: int
    program: SourceProgram
    graph: CouplingGraph


def gen_case(
    seed: int,
    max_qubits: int = 5,
    max_funcs: int = 3,
    max_depth: int = 8,
    min_nodes: int = 5,
    max_nodes: int = 8,
    with_h: bool = False,
    recursion: bool = False,
) -> FuzzCase:
    rng = random.Random(seed)
    prog = gen_program(rng, max_qubits, max_funcs, max_depth, with_h, recursion)
    n = rng.randint(max(min_nodes, max_qubits), max(max_nodes, max_qubits))
    return FuzzCase(seed, prog, random_graph(rng, n))


def case_seeds(seed: int, count: int) -> list[int]:
    rng = random.Random(seed)
    return [rng.getrandbits(32) for _ in range(count)]


@dataclass
class FuzzReport:
    seed: int
    count: int
    passed: int = 0
    swaps: int = 0
    simulated: int = 0
    fuel_exhausted: int = 0
    failures: list[dict] = field(default_factory=list)
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "seed": self.seed,
            "count": self.count,
            "passed": self.passed,
            "swaps": self.swaps,
            "simulated": self.simulated,
            "fuel_exhausted": self.fuel_exhausted,
            "failures": self.failures,
        }


def run_case(case: FuzzCase, simulate: bool = False, fuel: int | None = None) -> dict:
    """Run one case through check, allocate, re-check and optionally simulate."""
    from .sim import check_semantic_preservation

    out: dict = {"seed": case.seed}
    deriv = check_program_src(case.program)
    res = qubit_alloc(deriv, case.graph)
    out["swaps"] = res.swaps
    rep = check_program_tgt(res.program, case.graph)
    if not rep.ok:
        out["error"] = "; ".join(d.render() for d in rep.diagnostics)
        return out
    if simulate:
        try:
            check_semantic_preservation(case.program, res.program, case.graph, fuel)
            out["simulated"] = True
        except FuelExhausted:
            out["fuel_exhausted"] = True
    return out


def run_fuzz(
    seed: int,
    count: int,
    simulate: bool = False,
    fuel: int | None = None,
    **opts,
) -> FuzzReport:
    rep = FuzzReport(seed, count)
    t0 = time.perf_counter()
    for s in case_seeds(seed, count):
        try:
            r = run_case(gen_case(s, **opts), simulate, fuel)
        except QallocError as exc:
            r = {"seed": s, "error": f"{type(exc).__name__}: {exc.message}"}
        if "error" in r:
            rep.failures.append(r)
            continue
        rep.passed += 1
        rep.swaps += r["swaps"]
        rep.simulated += bool(r.get("simulated"))
        rep.fuel_exhausted += bool(r.get("fuel_exhausted"))
    rep.seconds = time.perf_counter() - t0
    return rep
