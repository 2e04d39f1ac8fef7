"""Type-directed qubit allocation from source programs to target programs.

Every function is given a connected region of the device sized by its
parameter count plus budget, taken from a nested chain of subgraphs so a
callee's region always sits inside its caller's. Within a region each variable
is tracked with the device qubit (qidx) it occupies. The free qubits are
tracked too; they are always in the zero state and interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import DeviceTooSmall, InternalPostconditionViolation, MissingOccupant
from .graphs import (
    SubgraphChain,
    construct_subgraphs,
    distances,
    shortest_path,
    subgraph_isomorphism,
    token_swapping,
)
from .srccheck import ProgramDerivation
from .syntax import (
    CallLet,
    CnotLet,
    CouplingGraph,
    Discard,
    Expr,
    HLet,
    If,
    Init,
    InitLet,
    NameSupply,
    Return,
    SrcFunType,
    SwapLet,
    TargetFunType,
    TargetProgram,
    TgtFunDef,
    TupleLet,
    apply_swaps_to_env,
    free_vars,
    subst,
)
from .tgtcheck import check_program_tgt

Swaps = list[tuple[str, str]]


def insert_swaps(e: Expr, env: Mapping[str, str], swaps: Swaps) -> Expr:
    """Prefix ``e`` with one swap per pair; ``e`` must be typed in the post-swap env."""
    at = {a: x for x, a in env.items()}
    steps = []
    for a, b in swaps:
        if a not in at or b not in at:
            raise MissingOccupant(f"swap ({a}, {b}) touches an unoccupied qubit")
        x1, x2 = at[a], at[b]
        steps.append((x1, x2))
        at[a], at[b] = x2, x1
    for x1, x2 in reversed(steps):
        e = SwapLet((x2, x1), (x1, x2), e)
    return e


def uniquify_binders(params: tuple[str, ...], e: Expr, names: NameSupply) -> Expr:
    """Alpha-rename so that no name is bound twice anywhere in a body."""
    seen = set(params)

    def bind(x: str, env: dict[str, str]) -> str:
        new = names.fresh() if x in seen else x
        seen.add(new)
        env[x] = new
        return new

    def go(e: Expr, env: dict[str, str]) -> Expr:
        r = lambda x: env.get(x, x)  # noqa: E731
        if isinstance(e, Return):
            return Return(tuple(r(x) for x in e.vars), e.pos)
        if isinstance(e, InitLet):
            inner = dict(env)
            return InitLet(bind(e.var, inner), go(e.body, inner), e.pos)
        if isinstance(e, Discard):
            return Discard(r(e.var), go(e.body, env), e.pos)
        if isinstance(e, CnotLet):
            ins = (r(e.ins[0]), r(e.ins[1]))
            inner = dict(env)
            outs = (bind(e.outs[0], inner), bind(e.outs[1], inner))
            return CnotLet(outs, ins, go(e.body, inner), e.pos)
        if isinstance(e, HLet):
            inp = r(e.inp)
            inner = dict(env)
            return HLet(bind(e.out, inner), inp, go(e.body, inner), e.pos)
        if isinstance(e, CallLet):
            args = tuple(r(x) for x in e.args)
            inner = dict(env)
            outs = tuple(bind(x, inner) for x in e.outs)
            return CallLet(outs, e.fn, args, go(e.body, inner), e.pos)
        if isinstance(e, TupleLet):
            rhs = go(e.rhs, env)
            inner = dict(env)
            outs = tuple(bind(x, inner) for x in e.outs)
            return TupleLet(outs, rhs, go(e.body, inner), e.pos)
        if isinstance(e, If):
            return If(r(e.var), go(e.then, env), go(e.orelse, env), e.pos)
        raise InternalPostconditionViolation(f"unexpected node {type(e).__name__}")

    return go(e, {})


@dataclass
class CallSite:
    caller: str
    callee: str
    swaps: int


@dataclass
class AllocResult:
    program: TargetProgram
    chain: SubgraphChain
    regions: dict[str, CouplingGraph]
    swaps: int = 0
    call_sites: list[CallSite] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    clamped: list[str] = field(default_factory=list)

    def trace(self) -> dict:
        return {
            "schema_version": 1,
            "preamble": dict(self.program.preamble),
            "swaps": self.swaps,
            "regions": {f: list(g.nodes) for f, g in self.regions.items()},
            "clamped": self.clamped,
            "call_sites": [vars(c) for c in self.call_sites],
            "events": self.events,
        }


class _Body:
    """Allocation state for one function body or ``main``."""

    def __init__(self, owner: str, region: CouplingGraph, run: _Run) -> None:
        self.owner = owner
        self.region = region
        self.run = run
        self.dist = distances(region)

    # helpers
    def _rank(self, q: str) -> int:
        return self.run.rank[q]

    def _swap(self, env: dict[str, str], p: dict[str, str]) -> Swaps:
        swaps = token_swapping(self.region, p) if p else []
        self.run.result.swaps += len(swaps)
        return swaps

    def _event(self, kind: str, **kw) -> None:
        self.run.result.events.append({"kind": kind, "in": self.owner, **kw})

    # main recursion
    def alloc(
        self,
        e: Expr,
        live: dict[str, str],
        free: dict[str, str],
        carry: tuple[str, ...],
        expected: tuple[str, ...] | None,
    ) -> tuple[Expr, tuple[str, ...]]:
        if isinstance(e, Return):
            return self._return(e, live, free, carry, expected)

        if isinstance(e, InitLet):
            x = min(free, key=lambda v: (self._rank(free[v]), v))
            live2 = dict(live)
            live2[x] = free[x]
            free2 = {v: a for v, a in free.items() if v != x}
            self._event("init", source=e.var, target=x, qidx=free[x])
            return self.alloc(subst(e.body, {e.var: x}), live2, free2, carry, expected)

        if isinstance(e, Discard):
            live2 = {v: a for v, a in live.items() if v != e.var}
            free2 = dict(free)
            free2[e.var] = live[e.var]
            self._event("discard", var=e.var, qidx=live[e.var])
            body, ty = self.alloc(e.body, live2, free2, carry, expected)
            return Init(e.var, body, e.pos), ty

        if isinstance(e, CnotLet):
            y1, y2 = e.ins
            env = {**live, **free}
            path = shortest_path(self.region, env[y1], env[y2])
            swaps = [(path[i], path[i + 1]) for i in range(len(path) - 2)]
            self.run.result.swaps += len(swaps)
            env2 = apply_swaps_to_env(swaps, env)
            live2 = {v: env2[v] for v in live if v not in (y1, y2)}
            live2[e.outs[0]] = env2[y1]
            live2[e.outs[1]] = env2[y2]
            free2 = {v: env2[v] for v in free}
            self._event("cnot", swaps=[list(s) for s in swaps], at=[env2[y1], env2[y2]])
            body, ty = self.alloc(e.body, live2, free2, carry, expected)
            return insert_swaps(CnotLet(e.outs, e.ins, body, e.pos), env, swaps), ty

        if isinstance(e, HLet):
            live2 = {v: a for v, a in live.items() if v != e.inp}
            live2[e.out] = live[e.inp]
            body, ty = self.alloc(e.body, live2, free, carry, expected)
            return HLet(e.out, e.inp, body, e.pos), ty

        if isinstance(e, CallLet):
            return self._call(e, live, free, carry, expected)

        if isinstance(e, TupleLet):
            fv = free_vars(e.rhs)
            inner = carry + tuple(sorted((v for v in live if v not in fv and v not in carry),
                                         key=lambda v: (self._rank(live[v]), v)))
            rhs, ty = self.alloc(e.rhs, live, free, inner, None)
            n, c = len(e.outs), len(inner)
            pads = tuple(self.run.names.fresh() for _ in range(len(ty) - n - c))
            live2 = dict(zip(e.outs + inner, ty))
            free2 = dict(zip(pads, ty[n + c:]))
            body, ty2 = self.alloc(e.body, live2, free2, carry, expected)
            return TupleLet(e.outs + inner + pads, rhs, body, e.pos), ty2

        if isinstance(e, If):
            e1, t1 = self.alloc(e.then, live, free, carry, expected)
            e2, t2 = self.alloc(e.orelse, live, free, carry, t1)
            if t1 != t2:
                raise InternalPostconditionViolation("branches did not reconverge")
            return If(e.var, e1, e2, e.pos), t1

        raise InternalPostconditionViolation(f"unexpected node {type(e).__name__}")

    def _return(self, e: Return, live, free, carry, expected):
        vals = tuple(e.vars) + carry
        if set(vals) != set(live) or len(vals) != len(live):
            raise InternalPostconditionViolation(
                f"return ({', '.join(e.vars)}) does not match live qubits {sorted(live)}"
            )
        env = {**live, **free}
        if expected is None:
            pads = tuple(sorted(free, key=lambda v: (self._rank(free[v]), v)))
            out = vals + pads
            return Return(out, e.pos), tuple(env[v] for v in out)
        if len(expected) != len(env):
            raise InternalPostconditionViolation("expected layout has the wrong width")
        p = {env[v]: expected[i] for i, v in enumerate(vals)}
        swaps = self._swap(env, p)
        env2 = apply_swaps_to_env(swaps, env)
        at = {a: v for v, a in env2.items()}
        out = vals + tuple(at[a] for a in expected[len(vals):])
        if tuple(env2[v] for v in out) != tuple(expected):
            raise InternalPostconditionViolation("token swapping missed the expected layout")
        self._event("return", swaps=[list(s) for s in swaps])
        return insert_swaps(Return(out, e.pos), env, swaps), tuple(expected)

    def _call(self, e: CallLet, live, free, carry, expected):
        run = self.run
        sig = run.tgt_sigs[e.fn]
        src: SrcFunType = run.src_sigs[e.fn]
        m, n = len(e.args), len(e.outs)
        phi = subgraph_isomorphism(self.region, run.result.regions[e.fn].induced(sig.params))
        ws = [phi[a] for a in sig.params]
        env = {**live, **free}
        # choose zero qubits to fill the callee's extra slots, nearest first
        targets = ws[m:]
        chosen: dict[str, str] = {}
        pool = dict(free)
        at = {a: v for v, a in env.items()}
        for t in targets:
            v = at.get(t)
            if v in pool:
                chosen[t] = v
                del pool[v]
        for t in targets:
            if t in chosen:
                continue
            v = min(pool, key=lambda u: (self.dist[pool[u]][t], self._rank(pool[u]), u))
            chosen[t] = v
            del pool[v]
        pads = tuple(chosen[t] for t in targets)
        args = tuple(e.args) + pads
        p = {env[y]: ws[i] for i, y in enumerate(args)}
        swaps = self._swap(env, p)
        env2 = apply_swaps_to_env(swaps, env)
        if [env2[y] for y in args] != ws:
            raise InternalPostconditionViolation(f"arguments of {e.fn} not in place")
        run.result.call_sites.append(CallSite(self.owner, e.fn, len(swaps)))
        self._event("call", function=e.fn, swaps=[list(s) for s in swaps])
        extra = tuple(run.names.fresh() for _ in range(len(ws) - src.n_results))
        outs = tuple(e.outs) + extra
        live2 = {v: env2[v] for v in live if v not in e.args}
        live2.update(zip(e.outs, ws[:n]))
        free2 = {v: env2[v] for v in free if v not in pads}
        free2.update(zip(extra, ws[n:]))
        body, ty = self.alloc(e.body, live2, free2, carry, expected)
        return insert_swaps(CallLet(outs, e.fn, args, body, e.pos), env, swaps), ty


@dataclass
class _Run:
    graph: CouplingGraph
    src_sigs: Mapping[str, SrcFunType]
    tgt_sigs: dict[str, TargetFunType]
    rank: dict[str, int]
    names: NameSupply
    result: AllocResult


def qubit_alloc(deriv: ProgramDerivation, g: CouplingGraph) -> AllocResult:
    """Allocate a checked source program onto coupling graph ``g``."""
    chain = construct_subgraphs(g)
    prog = deriv.program
    if deriv.budget > len(g.nodes):
        raise DeviceTooSmall(f"main needs {deriv.budget} qubits, device has {len(g.nodes)}")
    result = AllocResult(TargetProgram((), (), Return(())), chain, {})
    run = _Run(g, deriv.theta, {}, {v: i for i, v in enumerate(g.nodes)}, NameSupply(), result)

    for d in prog.defs:
        sig = deriv.theta[d.name]
        k = sig.n_params + sig.budget
        if k > len(g.nodes):
            raise DeviceTooSmall(f"{d.name} needs {k} qubits, device has {len(g.nodes)}", d.pos)
        if k == 0:
            result.clamped.append(d.name)
        region = chain.get(max(k, 1))
        ws = region.nodes[:k]
        result.regions[d.name] = region
        run.tgt_sigs[d.name] = TargetFunType(ws, region.edges if k else frozenset(), ws, ws)

    defs = []
    for d in prog.defs:
        sig = run.tgt_sigs[d.name]
        src = deriv.theta[d.name]
        body = uniquify_binders(d.params, d.body, run.names)
        pads = tuple(run.names.fresh() for _ in range(src.budget))
        live = dict(zip(d.params, sig.params))
        free = dict(zip(pads, sig.params[src.n_params:]))
        worker = _Body(d.name, result.regions[d.name].induced(sig.params), run)
        out, ty = worker.alloc(body, live, free, (), sig.params)
        if ty != sig.results:
            raise InternalPostconditionViolation(f"{d.name} ends in the wrong layout")
        defs.append(TgtFunDef(d.name, sig, d.params + pads, out, d.pos))

    pre = tuple((run.names.fresh(), v) for v in g.nodes)
    main = uniquify_binders((), prog.main, run.names)
    worker = _Body("main", g, run)
    out, _ = worker.alloc(main, {}, dict(pre), (), None)
    result.program = TargetProgram(tuple(defs), pre, out)
    report = check_program_tgt(result.program, g)
    if not report.ok:
        raise InternalPostconditionViolation(
            "allocated program fails the target checker: " + "; ".join(d.render() for d in report.diagnostics)
        )
    return result
