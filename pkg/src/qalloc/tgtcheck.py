"""Type checker for the target language.

Qubit types carry a qidx; swaps and cnots are only typeable when their two
qidxs are related by the ambient constraint set. Functions are polymorphic in
their qidxs and calls instantiate them by first-order matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import (
    ArityMismatch,
    BranchMismatch,
    ConnectivityViolation,
    ConstraintUnsatisfied,
    DuplicateVariable,
    GraphError,
    IllFormedContext,
    InstantiationConflict,
    NonInjectiveInstantiation,
    QallocError,
    TargetTypeError,
    TypeCheckError,
    UnknownFunction,
    UnknownVariable,
    UnusedVariable,
)
from .graphs import shortest_path
from .srccheck import Derivation
from .syntax import (
    CallLet,
    CnotLet,
    CouplingGraph,
    Expr,
    HLet,
    If,
    Init,
    Return,
    SwapLet,
    TargetFunType,
    TargetProgram,
    TgtFunDef,
    TupleLet,
    constraint,
    free_vars,
)

Env = Mapping[str, str]


def _ctx(g: Env) -> tuple[tuple[str, str], ...]:
    return tuple((x, f"q({a})") for x, a in sorted(g.items()))


def _wf(g: Env, e: Expr | None) -> None:
    seen: dict[str, str] = {}
    for x, a in g.items():
        if a in seen:
            raise IllFormedContext(f"{seen[a]} and {x} share qidx {a}", e.pos if e else None)
        seen[a] = x


def _need(x: str, g: Env, e: Expr) -> str:
    if x not in g:
        raise UnknownVariable(f"{x} is not a live qubit here", e.pos)
    return g[x]


def _bind(outs, rest: Env, e: Expr) -> None:
    if len(set(outs)) != len(outs):
        raise DuplicateVariable(f"binder list {', '.join(outs)} repeats a name", e.pos)
    for x in outs:
        if x in rest:
            raise DuplicateVariable(f"{x} is already live", e.pos)


def _path_hint(phi: frozenset, a: str, b: str) -> str:
    nodes = {a, b} | {v for c in phi for v in c}
    try:
        path = shortest_path(CouplingGraph.make(sorted(nodes), phi), a, b)
    except GraphError:
        return ""
    return f"; nearest path {' - '.join(path)}"


def instantiate_call(sig: TargetFunType, arg_types: tuple[str, ...], phi: frozenset, e: Expr | None = None):
    """Match parameter qidxs against argument qidxs; return the instantiation."""
    pos = e.pos if e else None
    if len(arg_types) != len(sig.params):
        raise ArityMismatch(f"expected {len(sig.params)} argument(s), got {len(arg_types)}", pos)
    sigma: dict[str, str] = {}
    for a, b in zip(sig.params, arg_types):
        if sigma.get(a, b) != b:
            raise InstantiationConflict(f"qidx {a} instantiated to both {sigma[a]} and {b}", pos)
        sigma[a] = b
    if len(set(sigma.values())) != len(sigma):
        raise NonInjectiveInstantiation("two quantified qidxs instantiated to the same qidx", pos)
    for a, b in sorted(sig.constraints):
        if constraint(sigma.get(a, a), sigma.get(b, b)) not in phi:
            raise ConstraintUnsatisfied(
                f"callee needs {sigma.get(a, a)}~{sigma.get(b, b)}, not available here", pos
            )
    return sigma


def check_expr_tgt(theta: Mapping[str, TargetFunType], phi: frozenset, gamma: Env, e: Expr) -> Derivation:
    g = dict(gamma)
    _wf(g, e)
    return _check(theta, frozenset(phi), g, e)


def _check(theta, phi: frozenset, g: dict[str, str], e: Expr) -> Derivation:
    if isinstance(e, Return):
        seen: set[str] = set()
        for x in e.vars:
            if x in seen:
                raise DuplicateVariable(f"{x} returned twice", e.pos)
            seen.add(x)
            _need(x, g, e)
        extra = sorted(set(g) - seen)
        if extra:
            raise UnusedVariable(f"qubit(s) {', '.join(extra)} not returned", e.pos)
        return Derivation("T-Return", None, _ctx(g), tuple(g[x] for x in e.vars), (), e)

    if isinstance(e, Init):
        _need(e.var, g, e)
        p = _check(theta, phi, g, e.body)
        return Derivation("T-Init", None, _ctx(g), p.result, (p,), e)

    if isinstance(e, (SwapLet, CnotLet)):
        y1, y2 = e.ins
        if y1 == y2:
            raise DuplicateVariable(f"gate uses {y1} twice", e.pos)
        a1, a2 = _need(y1, g, e), _need(y2, g, e)
        if constraint(a1, a2) not in phi:
            raise ConnectivityViolation(
                f"no coupling {a1}~{a2} for ({y1}, {y2}){_path_hint(phi, a1, a2)}", e.pos
            )
        rest = {x: a for x, a in g.items() if x not in (y1, y2)}
        _bind(e.outs, rest, e)
        rest[e.outs[0]] = a1
        rest[e.outs[1]] = a2
        p = _check(theta, phi, rest, e.body)
        rule = "T-Swap" if isinstance(e, SwapLet) else "T-Cnot"
        return Derivation(rule, None, _ctx(g), p.result, (p,), e)

    if isinstance(e, HLet):
        a = _need(e.inp, g, e)
        rest = {x: b for x, b in g.items() if x != e.inp}
        _bind((e.out,), rest, e)
        rest[e.out] = a
        p = _check(theta, phi, rest, e.body)
        return Derivation("T-H", None, _ctx(g), p.result, (p,), e)

    if isinstance(e, CallLet):
        if e.fn not in theta:
            raise UnknownFunction(f"unknown function {e.fn}", e.pos)
        sig = theta[e.fn]
        if len(set(e.args)) != len(e.args):
            raise DuplicateVariable(f"argument list of {e.fn} repeats a variable", e.pos)
        tys = tuple(_need(y, g, e) for y in e.args)
        sigma = instantiate_call(sig, tys, phi, e)
        if len(e.outs) != len(sig.results):
            raise ArityMismatch(f"{e.fn} returns {len(sig.results)} qubit(s), {len(e.outs)} bound", e.pos)
        rest = {x: a for x, a in g.items() if x not in e.args}
        _bind(e.outs, rest, e)
        for x, a in zip(e.outs, sig.results):
            rest[x] = sigma.get(a, a)
        _wf(rest, e)
        p = _check(theta, phi, rest, e.body)
        return Derivation("T-Call", None, _ctx(g), p.result, (p,), e)

    if isinstance(e, TupleLet):
        fv = free_vars(e.rhs)
        for x in sorted(fv):
            _need(x, g, e)
        g1 = {x: a for x, a in g.items() if x in fv}
        p1 = _check(theta, phi, g1, e.rhs)
        if len(p1.result) != len(e.outs):
            raise ArityMismatch(f"let binds {len(e.outs)} qubit(s) but the body yields {len(p1.result)}", e.pos)
        rest = {x: a for x, a in g.items() if x not in fv}
        _bind(e.outs, rest, e)
        rest.update(zip(e.outs, p1.result))
        _wf(rest, e)
        p2 = _check(theta, phi, rest, e.body)
        return Derivation("T-Let", None, _ctx(g), p2.result, (p1, p2), e)

    if isinstance(e, If):
        _need(e.var, g, e)
        p1 = _check(theta, phi, g, e.then)
        p2 = _check(theta, phi, g, e.orelse)
        if p1.result != p2.result:
            raise BranchMismatch(
                "branches end in different layouts: "
                f"({', '.join(p1.result)}) vs ({', '.join(p2.result)})",
                e.pos,
            )
        return Derivation("T-If", None, _ctx(g), p1.result, (p1, p2), e)

    raise TargetTypeError(f"{type(e).__name__} is not part of the target language", e.pos)


def check_signature(name: str, sig: TargetFunType, pos=None) -> None:
    q = set(sig.quantified)
    if len(q) != len(sig.quantified):
        raise TargetTypeError(f"{name}: quantified qidxs repeat", pos)
    if len(set(sig.params)) != len(sig.params):
        raise TargetTypeError(f"{name}: parameters must have distinct qidxs", pos)
    used = set(sig.params) | set(sig.results) | {a for c in sig.constraints for a in c}
    if not used <= q:
        raise TargetTypeError(f"{name}: unbound qidx(s) {', '.join(sorted(used - q))}", pos)
    if not set(sig.results) <= set(sig.params):
        raise TargetTypeError(f"{name}: every result qidx must come from a parameter", pos)


def check_fundef_tgt(theta: Mapping[str, TargetFunType], d: TgtFunDef) -> Derivation:
    check_signature(d.name, d.sig, d.pos)
    if len(d.params) != len(d.sig.params):
        raise ArityMismatch(f"{d.name}: {len(d.params)} parameter(s) but {len(d.sig.params)} type(s)", d.pos)
    if len(set(d.params)) != len(d.params):
        raise DuplicateVariable(f"parameters of {d.name} repeat a name", d.pos)
    g = dict(zip(d.params, d.sig.params))
    p = check_expr_tgt(theta, d.sig.constraints, g, d.body)
    if p.result != d.sig.results:
        raise TargetTypeError(
            f"{d.name} returns ({', '.join(p.result)}), declared ({', '.join(d.sig.results)})",
            d.body.pos or d.pos,
        )
    return Derivation("T-FunDef", None, _ctx(g), p.result, (p,), d.body)


@dataclass
class TgtReport:
    diagnostics: list[QallocError] = field(default_factory=list)
    derivations: dict[str, Derivation] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def render(self) -> str:
        return "\n\n".join(f"{k}:\n{d.render(1)}" for k, d in self.derivations.items())


def check_program_tgt(p: TargetProgram, graph: CouplingGraph) -> TgtReport:
    """Check every definition and ``main``; one diagnostic per failing unit."""
    rep = TgtReport()
    theta: dict[str, TargetFunType] = {}
    for d in p.defs:
        if d.name in theta:
            rep.diagnostics.append(DuplicateVariable(f"function {d.name} defined twice", d.pos))
        theta[d.name] = d.sig
    for d in p.defs:
        try:
            rep.derivations[d.name] = check_fundef_tgt(theta, d)
        except TypeCheckError as exc:
            rep.diagnostics.append(exc)
    try:
        nodes = set(graph.nodes)
        names = [x for x, _ in p.preamble]
        if len(set(names)) != len(names):
            raise DuplicateVariable("preamble repeats a variable")
        for x, a in p.preamble:
            if a not in nodes:
                raise IllFormedContext(f"{x} placed on {a}, which is not a device qubit", p.main.pos)
        rep.derivations["main"] = check_expr_tgt(theta, graph.edges, dict(p.preamble), p.main)
    except TypeCheckError as exc:
        rep.diagnostics.append(exc)
    return rep
