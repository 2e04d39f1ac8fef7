"""Type checker for the source language.

The judgment tracks a function environment, a budget of free qubits and a
linear context of live ``qbit`` variables. Every check returns a derivation
tree that the allocator and ``--explain`` consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (
    ArityMismatch,
    BranchMismatch,
    BudgetExceeded,
    DuplicateVariable,
    SignatureInferenceFailure,
    SourceTypeError,
    UnknownFunction,
    UnknownVariable,
    UnusedVariable,
)
from .syntax import (
    CallLet,
    CnotLet,
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
    count_nodes,
    free_vars,
    tail_arity,
)


@dataclass(frozen=True)
class Derivation:
    """One rule application. ``budget`` is ``None`` for target derivations."""

    rule: str
    budget: int | None
    context: tuple[tuple[str, str], ...]
    result: tuple[str, ...]
    premises: tuple[Derivation, ...] = ()
    expr: Expr | None = field(default=None, compare=False, repr=False)

    def render(self, indent: int = 0) -> str:
        ctx = ", ".join(f"{x}:{t}" for x, t in self.context) or "."
        res = " * ".join(self.result) or "()"
        n = "" if self.budget is None else f"{self.budget} | "
        lines = ["  " * indent + f"[{self.rule}] {n}{ctx} |- {res}"]
        lines += [p.render(indent + 1) for p in self.premises]
        return "\n".join(lines)

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)


@dataclass(frozen=True)
class ProgramDerivation:
    program: SourceProgram
    theta: Mapping[str, SrcFunType]
    defs: Mapping[str, Derivation]
    main: Derivation
    budget: int

    def render(self) -> str:
        out = []
        for f, d in self.defs.items():
            out.append(f"fun {f} : {self.theta[f]}")
            out.append(d.render(1))
        out.append(f"main at budget {self.budget}")
        out.append(self.main.render(1))
        return "\n".join(out)


def _ctx(gamma: Iterable[str]) -> tuple[tuple[str, str], ...]:
    return tuple((x, "qbit") for x in sorted(gamma))


def _qbits(k: int) -> tuple[str, ...]:
    return ("qbit",) * k


def _fresh_binders(outs, rest: frozenset[str], e: Expr) -> None:
    if len(set(outs)) != len(outs):
        raise DuplicateVariable(f"binder list {', '.join(outs)} repeats a name", e.pos)
    for x in outs:
        if x in rest:
            raise DuplicateVariable(f"{x} is already live (no shadowing)", e.pos)


def check_expr_src(
    theta: Mapping[str, SrcFunType], budget: int, gamma: Iterable[str], e: Expr
) -> Derivation:
    """Check ``theta | budget | gamma |- e`` and return its derivation."""
    g = frozenset(gamma)
    if budget < 0:
        raise BudgetExceeded("negative budget", e.pos)
    d = _check(theta, budget, g, e)
    return d


def _need(x: str, g: frozenset[str], e: Expr) -> None:
    if x not in g:
        raise UnknownVariable(f"{x} is not a live qubit here", e.pos)


def _check(theta: Mapping[str, SrcFunType], n: int, g: frozenset[str], e: Expr) -> Derivation:
    if isinstance(e, Return):
        seen: set[str] = set()
        for x in e.vars:
            if x in seen:
                raise DuplicateVariable(f"{x} returned twice", e.pos)
            seen.add(x)
            _need(x, g, e)
        extra = sorted(g - seen)
        if extra:
            raise UnusedVariable(f"live qubit(s) {', '.join(extra)} neither returned nor discarded", e.pos)
        return Derivation("T-Return", n, _ctx(g), _qbits(len(e.vars)), (), e)

    if isinstance(e, InitLet):
        if e.var in g:
            raise DuplicateVariable(f"{e.var} is already live (no shadowing)", e.pos)
        if n < 1:
            raise BudgetExceeded(f"no free qubit available for {e.var}", e.pos)
        p = _check(theta, n - 1, g | {e.var}, e.body)
        return Derivation("T-Init", n, _ctx(g), p.result, (p,), e)

    if isinstance(e, Discard):
        _need(e.var, g, e)
        p = _check(theta, n + 1, g - {e.var}, e.body)
        return Derivation("T-Discard", n, _ctx(g), p.result, (p,), e)

    if isinstance(e, CnotLet):
        y1, y2 = e.ins
        if y1 == y2:
            raise DuplicateVariable(f"cnot uses {y1} twice", e.pos)
        _need(y1, g, e)
        _need(y2, g, e)
        rest = g - {y1, y2}
        _fresh_binders(e.outs, rest, e)
        p = _check(theta, n, rest | set(e.outs), e.body)
        return Derivation("T-Cnot", n, _ctx(g), p.result, (p,), e)

    if isinstance(e, HLet):
        _need(e.inp, g, e)
        rest = g - {e.inp}
        _fresh_binders((e.out,), rest, e)
        p = _check(theta, n, rest | {e.out}, e.body)
        return Derivation("T-H", n, _ctx(g), p.result, (p,), e)

    if isinstance(e, CallLet):
        if e.fn not in theta:
            raise UnknownFunction(f"unknown function {e.fn}", e.pos)
        sig = theta[e.fn]
        if len(e.args) != sig.n_params:
            raise ArityMismatch(f"{e.fn} takes {sig.n_params} argument(s), got {len(e.args)}", e.pos)
        if len(e.outs) != sig.n_results:
            raise ArityMismatch(f"{e.fn} returns {sig.n_results} qubit(s), {len(e.outs)} bound", e.pos)
        if len(set(e.args)) != len(e.args):
            raise DuplicateVariable(f"argument list of {e.fn} repeats a variable", e.pos)
        for y in e.args:
            _need(y, g, e)
        if n < sig.budget:
            raise BudgetExceeded(f"{e.fn} needs {sig.budget} free qubit(s), only {n} available", e.pos)
        rest = g - set(e.args)
        _fresh_binders(e.outs, rest, e)
        n2 = n - len(e.outs) + len(e.args)
        if n2 < 0:
            raise BudgetExceeded(f"{e.fn} returns more qubits than are available", e.pos)
        p = _check(theta, n2, rest | set(e.outs), e.body)
        return Derivation("T-Call", n, _ctx(g), p.result, (p,), e)

    if isinstance(e, TupleLet):
        fv = free_vars(e.rhs)
        for x in sorted(fv):
            _need(x, g, e)
        p1 = _check(theta, n, fv, e.rhs)
        if len(p1.result) != len(e.outs):
            raise ArityMismatch(f"let binds {len(e.outs)} qubit(s) but the body yields {len(p1.result)}", e.pos)
        rest = g - fv
        _fresh_binders(e.outs, rest, e)
        n2 = n + len(fv) - len(e.outs)
        if n2 < 0:
            raise BudgetExceeded("let produces more qubits than are available", e.pos)
        p2 = _check(theta, n2, rest | set(e.outs), e.body)
        return Derivation("T-Let", n, _ctx(g), p2.result, (p1, p2), e)

    if isinstance(e, If):
        _need(e.var, g, e)
        p1 = _check(theta, n, g, e.then)
        p2 = _check(theta, n, g, e.orelse)
        if p1.result != p2.result:
            raise BranchMismatch(
                f"branches return {len(p1.result)} and {len(p2.result)} qubit(s)", e.pos
            )
        return Derivation("T-If", n, _ctx(g), p1.result, (p1, p2), e)

    raise SourceTypeError(f"{type(e).__name__} is not part of the source language", e.pos)


def check_fundef_src(theta: Mapping[str, SrcFunType], d: FunDef) -> Derivation:
    """Check a definition against its own entry in ``theta`` (recursion allowed)."""
    sig = theta[d.name]
    if len(set(d.params)) != len(d.params):
        raise DuplicateVariable(f"parameters of {d.name} repeat a name", d.pos)
    p = _check(theta, sig.budget, frozenset(d.params), d.body)
    if len(p.result) != sig.n_results:
        raise ArityMismatch(f"{d.name} returns {len(p.result)} qubit(s), signature says {sig.n_results}", d.pos)
    return Derivation("T-FunDef", sig.budget, _ctx(d.params), p.result, (p,), d.body)


def _budget_bound(d: FunDef, theta: Mapping[str, SrcFunType]) -> int:
    calls = _calls(d.body)
    extra = sum(theta[f].budget + theta[f].n_results for f in calls if f in theta)
    return count_nodes(d.body, InitLet) + extra + 1


def _calls(e: Expr) -> list[str]:
    out = []
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, CallLet):
            out.append(x.fn)
        if isinstance(x, Return):
            continue
        if isinstance(x, TupleLet):
            stack += [x.rhs, x.body]
        elif isinstance(x, If):
            stack += [x.then, x.orelse]
        else:
            stack.append(x.body)
    return out


def infer_signatures(defs: Iterable[FunDef]) -> dict[str, SrcFunType]:
    """Minimal budget per function, iterated to a fixpoint for (mutual) recursion."""
    defs = list(defs)
    theta: dict[str, SrcFunType] = {}
    for d in defs:
        if d.name in theta:
            raise DuplicateVariable(f"function {d.name} defined twice", d.pos)
        theta[d.name] = SrcFunType(len(d.params), 0, tail_arity(d.body))
    for _ in range(len(defs) * 4 + 4):
        changed = False
        for d in defs:
            cur = theta[d.name]
            bound = max(_budget_bound(d, theta), cur.budget)
            last: Exception | None = None
            for n in range(cur.budget, bound + 1):
                trial = dict(theta)
                trial[d.name] = SrcFunType(cur.n_params, n, cur.n_results)
                try:
                    check_fundef_src(trial, d)
                except BudgetExceeded as exc:
                    last = exc
                    continue
                if n != cur.budget:
                    theta[d.name] = trial[d.name]
                    changed = True
                break
            else:
                raise SignatureInferenceFailure(
                    f"no budget up to {bound} types {d.name}: {last.message if last else ''}", d.pos
                )
        if not changed:
            return theta
    raise SignatureInferenceFailure("budget inference did not reach a fixpoint")


def infer_main_budget(theta: Mapping[str, SrcFunType], main: Expr, limit: int = 64) -> int:
    """Smallest budget under which ``main`` checks with an empty context."""
    last: Exception | None = None
    for n in range(limit + 1):
        try:
            _check(theta, n, frozenset(), main)
            return n
        except BudgetExceeded as exc:
            last = exc
    raise SignatureInferenceFailure(f"main needs more than {limit} qubits: {last}")


def check_program_src(p: SourceProgram, budget: int | None = None) -> ProgramDerivation:
    """Check every definition and ``main``. Without ``budget`` the minimal one is used."""
    theta = infer_signatures(p.defs)
    defs = {d.name: check_fundef_src(theta, d) for d in p.defs}
    if budget is None:
        budget = infer_main_budget(theta, p.main)
    main = check_expr_src(theta, budget, (), p.main)
    return ProgramDerivation(p, theta, defs, main, budget)
