"""Abstract syntax shared by the source and target languages.

Both languages use one set of expression nodes. ``InitLet`` and ``Discard`` only
occur in source programs; ``Init`` and ``SwapLet`` only in target programs. The
checkers reject nodes that do not belong to their language.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .errors import CaptureError


def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Return:
    vars: tuple[str, ...]
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class InitLet:
    """``let var = init() in body`` (source)."""

    var: str
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class Discard:
    """``discard var; body`` (source)."""

    var: str
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class Init:
    """``init var; body`` (target): resets an existing qubit."""

    var: str
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class CnotLet:
    outs: tuple[str, str]
    ins: tuple[str, str]
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class SwapLet:
    outs: tuple[str, str]
    ins: tuple[str, str]
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class HLet:
    """``let out = H(inp) in body``; only parsed when single-qubit gates are enabled."""

    out: str
    inp: str
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class CallLet:
    outs: tuple[str, ...]
    fn: str
    args: tuple[str, ...]
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class TupleLet:
    outs: tuple[str, ...]
    rhs: Expr
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class If:
    var: str
    then: Expr
    orelse: Expr
    pos: tuple[int, int] | None = _pos()


Expr = Union[Return, InitLet, Discard, Init, CnotLet, SwapLet, HLet, CallLet, TupleLet, If]

SOURCE_ONLY = (InitLet, Discard)
TARGET_ONLY = (Init, SwapLet)


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class SrcFunType:
    """``qbit^n_params --budget--> qbit^n_results``."""

    n_params: int
    budget: int
    n_results: int

    def __str__(self) -> str:
        lhs = " * ".join(["qbit"] * self.n_params) or "()"
        rhs = " * ".join(["qbit"] * self.n_results) or "()"
        return f"{lhs} --{self.budget}--> {rhs}"


def constraint(a: str, b: str) -> tuple[str, str]:
    """Canonical unordered pair ``a ~ b``."""
    return (a, b) if a <= b else (b, a)


def constraint_set(pairs: Iterable[tuple[str, str]]) -> frozenset[tuple[str, str]]:
    return frozenset(constraint(a, b) for a, b in pairs)


@dataclass(frozen=True)
class TargetFunType:
    """``forall quantified. constraints => q(params) -> q(results)``.

    Qubit types ``q(a)`` are represented by their qidx name ``a``.
    """

    quantified: tuple[str, ...]
    constraints: frozenset[tuple[str, str]]
    params: tuple[str, ...]
    results: tuple[str, ...]

    def rename(self, mapping: Mapping[str, str]) -> TargetFunType:
        r = lambda a: mapping.get(a, a)  # noqa: E731
        return TargetFunType(
            tuple(r(a) for a in self.quantified),
            frozenset(constraint(r(a), r(b)) for a, b in self.constraints),
            tuple(r(a) for a in self.params),
            tuple(r(a) for a in self.results),
        )

    def __str__(self) -> str:
        cs = ", ".join(f"{a}~{b}" for a, b in sorted(self.constraints))
        ps = " * ".join(f"q({a})" for a in self.params) or "()"
        rs = " * ".join(f"q({a})" for a in self.results) or "()"
        return f"forall {', '.join(self.quantified)}. {{{cs}}} => {ps} -> {rs}"


# ---------------------------------------------------------------------------
# Programs


@dataclass(frozen=True)
class FunDef:
    name: str
    params: tuple[str, ...]
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class SourceProgram:
    defs: tuple[FunDef, ...]
    main: Expr


@dataclass(frozen=True)
class TgtFunDef:
    name: str
    sig: TargetFunType
    params: tuple[str, ...]
    body: Expr
    pos: tuple[int, int] | None = _pos()


@dataclass(frozen=True)
class TargetProgram:
    defs: tuple[TgtFunDef, ...]
    preamble: tuple[tuple[str, str], ...]
    main: Expr


@dataclass(frozen=True)
class CouplingGraph:
    """Undirected simple graph; edges are stored as canonical sorted pairs."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    @staticmethod
    def make(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> CouplingGraph:
        return CouplingGraph(tuple(nodes), constraint_set(edges))

    def has_edge(self, a: str, b: str) -> bool:
        return constraint(a, b) in self.edges

    def neighbors(self, v: str) -> list[str]:
        out = [b if a == v else a for a, b in self.edges if v in (a, b)]
        return sorted(out)

    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {v: [] for v in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for v in adj:
            adj[v].sort()
        return adj

    def induced(self, keep: Iterable[str]) -> CouplingGraph:
        ks = set(keep)
        return CouplingGraph(
            tuple(v for v in self.nodes if v in ks),
            frozenset(e for e in self.edges if e[0] in ks and e[1] in ks),
        )


# ---------------------------------------------------------------------------
# Variables and substitution


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Return):
        return frozenset(e.vars)
    if isinstance(e, InitLet):
        return free_vars(e.body) - {e.var}
    if isinstance(e, (Discard, Init)):
        return free_vars(e.body) | {e.var}
    if isinstance(e, (CnotLet, SwapLet)):
        return (free_vars(e.body) - set(e.outs)) | set(e.ins)
    if isinstance(e, HLet):
        return (free_vars(e.body) - {e.out}) | {e.inp}
    if isinstance(e, CallLet):
        return (free_vars(e.body) - set(e.outs)) | set(e.args)
    if isinstance(e, TupleLet):
        return free_vars(e.rhs) | (free_vars(e.body) - set(e.outs))
    if isinstance(e, If):
        return free_vars(e.then) | free_vars(e.orelse) | {e.var}
    raise TypeError(f"not an expression: {e!r}")


def _under(binders: Iterable[str], m: dict[str, str], body: Expr) -> dict[str, str]:
    """Restrict ``m`` below ``binders`` and reject capture of substituted names."""
    bs = set(binders)
    inner = {k: v for k, v in m.items() if k not in bs}
    clash = [k for k, v in inner.items() if v in bs]
    if clash:
        fv = free_vars(body)
        for k in clash:
            if k in fv:
                v = inner[k]
                raise CaptureError(f"substituting {v} for {k} would be captured by a binder")
    return inner


def subst(e: Expr, m: Mapping[str, str]) -> Expr:
    """Simultaneous capture-checked renaming of free variables."""
    m = {k: v for k, v in m.items() if k != v}
    if not m:
        return e
    return _subst(e, m)


def _subst(e: Expr, m: dict[str, str]) -> Expr:
    r = lambda x: m.get(x, x)  # noqa: E731
    if not m:
        return e
    if isinstance(e, Return):
        return Return(tuple(r(x) for x in e.vars), e.pos)
    if isinstance(e, InitLet):
        return InitLet(e.var, _subst(e.body, _under([e.var], m, e.body)), e.pos)
    if isinstance(e, Discard):
        return Discard(r(e.var), _subst(e.body, m), e.pos)
    if isinstance(e, Init):
        return Init(r(e.var), _subst(e.body, m), e.pos)
    if isinstance(e, CnotLet):
        ins = (r(e.ins[0]), r(e.ins[1]))
        return CnotLet(e.outs, ins, _subst(e.body, _under(e.outs, m, e.body)), e.pos)
    if isinstance(e, SwapLet):
        ins = (r(e.ins[0]), r(e.ins[1]))
        return SwapLet(e.outs, ins, _subst(e.body, _under(e.outs, m, e.body)), e.pos)
    if isinstance(e, HLet):
        return HLet(e.out, r(e.inp), _subst(e.body, _under([e.out], m, e.body)), e.pos)
    if isinstance(e, CallLet):
        args = tuple(r(x) for x in e.args)
        return CallLet(e.outs, e.fn, args, _subst(e.body, _under(e.outs, m, e.body)), e.pos)
    if isinstance(e, TupleLet):
        rhs = _subst(e.rhs, m)
        return TupleLet(e.outs, rhs, _subst(e.body, _under(e.outs, m, e.body)), e.pos)
    if isinstance(e, If):
        return If(r(e.var), _subst(e.then, m), _subst(e.orelse, m), e.pos)
    raise TypeError(f"not an expression: {e!r}")


def binders(e: Expr) -> list[str]:
    """All binding occurrences in ``e`` in pre-order."""
    out: list[str] = []
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, InitLet):
            out.append(x.var)
        elif isinstance(x, (CnotLet, SwapLet, CallLet, TupleLet)):
            out.extend(x.outs)
        elif isinstance(x, HLet):
            out.append(x.out)
        if isinstance(x, TupleLet):
            stack.append(x.body)
            stack.append(x.rhs)
        elif isinstance(x, If):
            stack.append(x.orelse)
            stack.append(x.then)
        elif not isinstance(x, Return):
            stack.append(x.body)
    return out


def expr_size(e: Expr) -> int:
    if isinstance(e, Return):
        return 1
    if isinstance(e, TupleLet):
        return 1 + expr_size(e.rhs) + expr_size(e.body)
    if isinstance(e, If):
        return 1 + expr_size(e.then) + expr_size(e.orelse)
    return 1 + expr_size(e.body)


def count_nodes(e: Expr, kind: type) -> int:
    n = 1 if isinstance(e, kind) else 0
    if isinstance(e, Return):
        return n
    if isinstance(e, TupleLet):
        return n + count_nodes(e.rhs, kind) + count_nodes(e.body, kind)
    if isinstance(e, If):
        return n + count_nodes(e.then, kind) + count_nodes(e.orelse, kind)
    return n + count_nodes(e.body, kind)


class NameSupply:
    """Deterministic fresh names with a reserved prefix the source parser rejects."""

    def __init__(self, prefix: str = "%v") -> None:
        self.prefix = prefix
        self._counter = itertools.count()

    def fresh(self) -> str:
        return f"{self.prefix}{next(self._counter)}"


def apply_swaps_to_env(
    swaps: Iterable[tuple[str, str]], env: Mapping[str, str]
) -> dict[str, str]:
    """Move variables along a swap sequence; ``env`` maps variable to qidx.

    A swap ``(a, b)`` exchanges whichever variables sit at ``a`` and ``b``.
    """
    out = dict(env)
    at = {q: v for v, q in out.items()}
    for a, b in swaps:
        va, vb = at.get(a), at.get(b)
        if va is not None:
            out[va] = b
        if vb is not None:
            out[vb] = a
        at[a], at[b] = vb, va
        if at[a] is None:
            del at[a]
        if at[b] is None:
            del at[b]
    return out


def tail_arity(e: Expr) -> int:
    """Length of the tuple in tail position, following the first branch of an ``if``."""
    while True:
        if isinstance(e, Return):
            return len(e.vars)
        if isinstance(e, If):
            e = e.then
        else:
            e = e.body
