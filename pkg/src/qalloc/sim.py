"""Density-matrix interpreters for the source and target languages.

Wires are named by labels starting with ``@`` so they can never be captured by
a program binder. Source wires are ``@0, @1, ...``; target wires are ``@``
followed by the device qubit name. Measurement branches keep their
unnormalised states so branch weights can be read off as traces.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BranchStructureMismatch,
    ConnectivityStuck,
    FuelExhausted,
    StuckIllFormed,
    StuckNoFreeQubit,
    TooLarge,
    TooLargeWithoutHint,
)
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
    Return,
    SourceProgram,
    SwapLet,
    TargetProgram,
    TupleLet,
    subst,
)

MAX_WIRES = 10
EXHAUSTIVE_ISO_LIMIT = 6
DEFAULT_FUEL = 10_000

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_K_RESET = (
    np.array([[1, 0], [0, 0]], dtype=complex),
    np.array([[0, 1], [0, 0]], dtype=complex),
)
_PROJ = {
    False: np.array([[1, 0], [0, 0]], dtype=complex),
    True: np.array([[0, 0], [0, 1]], dtype=complex),
}


def default_fuel() -> int:
    return int(os.environ.get("QALLOC_FUEL", DEFAULT_FUEL))


@dataclass(frozen=True)
class DensityState:
    """Unnormalised density operator; wire ``labels[0]`` is the most significant bit."""

    labels: tuple[str, ...]
    matrix: np.ndarray = field(compare=False)

    @staticmethod
    def zero(labels: Sequence[str]) -> DensityState:
        n = len(labels)
        if n > MAX_WIRES:
            raise TooLarge(f"{n} wires exceed the simulator limit of {MAX_WIRES}")
        m = np.zeros((2**n, 2**n), dtype=complex)
        m[0, 0] = 1.0
        return DensityState(tuple(labels), m)

    @property
    def n(self) -> int:
        return len(self.labels)

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def _idx(self, wires: Sequence[str]) -> list[int]:
        try:
            return [self.labels.index(w) for w in wires]
        except ValueError as exc:
            raise StuckIllFormed(f"unknown wire in {list(wires)}") from exc

    def _sandwich(self, left: np.ndarray, wires: Sequence[str]) -> np.ndarray:
        """``K rho K^dagger`` for an operator ``K`` acting on ``wires``."""
        n, k = self.n, len(wires)
        idx = self._idx(wires)
        t = self.matrix.reshape((2,) * (2 * n))
        kt = left.reshape((2,) * (2 * k))
        t = np.tensordot(kt, t, axes=(list(range(k, 2 * k)), idx))
        t = np.moveaxis(t, list(range(k)), idx)
        cols = [i + n for i in idx]
        t = np.tensordot(kt.conj(), t, axes=(list(range(k, 2 * k)), cols))
        t = np.moveaxis(t, list(range(k)), cols)
        return t.reshape(2**n, 2**n)

    def apply(self, u: np.ndarray, wires: Sequence[str]) -> DensityState:
        return DensityState(self.labels, self._sandwich(u, wires))

    def reset(self, wire: str) -> DensityState:
        m = sum(self._sandwich(k, [wire]) for k in _K_RESET)
        return DensityState(self.labels, m)

    def project(self, wire: str, outcome: bool) -> DensityState:
        return DensityState(self.labels, self._sandwich(_PROJ[outcome], [wire]))

    def permuted(self, order: Sequence[str]) -> DensityState:
        """The same state with its wires listed in ``order``."""
        n = self.n
        perm = self._idx(order)
        t = self.matrix.reshape((2,) * (2 * n))
        t = np.transpose(t, perm + [p + n for p in perm])
        return DensityState(tuple(order), t.reshape(2**n, 2**n))

    def relabel(self, mapping: Mapping[str, str]) -> DensityState:
        return DensityState(tuple(mapping.get(l, l) for l in self.labels), self.matrix)


def density_isomorphic(
    a: DensityState,
    b: DensityState,
    hint: Mapping[str, str] | None = None,
    tol: float = 1e-9,
) -> bool:
    """Equal up to a renaming of wires. ``hint`` maps labels of ``a`` to labels of ``b``."""
    if a.n != b.n:
        return False
    if hint is not None:
        bb = b.permuted([hint[l] for l in a.labels])
        if np.linalg.norm(a.matrix - bb.matrix) <= tol:
            return True
    if a.n > EXHAUSTIVE_ISO_LIMIT:
        if hint is None:
            raise TooLargeWithoutHint(f"{a.n} wires need a correspondence hint")
        return False
    for perm in itertools.permutations(b.labels):
        if np.linalg.norm(a.matrix - b.permuted(perm).matrix) <= tol:
            return True
    return False


# ---------------------------------------------------------------------------
# Configurations and single steps


@dataclass(frozen=True)
class SrcConfig:
    free: frozenset[str]
    state: DensityState
    expr: Expr


@dataclass(frozen=True)
class TgtConfig:
    state: DensityState
    expr: Expr


def _wire_key(w: str):
    body = w[1:]
    return (0, int(body), "") if body.isdigit() else (1, 0, body)


def _inline(e: CallLet, defs: Mapping[str, tuple[tuple[str, ...], Expr]]) -> Expr:
    if e.fn not in defs:
        raise StuckIllFormed(f"call to unknown function {e.fn}")
    params, body = defs[e.fn]
    if len(params) != len(e.args):
        raise StuckIllFormed(f"{e.fn} called with {len(e.args)} argument(s)")
    return TupleLet(e.outs, subst(body, dict(zip(params, e.args))), e.body)


def _wires(state: DensityState, *xs: str) -> None:
    for x in xs:
        if x not in state.labels:
            raise StuckIllFormed(f"{x} is not a wire")
    if len(set(xs)) != len(xs):
        raise StuckIllFormed("a gate uses one wire twice")


def step_src(cfg: SrcConfig, defs) -> list[tuple[bool | None, SrcConfig]]:
    """One reduction. Returns ``(outcome, next)`` pairs; two of them for an ``if``."""
    e, st, free = cfg.expr, cfg.state, cfg.free
    if isinstance(e, InitLet):
        if not free:
            raise StuckNoFreeQubit(f"no free qubit for {e.var}", e.pos)
        w = min(free, key=_wire_key)
        return [(None, SrcConfig(free - {w}, st, subst(e.body, {e.var: w})))]
    if isinstance(e, Discard):
        _wires(st, e.var)
        return [(None, SrcConfig(free | {e.var}, st.reset(e.var), e.body))]
    if isinstance(e, CnotLet):
        _wires(st, *e.ins)
        nxt = subst(e.body, {e.outs[0]: e.ins[0], e.outs[1]: e.ins[1]})
        return [(None, SrcConfig(free, st.apply(CNOT, e.ins), nxt))]
    if isinstance(e, HLet):
        _wires(st, e.inp)
        return [(None, SrcConfig(free, st.apply(HADAMARD, [e.inp]), subst(e.body, {e.out: e.inp})))]
    if isinstance(e, CallLet):
        return [(None, SrcConfig(free, st, _inline(e, defs)))]
    if isinstance(e, TupleLet):
        if isinstance(e.rhs, Return):
            if len(e.rhs.vars) != len(e.outs):
                raise StuckIllFormed("let arity mismatch at run time")
            return [(None, SrcConfig(free, st, subst(e.body, dict(zip(e.outs, e.rhs.vars)))))]
        out = []
        for o, c in step_src(SrcConfig(free, st, e.rhs), defs):
            out.append((o, SrcConfig(c.free, c.state, TupleLet(e.outs, c.expr, e.body, e.pos))))
        return out
    if isinstance(e, If):
        _wires(st, e.var)
        return [
            (True, SrcConfig(free, st.project(e.var, True), e.then)),
            (False, SrcConfig(free, st.project(e.var, False), e.orelse)),
        ]
    if isinstance(e, Return):
        raise StuckIllFormed("a value does not step")
    raise StuckIllFormed(f"{type(e).__name__} is not source syntax")


def step_tgt(cfg: TgtConfig, defs, graph: CouplingGraph) -> list[tuple[bool | None, TgtConfig]]:
    e, st = cfg.expr, cfg.state
    if isinstance(e, Init):
        _wires(st, e.var)
        return [(None, TgtConfig(st.reset(e.var), e.body))]
    if isinstance(e, (SwapLet, CnotLet)):
        _wires(st, *e.ins)
        a, b = (w[1:] for w in e.ins)
        if not graph.has_edge(a, b):
            raise ConnectivityStuck(f"{a} and {b} are not coupled on the device", e.pos)
        gate = SWAP if isinstance(e, SwapLet) else CNOT
        nxt = subst(e.body, {e.outs[0]: e.ins[0], e.outs[1]: e.ins[1]})
        return [(None, TgtConfig(st.apply(gate, e.ins), nxt))]
    if isinstance(e, HLet):
        _wires(st, e.inp)
        return [(None, TgtConfig(st.apply(HADAMARD, [e.inp]), subst(e.body, {e.out: e.inp})))]
    if isinstance(e, CallLet):
        return [(None, TgtConfig(st, _inline(e, defs)))]
    if isinstance(e, TupleLet):
        if isinstance(e.rhs, Return):
            if len(e.rhs.vars) != len(e.outs):
                raise StuckIllFormed("let arity mismatch at run time")
            return [(None, TgtConfig(st, subst(e.body, dict(zip(e.outs, e.rhs.vars)))))]
        return [
            (o, TgtConfig(c.state, TupleLet(e.outs, c.expr, e.body, e.pos)))
            for o, c in step_tgt(TgtConfig(st, e.rhs), defs, graph)
        ]
    if isinstance(e, If):
        _wires(st, e.var)
        return [
            (True, TgtConfig(st.project(e.var, True), e.then)),
            (False, TgtConfig(st.project(e.var, False), e.orelse)),
        ]
    if isinstance(e, Return):
        raise StuckIllFormed("a value does not step")
    raise StuckIllFormed(f"{type(e).__name__} is not target syntax")


# ---------------------------------------------------------------------------
# Whole runs


@dataclass
class BranchTrace:
    outcomes: tuple[bool, ...]
    config: SrcConfig | TgtConfig
    steps: int

    @property
    def weight(self) -> float:
        return self.config.state.trace()

    @property
    def values(self) -> tuple[str, ...]:
        e = self.config.expr
        assert isinstance(e, Return)
        return e.vars


def run_to_values(cfg, stepper, fuel: int | None = None, prune: float | None = None) -> list[BranchTrace]:
    """Explore every measurement branch depth first; fuel counts steps over all branches.

    Branches whose weight falls to ``prune`` or below are dropped. Pending
    ``let`` continuations live on an explicit frame stack, so a step costs the
    same however deeply calls have nested; the step relation is unchanged.
    """
    fuel = default_fuel() if fuel is None else fuel
    done: list[BranchTrace] = []
    todo = [((), cfg, None, 0)]
    used = 0
    while todo:
        outs, c, frames, k = todo.pop()
        while True:
            e = c.expr
            if isinstance(e, TupleLet) and not isinstance(e.rhs, Return):
                frames = (e.outs, e.body, e.pos, frames)
                c = replace(c, expr=e.rhs)
                continue
            if isinstance(e, Return) and frames is None:
                done.append(BranchTrace(outs, c, k))
                break
            if used >= fuel:
                raise FuelExhausted(f"fuel of {fuel} steps exhausted", done)
            used += 1
            k += 1
            if isinstance(e, Return):
                f_outs, f_body, f_pos, frames = frames
                c = replace(c, expr=TupleLet(f_outs, e, f_body, f_pos))
            nxt = stepper(c)
            if len(nxt) == 1:
                c = nxt[0][1]
                continue
            live = [(o, n) for o, n in nxt if prune is None or n.state.trace() > prune]
            if not live:
                break
            for o, n in reversed(live[1:]):
                todo.append((outs + (o,), n, frames, k))
            outs = outs + (live[0][0],)
            c = live[0][1]
    return done


def _src_defs(p: SourceProgram):
    return {d.name: (d.params, d.body) for d in p.defs}


def _tgt_defs(p: TargetProgram):
    return {d.name: (d.params, d.body) for d in p.defs}


def source_wires(n: int) -> list[str]:
    return [f"@{i}" for i in range(n)]


def run_source(p: SourceProgram, n_wires: int, fuel: int | None = None, prune: float | None = None):
    ws = source_wires(n_wires)
    cfg = SrcConfig(frozenset(ws), DensityState.zero(ws), p.main)
    defs = _src_defs(p)
    return run_to_values(cfg, lambda c: step_src(c, defs), fuel, prune)


def target_initial(p: TargetProgram, graph: CouplingGraph) -> TgtConfig:
    ws = ["@" + v for v in graph.nodes]
    e = subst(p.main, {x: "@" + a for x, a in p.preamble})
    return TgtConfig(DensityState.zero(ws), e)


def run_target(p: TargetProgram, graph: CouplingGraph, fuel: int | None = None, prune: float | None = None):
    defs = _tgt_defs(p)
    return run_to_values(target_initial(p, graph), lambda c: step_tgt(c, defs, graph), fuel, prune)


@dataclass
class PreservationReport:
    """``searched`` counts branches matched only by permutation search, not by the hint."""

    pairs: int
    max_state_error: float
    max_weight_error: float
    searched: int = 0


def check_semantic_preservation(
    src: SourceProgram,
    tgt: TargetProgram,
    graph: CouplingGraph,
    fuel: int | None = None,
    tol: float = 1e-9,
) -> PreservationReport:
    """Run both programs and compare terminal states branch by branch.

    Source and target branches are paired by their measurement outcomes. The
    source machine gets one wire per device qubit so both sides have equal width.
    Raises ``BranchStructureMismatch`` on any disagreement.
    """
    s_runs = {t.outcomes: t for t in run_source(src, len(graph.nodes), fuel, prune=1e-12)}
    t_runs = {t.outcomes: t for t in run_target(tgt, graph, fuel, prune=1e-12)}
    if set(s_runs) != set(t_runs):
        raise BranchStructureMismatch(
            f"outcome sequences differ: {sorted(set(s_runs) ^ set(t_runs))[:4]}"
        )
    worst_s = worst_w = 0.0
    searched = 0
    for key, s in s_runs.items():
        t = t_runs[key]
        dw = abs(s.weight - t.weight)
        worst_w = max(worst_w, dw)
        if dw > tol:
            raise BranchStructureMismatch(f"branch {key}: weights {s.weight} vs {t.weight}")
        sv, tv = s.values, t.values
        rest = sorted(s.config.free, key=_wire_key)
        if len(tv) != len(sv) + len(rest):
            raise BranchStructureMismatch(f"branch {key}: target returns {len(tv)} wires")
        hint = dict(zip(list(sv) + rest, tv))
        a, b = s.config.state, t.config.state
        bb = b.permuted([hint[l] for l in a.labels])
        err = float(np.linalg.norm(a.matrix - bb.matrix))
        if err > tol:
            if a.n > EXHAUSTIVE_ISO_LIMIT or not density_isomorphic(a, b, None, tol):
                raise BranchStructureMismatch(f"branch {key}: terminal states differ (error {err:.3g})")
            searched += 1
        else:
            worst_s = max(worst_s, err)
    return PreservationReport(len(s_runs), worst_s, worst_w, searched)
