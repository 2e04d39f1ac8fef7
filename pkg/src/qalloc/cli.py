"""Command line front end: ``qalloc <command> ...``.

Exit status is 0 on success, 1 when a program is rejected or a verification
fails, and 2 for usage errors such as missing files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .alloc import qubit_alloc
from .errors import FuelExhausted, QallocError
from .frontend import parse_graph, parse_source, parse_target, print_graph, print_target
from .fuzz import run_fuzz
from .graphs import articulation_points, construct_subgraphs, to_dot
from .sim import (
    MAX_WIRES,
    check_semantic_preservation,
    default_fuel,
    run_source,
    run_target,
)
from .srccheck import check_program_src
from .tgtcheck import check_program_tgt

SCHEMA_VERSION = 1


class Usage(Exception):
    pass


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise Usage(f"no such file: {path}")
    return p.read_text()


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.json:
        print(json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2, sort_keys=True))
    elif text:
        print(text)


def _graph(args, required: bool = True):
    path = getattr(args, "graph", None)
    if not path:
        if required:
            raise Usage("this command needs --graph FILE")
        return None, None
    return parse_graph(_read(path)), path


def cmd_check_src(args) -> int:
    prog = parse_source(_read(args.file), allow_h=args.allow_h)
    budget = args.budget
    if budget is None and args.graph:
        budget = len(_graph(args)[0].nodes)
    d = check_program_src(prog, budget)
    sigs = {f: str(t) for f, t in d.theta.items()}
    _emit(args, {"ok": True, "budget": d.budget, "signatures": sigs},
          d.render() if args.explain else "\n".join(
              [f"{f} : {t}" for f, t in sigs.items()] + [f"ok: main checks with {d.budget} qubit(s)"]))
    return 0


def cmd_check_tgt(args) -> int:
    prog = parse_target(_read(args.file), allow_h=args.allow_h)
    g, _ = _graph(args)
    rep = check_program_tgt(prog, g)
    for d in rep.diagnostics:
        print(d.render(args.file), file=sys.stderr)
    text = rep.render() if args.explain and rep.ok else ("ok" if rep.ok else None)
    _emit(args, {"ok": rep.ok, "diagnostics": [d.render(args.file) for d in rep.diagnostics]}, text)
    return 0 if rep.ok else 1


def cmd_alloc(args) -> int:
    prog = parse_source(_read(args.file), allow_h=args.allow_h)
    g, _ = _graph(args)
    res = qubit_alloc(check_program_src(prog), g)
    text = print_target(res.program)
    if args.output:
        Path(args.output).write_text(text)
    if args.emit_trace:
        Path(args.emit_trace).write_text(json.dumps(res.trace(), indent=2, sort_keys=True))
    payload = {"swaps": res.swaps, "call_sites": [vars(c) for c in res.call_sites]}
    if not args.output:
        payload["program"] = text
    _emit(args, payload, None if args.output else text.rstrip("\n"))
    if args.output and not args.json:
        print(f"wrote {args.output} ({res.swaps} swap(s))")
    return 0


def _traces_payload(traces) -> list[dict]:
    return [
        {"outcomes": [int(o) for o in t.outcomes], "weight": t.weight, "values": list(t.values), "steps": t.steps}
        for t in traces
    ]


def cmd_simulate(args) -> int:
    text = _read(args.file)
    fuel = args.fuel if args.fuel is not None else default_fuel()
    if args.file.endswith(".qtgt"):
        g, _ = _graph(args)
        traces = run_target(parse_target(text, allow_h=args.allow_h), g, fuel)
    else:
        prog = parse_source(text, allow_h=args.allow_h)
        wires = args.wires
        if wires is None:
            g, _ = _graph(args, required=False)
            wires = len(g.nodes) if g else check_program_src(prog).budget
        traces = run_source(prog, wires, fuel)
    lines = [
        f"branch {''.join(str(int(o)) for o in t.outcomes) or '-'}: weight {t.weight:.6g}, "
        f"returns ({', '.join(t.values)}) after {t.steps} step(s)"
        for t in traces
    ]
    _emit(args, {"branches": _traces_payload(traces)}, "\n".join(lines))
    return 0


def cmd_verify(args) -> int:
    if args.graph_pos and not args.graph:
        args.graph = args.graph_pos
    prog = parse_source(_read(args.file), allow_h=args.allow_h)
    g, _ = _graph(args)
    res = qubit_alloc(check_program_src(prog), g)
    rep = check_program_tgt(res.program, g)
    for d in rep.diagnostics:
        print(d.render(args.file), file=sys.stderr)
    payload: dict = {"typechecks": rep.ok, "swaps": res.swaps}
    lines = [f"allocated with {res.swaps} swap(s); target program {'type-checks' if rep.ok else 'is ill-typed'}"]
    ok = rep.ok
    if ok and len(g.nodes) <= MAX_WIRES and not args.no_simulate:
        try:
            pres = check_semantic_preservation(prog, res.program, g, args.fuel)
            payload["branches"] = pres.pairs
            lines.append(f"semantics preserved on {pres.pairs} branch(es)")
        except FuelExhausted:
            payload["fuel_exhausted"] = True
            lines.append("simulation ran out of fuel; semantics not compared")
    payload["ok"] = ok
    _emit(args, payload, "\n".join(lines))
    return 0 if ok else 1


def cmd_fuzz(args) -> int:
    rep = run_fuzz(
        args.seed,
        args.count,
        simulate=args.simulate,
        fuel=args.fuel,
        max_qubits=args.max_qubits,
        max_depth=args.max_depth,
        max_funcs=args.max_funcs,
        min_nodes=args.min_nodes,
        max_nodes=args.max_nodes,
        with_h=args.allow_h,
        recursion=args.recursion,
    )
    text = f"{rep.passed}/{rep.count} case(s) passed, {rep.swaps} swap(s) inserted"
    if args.simulate:
        text += f", {rep.simulated} simulated, {rep.fuel_exhausted} out of fuel"
    for f in rep.failures:
        print(f"case {f['seed']}: {f['error']}", file=sys.stderr)
    _emit(args, rep.to_json(), text)
    return 0 if not rep.failures else 1


def cmd_graph(args) -> int:
    g = parse_graph(_read(args.file))
    chain = construct_subgraphs(g)
    shown = chain.get(args.chain) if args.chain else g
    if args.emit_dot:
        print(to_dot(shown), end="")
        return 0
    payload = {
        "nodes": list(shown.nodes),
        "edges": [list(e) for e in sorted(shown.edges)],
        "articulation_points": sorted(articulation_points(g)),
        "removal_order": list(chain.removal_order),
    }
    text = print_graph(shown) + f"articulation points: {' '.join(payload['articulation_points']) or '-'}\n"
    text += f"removal order: {' '.join(chain.removal_order)}"
    _emit(args, payload, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qalloc", description="Type-directed qubit allocation.")
    p.add_argument("--version", action="version", version=f"qalloc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph: bool = True):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--allow-h", action="store_true", help="enable the single-qubit H gate")
        if graph:
            sp.add_argument("--graph", help="coupling graph file")

    sp = sub.add_parser("check-src", help="type-check a source program")
    sp.add_argument("file")
    sp.add_argument("--budget", type=int, help="qubits available to main (default: minimal)")
    sp.add_argument("--explain", action="store_true", help="print the derivation")
    common(sp)
    sp.set_defaults(func=cmd_check_src)

    sp = sub.add_parser("check-tgt", help="type-check a target program against a device")
    sp.add_argument("file")
    sp.add_argument("--explain", action="store_true", help="print the derivations")
    common(sp)
    sp.set_defaults(func=cmd_check_tgt)

    sp = sub.add_parser("alloc", help="allocate a source program onto a device")
    sp.add_argument("file")
    sp.add_argument("-o", "--output", help="write the target program here")
    sp.add_argument("--emit-trace", help="write allocation events as JSON")
    common(sp)
    sp.set_defaults(func=cmd_alloc)

    sp = sub.add_parser("simulate", help="run a .qsrc or .qtgt program on the density simulator")
    sp.add_argument("file")
    sp.add_argument("--fuel", type=int, help="step limit (default $QALLOC_FUEL or 10000)")
    sp.add_argument("--wires", type=int, help="free qubits for a source program")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="allocate, re-check and compare semantics")
    sp.add_argument("file")
    sp.add_argument("graph_pos", nargs="?", metavar="graph")
    sp.add_argument("--fuel", type=int)
    sp.add_argument("--no-simulate", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("fuzz", help="run the pipeline on generated programs")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--max-qubits", type=int, default=5)
    sp.add_argument("--max-depth", type=int, default=8)
    sp.add_argument("--max-funcs", type=int, default=3)
    sp.add_argument("--min-nodes", type=int, default=5)
    sp.add_argument("--max-nodes", type=int, default=8)
    sp.add_argument("--simulate", action="store_true", help="also compare source and target semantics")
    sp.add_argument("--recursion", action="store_true", help="allow self-recursive functions")
    sp.add_argument("--fuel", type=int)
    common(sp, graph=False)
    sp.set_defaults(func=cmd_fuzz)

    sp = sub.add_parser("graph", help="inspect a coupling graph and its subgraph chain")
    sp.add_argument("file")
    sp.add_argument("--chain", type=int, help="show the chain element with this many nodes")
    sp.add_argument("--emit-dot", action="store_true", help="print Graphviz DOT")
    common(sp, graph=False)
    sp.set_defaults(func=cmd_graph)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Usage as exc:
        print(f"qalloc: {exc}", file=sys.stderr)
        return 2
    except QallocError as exc:
        print(exc.render(getattr(args, "file", "<input>")), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
