"""Graph algorithms over coupling graphs.

Ties are always broken by lexicographic node name so every result is
deterministic.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Mapping

from .errors import DeviceTooSmall, DisconnectedInput, InvalidMap, NoEmbedding, TooLarge
from .syntax import CouplingGraph, constraint

EXACT_TOKEN_SWAP_LIMIT = 8


def is_connected(g: CouplingGraph) -> bool:
    if not g.nodes:
        return True
    adj = g.adjacency()
    seen = {g.nodes[0]}
    todo = [g.nodes[0]]
    while todo:
        v = todo.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(g.nodes)


def articulation_points(g: CouplingGraph) -> frozenset[str]:
    """Cut vertices via iterative low-link DFS."""
    if not is_connected(g):
        raise DisconnectedInput("articulation points need a connected graph")
    adj = g.adjacency()
    disc: dict[str, int] = {}
    low: dict[str, int] = {}
    cut: set[str] = set()
    clock = itertools.count()
    for root in sorted(g.nodes):
        if root in disc:
            continue
        disc[root] = low[root] = next(clock)
        children = 0
        stack = [(root, None, iter(adj[root]))]
        while stack:
            v, parent, it = stack[-1]
            w = next(it, None)
            if w is None:
                stack.pop()
                if parent is not None:
                    low[parent] = min(low[parent], low[v])
                    if parent != root and low[v] >= disc[parent]:
                        cut.add(parent)
                continue
            if w == parent:
                continue
            if w in disc:
                low[v] = min(low[v], disc[w])
            else:
                disc[w] = low[w] = next(clock)
                if v == root:
                    children += 1
                stack.append((w, v, iter(adj[w])))
        if children > 1:
            cut.add(root)
    return frozenset(cut)


def articulation_points_naive(g: CouplingGraph) -> frozenset[str]:
    """Oracle: a vertex is a cut vertex iff deleting it disconnects the graph."""
    base = _components(g)
    out = set()
    for v in g.nodes:
        h = g.induced(u for u in g.nodes if u != v)
        if _components(h) > base:
            out.add(v)
    return frozenset(out)


def _components(g: CouplingGraph) -> int:
    adj = g.adjacency()
    seen: set[str] = set()
    n = 0
    for s in g.nodes:
        if s in seen:
            continue
        n += 1
        seen.add(s)
        todo = [s]
        while todo:
            v = todo.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
    return n


@dataclass(frozen=True)
class SubgraphChain:
    """Nested connected subgraphs; ``graphs[i - 1]`` has exactly ``i`` nodes."""

    graphs: tuple[CouplingGraph, ...]
    removal_order: tuple[str, ...]

    def get(self, k: int) -> CouplingGraph:
        if k < 1 or k > len(self.graphs):
            raise DeviceTooSmall(f"no chain element of size {k} (device has {len(self.graphs)} qubits)")
        return self.graphs[k - 1]

    def __len__(self) -> int:
        return len(self.graphs)


def construct_subgraphs(g: CouplingGraph) -> SubgraphChain:
    """Peel off a minimum-degree non-cut vertex until one node is left."""
    if not g.nodes:
        raise DisconnectedInput("empty graph")
    if not is_connected(g):
        raise DisconnectedInput("coupling graph is not connected")
    cur = g
    chain = [g]
    removed = []
    while len(cur.nodes) > 1:
        cut = articulation_points(cur)
        adj = cur.adjacency()
        cands = [v for v in cur.nodes if v not in cut]
        v = min(cands, key=lambda u: (len(adj[u]), u))
        removed.append(v)
        cur = cur.induced(u for u in cur.nodes if u != v)
        chain.append(cur)
    return SubgraphChain(tuple(reversed(chain)), tuple(removed))


def assign_subgraphs(
    signatures: Mapping[str, tuple[int, int]], chain: SubgraphChain
) -> dict[str, CouplingGraph]:
    """Map each function to the chain element sized budget plus parameter count.

    ``signatures`` maps a function name to ``(n_params, budget)``. A function that
    needs zero qubits is clamped to the one-node element.
    """
    out = {}
    for f, (n_params, budget) in signatures.items():
        k = max(1, n_params + budget)
        out[f] = chain.get(k)
    return out


def shortest_path(g: CouplingGraph, a: str, b: str) -> list[str]:
    adj = g.adjacency()
    if a not in adj or b not in adj:
        raise InvalidMap(f"path endpoints {a}, {b} not in graph")
    parent: dict[str, str | None] = {a: None}
    todo = deque([a])
    while todo:
        v = todo.popleft()
        if v == b:
            break
        for w in adj[v]:
            if w not in parent:
                parent[w] = v
                todo.append(w)
    if b not in parent:
        raise DisconnectedInput(f"no path from {a} to {b}")
    path = [b]
    while path[-1] != a:
        path.append(parent[path[-1]])  # type: ignore[arg-type]
    return path[::-1]


def distances(g: CouplingGraph) -> dict[str, dict[str, int]]:
    adj = g.adjacency()
    out = {}
    for s in g.nodes:
        d = {s: 0}
        todo = deque([s])
        while todo:
            v = todo.popleft()
            for w in adj[v]:
                if w not in d:
                    d[w] = d[v] + 1
                    todo.append(w)
        out[s] = d
    return out


def subgraph_isomorphism(host: CouplingGraph, pattern: CouplingGraph) -> dict[str, str]:
    """Injective map of pattern nodes into host nodes preserving every pattern edge."""
    hn = set(host.nodes)
    if set(pattern.nodes) <= hn and all(host.has_edge(a, b) for a, b in pattern.edges):
        return {v: v for v in pattern.nodes}
    if len(pattern.nodes) > len(host.nodes):
        raise NoEmbedding("pattern larger than host")
    padj = pattern.adjacency()
    hadj = {v: set(ns) for v, ns in host.adjacency().items()}
    order: list[str] = []
    for s in sorted(pattern.nodes, key=lambda v: (-len(padj[v]), v)):
        if s in order:
            continue
        todo = deque([s])
        order.append(s)
        while todo:
            v = todo.popleft()
            for w in padj[v]:
                if w not in order:
                    order.append(w)
                    todo.append(w)
    hosts = sorted(host.nodes)
    m: dict[str, str] = {}
    used: set[str] = set()

    def go(i: int) -> bool:
        if i == len(order):
            return True
        v = order[i]
        for h in hosts:
            if h in used or len(hadj[h]) < len(padj[v]):
                continue
            if all(m[w] in hadj[h] for w in padj[v] if w in m):
                m[v] = h
                used.add(h)
                if go(i + 1):
                    return True
                del m[v]
                used.discard(h)
        return False

    if not go(0):
        raise NoEmbedding("no edge-preserving embedding exists")
    return dict(m)


# ---------------------------------------------------------------------------
# Token swapping
#
# A token map ``p`` sends a vertex to the destination of the token currently
# sitting on it. Tokens on vertices outside ``dom(p)`` may end anywhere.


def _check_map(g: CouplingGraph, p: Mapping[str, str]) -> None:
    ns = set(g.nodes)
    for a, b in p.items():
        if a not in ns or b not in ns:
            raise InvalidMap(f"token map entry {a} -> {b} leaves the graph")
    if len(set(p.values())) != len(p):
        raise InvalidMap("token map is not injective")
    if not is_connected(g):
        raise DisconnectedInput("token swapping needs a connected graph")


def replay_swaps(swaps: list[tuple[str, str]], nodes) -> dict[str, str]:
    """Final position of the token that started on each vertex."""
    at = {v: v for v in nodes}
    for a, b in swaps:
        at[a], at[b] = at[b], at[a]
    return {tok: v for v, tok in at.items()}


def token_swapping(g: CouplingGraph, p: Mapping[str, str]) -> list[tuple[str, str]]:
    """Approximate shortest swap sequence realising the partial injection ``p``.

    Greedy rotation along cycles or dead-end paths of the desire graph, with
    single unhappy swaps when no rotation exists. Falls back to spanning-tree
    routing if the greedy phase overruns its step bound.
    """
    _check_map(g, p)
    p = {a: b for a, b in p.items()}
    dist = distances(g)
    adj = g.adjacency()
    tok = {v: v for v in g.nodes}
    swaps: list[tuple[str, str]] = []

    def dest(v: str) -> str | None:
        return p.get(tok[v])

    def desire(v: str) -> list[str]:
        t = dest(v)
        if t is None or t == v:
            return []
        return [w for w in adj[v] if dist[w][t] == dist[v][t] - 1]

    def do(a: str, b: str) -> None:
        tok[a], tok[b] = tok[b], tok[a]
        swaps.append(constraint(a, b))

    total = sum(dist[a][b] for a, b in p.items())
    bound = 4 * total + len(g.nodes) ** 2 + 8
    while True:
        unsat = [v for v in g.nodes if dest(v) not in (None, v)]
        if not unsat:
            return swaps
        if len(swaps) > bound:
            break
        des = {v: desire(v) for v in sorted(unsat)}
        cyc = _find_cycle(des)
        if cyc is not None:
            cyc = cyc[:-1]
            for i in range(len(cyc) - 2, -1, -1):
                do(cyc[i], cyc[i + 1])
            continue
        path = _path_to_free(des, lambda v: dest(v) is None)
        if path is not None:
            for i in range(len(path) - 2, -1, -1):
                do(path[i], path[i + 1])
            continue
        # every desire path ends on a token that is already home
        v = unsat[0]
        while des.get(v):
            nxt = des[v][0]
            if nxt not in des:
                do(v, nxt)
                break
            v = nxt
    return _tree_route(g, p)


def _find_cycle(des: dict[str, list[str]]) -> list[str] | None:
    """A directed cycle ``c0 -> ... -> ck = c0`` returned as ``[c0..ck-1, c0]``."""
    color: dict[str, int] = {}
    for s in des:
        if s in color:
            continue
        stack = [(s, iter(des[s]))]
        path = [s]
        color[s] = 1
        while stack:
            v, it = stack[-1]
            w = next(it, None)
            if w is None:
                color[v] = 2
                stack.pop()
                path.pop()
                continue
            if w not in des:
                continue
            c = color.get(w, 0)
            if c == 1:
                return path[path.index(w):] + [w]
            if c == 0:
                color[w] = 1
                path.append(w)
                stack.append((w, iter(des[w])))
    return None


def _path_to_free(des: dict[str, list[str]], free) -> list[str] | None:
    """Shortest desire path from an unsatisfied vertex to a don't-care token."""
    parent: dict[str, str | None] = {v: None for v in des}
    todo = deque(des)
    while todo:
        v = todo.popleft()
        for w in des.get(v, ()):
            if w in parent:
                continue
            parent[w] = v
            if free(w):
                path = [w]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])  # type: ignore[arg-type]
                return path[::-1]
            if w in des:
                todo.append(w)
    return None


def _tree_route(g: CouplingGraph, p: Mapping[str, str]) -> list[tuple[str, str]]:
    """Always-correct fallback: fill spanning-tree leaves one at a time."""
    tok = {v: v for v in g.nodes}
    where = {v: v for v in g.nodes}
    swaps: list[tuple[str, str]] = []
    want = {b: a for a, b in p.items()}
    remaining = set(g.nodes)
    while remaining:
        sub = g.induced(remaining)
        root = min(remaining)
        par = _bfs_parents(sub, root)
        children = {v: 0 for v in remaining}
        for v, u in par.items():
            if u is not None:
                children[u] += 1
        leaf = min((v for v in remaining if children[v] == 0 and v != root), default=root)
        if leaf in want:
            src = where[want[leaf]]
        else:
            frees = [v for v in remaining if tok[v] not in p]
            if tok[leaf] not in p or not frees:
                remaining.discard(leaf)
                continue
            d = distances(sub)[leaf]
            src = min(frees, key=lambda v: (d[v], v))
        path = shortest_path(sub, src, leaf)
        for a, b in zip(path, path[1:]):
            ta, tb = tok[a], tok[b]
            tok[a], tok[b] = tb, ta
            where[ta], where[tb] = b, a
            swaps.append(constraint(a, b))
        remaining.discard(leaf)
    return swaps


def _bfs_parents(g: CouplingGraph, root: str) -> dict[str, str | None]:
    adj = g.adjacency()
    par: dict[str, str | None] = {root: None}
    todo = deque([root])
    while todo:
        v = todo.popleft()
        for w in adj[v]:
            if w not in par:
                par[w] = v
                todo.append(w)
    return par


def token_swapping_exact(g: CouplingGraph, p: Mapping[str, str]) -> list[tuple[str, str]]:
    """Optimal swap sequence by breadth-first search over token configurations."""
    _check_map(g, p)
    n = len(g.nodes)
    if n > EXACT_TOKEN_SWAP_LIMIT:
        raise TooLarge(f"exact token swapping limited to {EXACT_TOKEN_SWAP_LIMIT} nodes")
    idx = {v: i for i, v in enumerate(g.nodes)}
    ids = {a: k for k, a in enumerate(sorted(p))}
    start = tuple(ids.get(v, -1) for v in g.nodes)
    goal = [(idx[b], ids[a]) for a, b in p.items()]
    edges = [(idx[a], idx[b]) for a, b in sorted(g.edges)]

    def done(s: tuple[int, ...]) -> bool:
        return all(s[i] == k for i, k in goal)

    parent: dict[tuple[int, ...], tuple[tuple[int, ...], tuple[int, int]] | None] = {start: None}
    todo = deque([start])
    end = start if done(start) else None
    while todo and end is None:
        s = todo.popleft()
        for i, j in edges:
            if s[i] == s[j]:
                continue
            t = list(s)
            t[i], t[j] = t[j], t[i]
            tt = tuple(t)
            if tt in parent:
                continue
            parent[tt] = (s, (i, j))
            if done(tt):
                end = tt
                break
            todo.append(tt)
    assert end is not None
    out = []
    cur = end
    while parent[cur] is not None:
        prev, (i, j) = parent[cur]  # type: ignore[misc]
        out.append(constraint(g.nodes[i], g.nodes[j]))
        cur = prev
    return out[::-1]


def to_dot(g: CouplingGraph, name: str = "coupling") -> str:
    lines = [f"graph {name} {{"]
    lines += [f'  "{v}";' for v in g.nodes]
    lines += [f'  "{a}" -- "{b}";' for a, b in sorted(g.edges)]
    lines.append("}")
    return "\n".join(lines) + "\n"
