"""Reachability and chain analytics over consolidation edges.

Edges point from child to parent.  "down" walks towards subsidiaries,
"up" towards consolidating parents.  Dirty registry data may contain
cycles; nothing here aborts on them.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Literal, Mapping

from .model import EdgeKind, GraphStore

DEFAULT_MAX_DEPTH = 10

Direction = Literal["down", "up"]


def _neighbours(store: GraphStore, kind: EdgeKind, direction: Direction):
    if direction == "down":
        return store.child_map(kind)
    if direction == "up":
        return store.parent_map(kind)
    raise ValueError(f"direction must be 'down' or 'up', not {direction!r}")


def direct_children(store: GraphStore, lei: str) -> frozenset[str]:
    store.require(lei)
    return frozenset(store.children(lei, EdgeKind.DIRECT))


@dataclass(frozen=True)
class ClosureResult:
    root: str
    members: frozenset[str]
    truncated: bool
    cyclic: bool


def _has_cycle(nodes: set[str], nbrs: Mapping[str, tuple[str, ...]]) -> bool:
    """Kahn's algorithm on the subgraph induced by *nodes*."""
    indeg = dict.fromkeys(nodes, 0)
    for n in nodes:
        for m in nbrs.get(n, ()):
            if m in indeg:
                indeg[m] += 1
    ready = [n for n, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for m in nbrs.get(n, ()):
            if m in indeg:
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
    return seen != len(nodes)


def closure(
    store: GraphStore,
    lei: str,
    kind: EdgeKind = EdgeKind.DIRECT,
    max_depth: int | None = DEFAULT_MAX_DEPTH,
    direction: Direction = "down",
) -> ClosureResult:
    """Breadth-first closure of *lei* along *kind* edges.

    ``max_depth=None`` removes the hop limit.  The root appears among the
    members only when a cycle leads back to it.  ``truncated`` means at least
    one further company would have been reached past the hop limit.
    """
    store.require(lei)
    if max_depth is not None and max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    nbrs = _neighbours(store, kind, direction)

    visited = {lei}
    members: set[str] = set()
    frontier = [lei]
    depth = 0
    while frontier and (max_depth is None or depth < max_depth):
        nxt = []
        for n in frontier:
            for m in nbrs.get(n, ()):
                if m == lei:
                    members.add(m)
                if m not in visited:
                    visited.add(m)
                    members.add(m)
                    nxt.append(m)
        frontier = nxt
        depth += 1

    truncated = any(m not in visited for n in frontier for m in nbrs.get(n, ()))
    return ClosureResult(lei, frozenset(members), truncated, _has_cycle(visited, nbrs))


@dataclass(frozen=True)
class ChildStats:
    avg_direct: float | None
    avg_ultimate: float | None
    avg_ultimate_closure: float | None
    histogram_direct: dict[int, int] = field(default_factory=dict)
    histogram_ultimate: dict[int, int] = field(default_factory=dict)


def _histogram(store: GraphStore, child_map: Mapping[str, tuple[str, ...]]) -> dict[int, int]:
    counts = Counter(len(kids) for kids in child_map.values())
    zero = len(store) - len(child_map)
    if zero:
        counts[0] += zero
    return dict(sorted(counts.items()))


def child_stats(store: GraphStore) -> ChildStats:
    """Average children per company that has any, plus count histograms.

    ``avg_ultimate`` counts recorded ultimate edges.  The alternative reading,
    the size of each parent's unbounded direct-edge descendant set, is
    reported as ``avg_ultimate_closure``.
    """
    direct = store.child_map(EdgeKind.DIRECT)
    ultimate = store.child_map(EdgeKind.ULTIMATE)
    sizes_direct = [len(v) for v in direct.values()]
    sizes_ultimate = [len(v) for v in ultimate.values()]
    sizes_closure = [
        len(closure(store, lei, EdgeKind.DIRECT, None).members - {lei})
        for lei in direct
    ]
    return ChildStats(
        avg_direct=fmean(sizes_direct) if sizes_direct else None,
        avg_ultimate=fmean(sizes_ultimate) if sizes_ultimate else None,
        avg_ultimate_closure=fmean(sizes_closure) if sizes_closure else None,
        histogram_direct=_histogram(store, direct),
        histogram_ultimate=_histogram(store, ultimate),
    )


def _cyclic_nodes(nodes: Iterable[str], succ: Mapping[str, tuple[str, ...]]) -> set[str]:
    """Nodes on some directed cycle (members of SCCs larger than one).

    Iterative Tarjan; the graph has no self-loops.
    """
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: set[str] = set()
    counter = 0
    for start in nodes:
        if start in index:
            continue
        work = [(start, iter(succ.get(start, ())))]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(succ.get(nxt, ()))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                component = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    component.append(w)
                    if w == node:
                        break
                if len(component) > 1:
                    out.update(component)
    return out


def _edge_nodes(succ: Mapping[str, tuple[str, ...]]) -> list[str]:
    nodes = set(succ)
    for targets in succ.values():
        nodes.update(targets)
    return sorted(nodes)


def _reverse_reach(seeds: set[str], pred: Mapping[str, tuple[str, ...]]) -> set[str]:
    seen = set(seeds)
    queue = deque(seeds)
    while queue:
        n = queue.popleft()
        for p in pred.get(n, ()):
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return seen


def _better(a: tuple[str, ...], b: tuple[str, ...] | None) -> bool:
    if b is None:
        return True
    return len(a) > len(b) or (len(a) == len(b) and a < b)


def longest_chain(store: GraphStore, kind: EdgeKind = EdgeKind.DIRECT) -> list[str]:
    """A longest simple path following *kind* edges from child to parent.

    Ties go to the lexicographically smallest LEI sequence.  The acyclic part
    of the graph is solved by dynamic programming; only nodes that can reach
    a cycle fall back to exhaustive search.
    """
    succ = store.parent_map(kind)
    pred = store.child_map(kind)
    nodes = _edge_nodes(succ)
    if not nodes:
        return []

    unsafe = _reverse_reach(_cyclic_nodes(nodes, succ), pred)

    # paths from safe nodes never re-enter an earlier node, so they compose
    best: dict[str, tuple[str, ...]] = {}
    pending = {n: len(succ.get(n, ())) for n in nodes if n not in unsafe}
    ready = [n for n, d in pending.items() if d == 0]
    while ready:
        n = ready.pop()
        tail = None
        for s in succ.get(n, ()):
            if _better(best[s], tail):
                tail = best[s]
        best[n] = (n,) + (tail or ())
        for p in pred.get(n, ()):
            if p in pending:
                pending[p] -= 1
                if pending[p] == 0:
                    ready.append(p)

    winner: tuple[str, ...] | None = None
    for path in best.values():
        if _better(path, winner):
            winner = path

    for start in sorted(unsafe):
        path = [start]
        on_path = {start}
        iters = [iter(succ.get(start, ()))]
        while iters:
            candidate = tuple(path)
            if _better(candidate, winner):
                winner = candidate
            for nxt in iters[-1]:
                if nxt in on_path:
                    continue
                if nxt in best:
                    candidate = tuple(path) + best[nxt]
                    if _better(candidate, winner):
                        winner = candidate
                    continue
                path.append(nxt)
                on_path.add(nxt)
                iters.append(iter(succ.get(nxt, ())))
                break
            else:
                iters.pop()
                on_path.discard(path.pop())
    return list(winner or ())


@dataclass(frozen=True, order=True)
class UltimateCheck:
    child: str
    ultimate_parent: str
    reachable_via_direct: bool


def ultimate_discrepancies(store: GraphStore) -> list[UltimateCheck]:
    """For each recorded ultimate edge, whether direct edges also lead there."""
    out = []
    for child, parents in store.parent_map(EdgeKind.ULTIMATE).items():
        ancestors = closure(store, child, EdgeKind.DIRECT, None, "up").members
        for parent in parents:
            out.append(UltimateCheck(child, parent, parent in ancestors))
    return out


def chain_histogram(store: GraphStore, kind: EdgeKind = EdgeKind.DIRECT) -> dict[int, int]:
    """Number of maximal simple paths, keyed by hop count.

    A path is maximal when it can be extended at neither end without
    repeating a company.
    """
    succ = store.parent_map(kind)
    pred = store.child_map(kind)
    nodes = _edge_nodes(succ)
    if _cyclic_nodes(nodes, succ):
        return _chain_histogram_enumerate(nodes, succ, pred)

    # in a DAG every source-to-sink path is maximal and vice versa
    counts: dict[str, Counter] = {}
    pending = {n: len(succ.get(n, ())) for n in nodes}
    ready = [n for n, d in pending.items() if d == 0]
    while ready:
        n = ready.pop()
        c: Counter = Counter()
        targets = succ.get(n, ())
        if not targets:
            c[0] = 1
        for s in targets:
            for hops, k in counts[s].items():
                c[hops + 1] += k
        counts[n] = c
        for p in pred.get(n, ()):
            pending[p] -= 1
            if pending[p] == 0:
                ready.append(p)
    total: Counter = Counter()
    for n in nodes:
        if n not in pred:
            total.update(counts[n])
    return dict(sorted(total.items()))


def _chain_histogram_enumerate(nodes, succ, pred) -> dict[int, int]:
    total: Counter = Counter()
    for start in nodes:
        path = [start]
        on_path = {start}
        iters = [iter(succ.get(start, ()))]
        while iters:
            for nxt in iters[-1]:
                if nxt not in on_path:
                    path.append(nxt)
                    on_path.add(nxt)
                    iters.append(iter(succ.get(nxt, ())))
                    break
            else:
                if len(path) > 1 and _is_maximal(path, on_path, succ, pred):
                    total[len(path) - 1] += 1
                iters.pop()
                on_path.discard(path.pop())
    return dict(sorted(total.items()))


def _is_maximal(path, on_path, succ, pred) -> bool:
    if any(s not in on_path for s in succ.get(path[-1], ())):
        return False
    return all(p in on_path for p in pred.get(path[0], ()))

