"""Backtracking subgraph matcher for parsed patterns."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Mapping

from ..model import Company, EdgeKind, GraphStore
from .dsl import EdgeClause, PatternAST

DEFAULT_MAX_PATH_LEN = 10

FIELD_ATTRS = {
    "hq": "hq_country",
    "legal": "legal_country",
    "form": "legal_form_code",
    "region": "legal_region",
}


@dataclass(frozen=True)
class Binding:
    """One match: variable -> LEI plus a witness path per edge clause.

    ``witnesses[i]`` is the company sequence realising ``ast.edges[i]``,
    starting at the clause's source and ending at its target.
    """

    assignment: tuple[tuple[str, str], ...]
    witnesses: tuple[tuple[str, ...], ...]

    def __getitem__(self, var: str) -> str:
        for name, lei in self.assignment:
            if name == var:
                return lei
        raise KeyError(var)

    def as_dict(self) -> dict[str, str]:
        return dict(self.assignment)

    @property
    def key(self) -> tuple[str, ...]:
        return tuple(lei for _, lei in self.assignment)


def satisfies(company: Company, constraints: Mapping[str, str]) -> bool:
    return all(getattr(company, FIELD_ATTRS[f]) == v for f, v in constraints.items())


class _Reach:
    """Cached bounded reachability along one edge kind and direction."""

    def __init__(self, nbrs: Mapping[str, tuple[str, ...]], transitive: bool, limit: int):
        self.nbrs = nbrs
        self.transitive = transitive
        self.limit = limit
        self.cache: dict[str, frozenset[str]] = {}

    def __call__(self, start: str) -> frozenset[str]:
        hit = self.cache.get(start)
        if hit is not None:
            return hit
        if not self.transitive:
            out = frozenset(self.nbrs.get(start, ()))
        else:
            dist = {start: 0}
            queue = deque([start])
            back_to_start = False
            while queue:
                n = queue.popleft()
                d = dist[n]
                if d >= self.limit:
                    continue
                for m in self.nbrs.get(n, ()):
                    if m == start:
                        back_to_start = True
                    elif m not in dist:
                        dist[m] = d + 1
                        queue.append(m)
            del dist[start]
            out = frozenset(dist) | ({start} if back_to_start else frozenset())
        self.cache[start] = out
        return out


def shortest_path(
    nbrs: Mapping[str, tuple[str, ...]], source: str, target: str, limit: int,
) -> tuple[str, ...] | None:
    """Shortest path with at least one hop; a closed simple cycle when
    source == target.  Neighbours are explored in sorted order."""
    prev: dict[str, str] = {}
    seen = {source}
    queue = deque([(source, 0)])
    while queue:
        n, d = queue.popleft()
        if d >= limit:
            continue
        for m in nbrs.get(n, ()):
            if m == target:
                path = [m, n]
                while path[-1] != source:
                    path.append(prev[path[-1]])
                return tuple(reversed(path))
            if m not in seen:
                seen.add(m)
                prev[m] = n
                queue.append((m, d + 1))
    return None


def _plan(ast: PatternAST, sizes: Mapping[str, int]) -> list[str]:
    """Variable binding order: grow connected regions, cheapest seeds first."""
    adjacent: dict[str, set[str]] = {v: set() for v in ast.variables}
    for e in ast.edges:
        adjacent[e.source].add(e.target)
        adjacent[e.target].add(e.source)
    order: list[str] = []
    placed: set[str] = set()
    while len(order) < len(ast.variables):
        frontier = sorted(
            {n for v in placed for n in adjacent[v]} - placed,
            key=lambda v: (sizes.get(v, float("inf")), v),
        )
        if frontier:
            nxt = frontier[0]
        else:
            rest = [v for v in ast.variables if v not in placed]
            nxt = min(rest, key=lambda v: (sizes.get(v, float("inf")), v))
        order.append(nxt)
        placed.add(nxt)
    return order


def match_pattern(
    store: GraphStore,
    ast: PatternAST,
    max_path_len: int = DEFAULT_MAX_PATH_LEN,
    max_results: int | None = None,
) -> list[Binding]:
    """All bindings of *ast* in *store*, sorted by the bound LEI tuple.

    Transitive clauses are satisfied by a simple path of 1..max_path_len
    edges.  Distinct variables may bind the same company.
    """
    if max_path_len < 1:
        raise ValueError("max_path_len must be >= 1")
    if max_results is not None and max_results < 0:
        raise ValueError("max_results must be >= 0")

    constraints = {v: ast.constraints_for(v) for v in ast.variables}
    pools: dict[str, list[str]] = {}
    for v, cons in constraints.items():
        if cons:
            pools[v] = [lei for lei, c in store.companies.items() if satisfies(c, cons)]
    order = _plan(ast, {v: len(p) for v, p in pools.items()})

    forward: dict[tuple[EdgeKind, bool], _Reach] = {}
    backward: dict[tuple[EdgeKind, bool], _Reach] = {}
    for e in ast.edges:
        key = (e.kind, e.transitive)
        if key not in forward:
            forward[key] = _Reach(store.parent_map(e.kind), e.transitive, max_path_len)
            backward[key] = _Reach(store.child_map(e.kind), e.transitive, max_path_len)

    # clauses to check when binding each variable, against earlier ones
    position = {v: i for i, v in enumerate(order)}
    checks: dict[str, list[EdgeClause]] = {v: [] for v in order}
    for e in ast.edges:
        later = max(e.source, e.target, key=position.__getitem__)
        checks[later].append(e)

    def seed_pool(var: str) -> list[str]:
        if var in pools:
            return pools[var]
        # unconstrained seed: any company with an edge in the needed direction
        found: set[str] = set()
        for e in ast.edges:
            if e.source == var:
                found.update(store.parent_map(e.kind))
            if e.target == var:
                found.update(store.child_map(e.kind))
        return sorted(found)

    assignment: dict[str, str] = {}
    results: list[dict[str, str]] = []

    def candidates(var: str) -> list[str]:
        sets = []
        for e in checks[var]:
            key = (e.kind, e.transitive)
            if e.source == var:
                sets.append(backward[key](assignment[e.target]))
            else:
                sets.append(forward[key](assignment[e.source]))
        if not sets:
            return seed_pool(var)
        sets.sort(key=len)
        found = set(sets[0]).intersection(*sets[1:])
        cons = constraints[var]
        if cons:
            found = {lei for lei in found if satisfies(store.companies[lei], cons)}
        return sorted(found)

    def extend(i: int) -> None:
        if i == len(order):
            results.append(dict(assignment))
            return
        var = order[i]
        for lei in candidates(var):
            assignment[var] = lei
            extend(i + 1)
        assignment.pop(var, None)

    extend(0)

    keyed = sorted(tuple(r[v] for v in ast.variables) for r in results)
    if max_results is not None:
        keyed = keyed[:max_results]

    out = []
    for leis in keyed:
        bound = dict(zip(ast.variables, leis))
        witnesses = []
        for e in ast.edges:
            nbrs = store.parent_map(e.kind)
            limit = max_path_len if e.transitive else 1
            path = shortest_path(nbrs, bound[e.source], bound[e.target], limit)
            assert path is not None, "matched clause without a witness"
            witnesses.append(path)
        out.append(Binding(tuple(zip(ast.variables, leis)), tuple(witnesses)))
    return out
