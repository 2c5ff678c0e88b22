import random

import pytest
from conftest import D, U, company, lei, make_store, random_graph, store_from_triples
from oracles import (
    closure_oracle,
    fixed_point_closure,
    longest_chain_oracle,
    maximal_chain_histogram,
    successors,
)

from taxgraph.model import UnknownEntityError
from taxgraph.traversal import (
    chain_histogram,
    child_stats,
    closure,
    direct_children,
    longest_chain,
    ultimate_discrepancies,
)


def chain_store():
    # B, C, D are successive subsidiaries below A
    return make_store([company(t) for t in "ABCD"], [("B", "A", D), ("C", "B", D), ("D", "C", D)])


def test_direct_children():
    store = make_store(
        [company(t) for t in "PXYZL"], [("X", "P", D), ("Y", "P", D), ("Z", "P", D), ("L", "P", U)],
    )
    assert direct_children(store, lei("P")) == {lei("X"), lei("Y"), lei("Z")}
    assert direct_children(store, lei("X")) == frozenset()
    with pytest.raises(UnknownEntityError):
        direct_children(store, lei("Q"))


def test_direct_children_ignores_input_order():
    edges = [("X", "P", D), ("Y", "P", D), ("Z", "P", D)]
    a = make_store([company(t) for t in "PXYZ"], edges)
    b = make_store([company(t) for t in "ZYXP"], edges[::-1])
    assert direct_children(a, lei("P")) == direct_children(b, lei("P"))


def test_closure_on_chain():
    store = chain_store()
    down = closure(store, lei("A"))
    assert down.members == {lei("B"), lei("C"), lei("D")}
    assert not down.truncated and not down.cyclic
    up = closure(store, lei("D"), direction="up")
    assert up.members == {lei("A"), lei("B"), lei("C")}
    one = closure(store, lei("A"), max_depth=1)
    assert one.members == {lei("B")} and one.truncated
    assert not closure(store, lei("A"), max_depth=3).truncated


def test_closure_two_cycle_includes_root():
    store = make_store([company("A"), company("B")], [("B", "A", D), ("A", "B", D)])
    result = closure(store, lei("A"))
    assert result.cyclic
    # the cycle leads back to the root, so it is reported as a member
    assert result.members == {lei("A"), lei("B")}


def test_closure_rejects_bad_depth_and_unknown():
    store = chain_store()
    with pytest.raises(ValueError):
        closure(store, lei("A"), max_depth=0)
    with pytest.raises(UnknownEntityError):
        closure(store, lei("Q"))


def _check_closures(companies, triples):
    store = store_from_triples(companies, triples)
    for kind in (D, U):
        for direction in ("down", "up"):
            adj = successors(triples, kind, direction)
            for c in companies:
                for depth in (None, 1, 2, 5):
                    got = closure(store, c.lei, kind, depth, direction)
                    members, truncated, cyclic = closure_oracle(adj, c.lei, depth)
                    assert got.members == members
                    assert got.truncated == truncated
                    assert got.cyclic == cyclic


def test_closure_matches_fixed_point_on_random_dags():
    rng = random.Random(101)
    for _ in range(25):
        companies, triples = random_graph(rng, rng.randrange(2, 40), rng.randrange(1, 80), acyclic=True)
        _check_closures(companies, triples)


def test_closure_matches_fixed_point_on_cyclic_graphs():
    rng = random.Random(202)
    for _ in range(10):
        companies, triples = random_graph(rng, rng.randrange(2, 30), rng.randrange(5, 60))
        _check_closures(companies, triples)


def test_child_stats_average():
    store = make_store(
        [company(t) for t in "PQABCDE"],
        [("A", "P", D), ("B", "P", D), ("C", "Q", D), ("D", "Q", D), ("E", "Q", D)],
    )
    stats = child_stats(store)
    assert stats.avg_direct == 2.5
    assert stats.avg_ultimate is None
    assert stats.histogram_direct == {0: 5, 2: 1, 3: 1}
    assert stats.histogram_ultimate == {0: 7}


def test_child_stats_empty_store():
    stats = child_stats(make_store([]))
    assert stats.avg_direct is None and stats.avg_ultimate is None
    assert stats.avg_ultimate_closure is None


def test_child_stats_ultimate_counts_recorded_edges():
    store = make_store(
        [company(t) for t in "ABCD"],
        [("B", "A", D), ("C", "B", D), ("D", "C", D), ("D", "A", U)],
    )
    stats = child_stats(store)
    assert stats.avg_ultimate == 1.0
    # A reaches 3, B reaches 2, C reaches 1
    assert stats.avg_ultimate_closure == 2.0


def test_longest_chain_planted_six():
    names = ["S1", "S2", "S3", "S4", "S5", "S6"]
    edges = [(names[i], names[i + 1], D) for i in range(5)]
    edges += [("X1", "S3", D), ("X2", "X1", U)]
    store = make_store([company(t) for t in names + ["X1", "X2"]], edges)
    path = longest_chain(store)
    assert path == [lei(t) for t in names]


def test_longest_chain_star_is_lexicographic():
    store = make_store([company(t) for t in "PABCDE"], [(t, "P", D) for t in "EDCBA"])
    assert longest_chain(store) == [lei("A"), lei("P")]


def test_longest_chain_with_cycle_terminates():
    # 3-cycle X->Y->Z->X plus a 2-node tail T1->T2->X
    edges = [("X", "Y", D), ("Y", "Z", D), ("Z", "X", D), ("T1", "T2", D), ("T2", "X", D)]
    store = make_store([company(t) for t in ("X", "Y", "Z", "T1", "T2")], edges)
    assert longest_chain(store) == [lei(t) for t in ("T1", "T2", "X", "Y", "Z")]


def test_longest_chain_empty():
    assert longest_chain(make_store([company("A")])) == []


def test_longest_chain_matches_enumeration():
    rng = random.Random(303)
    for trial in range(60):
        companies, triples = random_graph(rng, rng.randrange(2, 14), rng.randrange(1, 22), acyclic=trial % 2 == 0)
        store = store_from_triples(companies, triples)
        for kind in (D, U):
            adj = successors(triples, kind)
            nodes = set(adj) | {t for v in adj.values() for t in v}
            got = longest_chain(store, kind)
            assert got == longest_chain_oracle(adj, nodes)
            for a, b in zip(got, got[1:]):
                assert store.has_edge(a, b, kind)


def test_ultimate_discrepancy_examples():
    store = make_store(
        [company(t) for t in "ABCXYZ"],
        [
            ("A", "B", D), ("A", "B", U),
            ("X", "Z", U),
            ("C", "Y", D), ("Y", "Z", D), ("C", "Z", U),
        ],
    )
    found = {(c.child, c.ultimate_parent): c.reachable_via_direct for c in ultimate_discrepancies(store)}
    assert found == {
        (lei("A"), lei("B")): True,
        (lei("X"), lei("Z")): False,
        (lei("C"), lei("Z")): True,
    }


def test_no_discrepancy_iff_ultimate_within_direct_closure():
    rng = random.Random(404)
    for _ in range(40):
        companies, triples = random_graph(rng, rng.randrange(2, 15), rng.randrange(1, 25))
        store = store_from_triples(companies, triples)
        up = successors(triples, D)
        contained = all(
            p in fixed_point_closure(up, c)
            for c, p, k in triples if k == U
        )
        flagged = [x for x in ultimate_discrepancies(store) if not x.reachable_via_direct]
        assert (not flagged) == contained


def test_chain_histogram_examples():
    single = make_store([company(t) for t in "ABC"], [("A", "B", D), ("B", "C", D)])
    assert chain_histogram(single) == {2: 1}
    disjoint = make_store([company(t) for t in "ABCD"], [("A", "B", D), ("C", "D", D)])
    assert chain_histogram(disjoint) == {1: 2}
    diamond = make_store(
        [company(t) for t in "ABCD"], [("A", "B", D), ("A", "C", D), ("B", "D", D), ("C", "D", D)],
    )
    assert chain_histogram(diamond) == {2: 2}


def test_chain_histogram_matches_enumeration():
    rng = random.Random(505)
    for trial in range(60):
        companies, triples = random_graph(rng, rng.randrange(2, 12), rng.randrange(1, 18), acyclic=trial % 2 == 0)
        store = store_from_triples(companies, triples)
        for kind in (D, U):
            adj = successors(triples, kind)
            nodes = set(adj) | {t for v in adj.values() for t in v}
            assert chain_histogram(store, kind) == maximal_chain_histogram(adj, nodes)


def test_results_ignore_row_order():
    rng = random.Random(606)
    companies, triples = random_graph(rng, 25, 50)
    a = store_from_triples(companies, triples)
    shuffled = triples[:]
    rng.shuffle(shuffled)
    b = store_from_triples(companies[::-1], shuffled)
    assert longest_chain(a) == longest_chain(b)
    assert chain_histogram(a) == chain_histogram(b)
    assert child_stats(a) == child_stats(b)
    assert ultimate_discrepancies(a) == ultimate_discrepancies(b)
