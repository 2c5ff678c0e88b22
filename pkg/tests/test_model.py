import pytest
from conftest import D, U, company, lei, make_store
from oracles import mod97

from taxgraph import get_company, validate_lei
from taxgraph.model import (
    Company,
    CountryIndicators,
    GraphStore,
    RelationshipEdge,
    UnknownEntityError,
    full_legal_address,
    lei_checksum,
    normalize_address,
)


def test_reference_lei_is_valid():
    # oracle computed independently before the implementation existed
    assert mod97("529900D6BF99LW9R2E68") == 1
    report = validate_lei("529900D6BF99LW9R2E68")
    assert report.well_formed and report.checksum_ok


@pytest.mark.parametrize("raw", ["ABC", "AAAAAAAAAAAAAAAAAAXX", "529900d6bf99lw9r2e68", "", "529900D6BF99LW9R2E6"])
def test_malformed_leis(raw):
    report = validate_lei(raw)
    assert report.well_formed is False
    assert report.checksum_ok is None


def test_bad_check_digits_are_reported_not_rejected():
    report = validate_lei("529900D6BF99LW9R2E69")
    assert report.well_formed and report.checksum_ok is False


def test_checksum_matches_oracle_on_many_strings():
    import random

    rng = random.Random(7)
    alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    for _ in range(500):
        body = "".join(rng.choice(alphabet) for _ in range(18)) + f"{rng.randrange(100):02d}"
        assert lei_checksum(body) == mod97(body)


def test_get_company_known_unknown_and_stub():
    store = make_store([company("A", "IE")], [("A", "GHOST", D)])
    assert get_company(store, lei("A")).legal_country == "IE"
    assert get_company(store, lei("NOPE")) is None
    ghost = get_company(store, lei("GHOST"))
    assert ghost.stub and ghost.legal_country == "" and ghost.legal_address_line == ""
    assert lei("NOPE") not in store


def test_require_raises_unknown_entity():
    store = make_store([company("A", "IE")])
    with pytest.raises(UnknownEntityError):
        store.require(lei("B"))


def test_adjacency_is_bidirectionally_consistent():
    edges = [("A", "B", D), ("C", "B", D), ("A", "C", U), ("B", "D", D)]
    store = make_store([company(t, "IE") for t in "ABCD"], edges)
    for kind in (D, U):
        for child, parents in store.parent_map(kind).items():
            for p in parents:
                assert child in store.children(p, kind)
        for parent, kids in store.child_map(kind).items():
            for k in kids:
                assert parent in store.parents(k, kind)
    assert store.edge_count(D) == 3 and store.edge_count(U) == 1
    assert store.has_edge(lei("A"), lei("C"), U)
    assert not store.has_edge(lei("A"), lei("C"), D)


def test_store_rejects_dangling_and_self_loop_edges():
    a = Company(lei("A"))
    with pytest.raises(ValueError):
        GraphStore({a.lei: a}, [RelationshipEdge(a.lei, lei("B"), D)])
    with pytest.raises(ValueError):
        GraphStore({a.lei: a}, [RelationshipEdge(a.lei, a.lei, D)])


def test_store_is_read_only():
    store = make_store([company("A", "IE"), company("B", "NL")], [("A", "B", D)])
    with pytest.raises(TypeError):
        store.companies[lei("C")] = Company(lei("C"))
    with pytest.raises(TypeError):
        store.parent_map(D)[lei("C")] = ()
    with pytest.raises(AttributeError):
        store.foo = 1
    with pytest.raises(AttributeError):
        store.companies[lei("A")].legal_country = "DE"


@pytest.mark.parametrize("kwargs", [
    {"population": -1}, {"gdp": -0.5}, {"corporate_tax_rate": 100.1}, {"corporate_tax_rate": -1},
])
def test_indicator_ranges(kwargs):
    with pytest.raises(ValueError):
        CountryIndicators("XX", **kwargs)


def test_address_normalisation_groups_variants():
    assert normalize_address("  2, Avenue J.F. Kennedy ") == "2 avenue jf kennedy"
    assert normalize_address("Rue «Royale»") == "rue royale"
    c = Company(lei("A"), legal_address_line="1209 Orange St.", legal_postal="19801",
                legal_city="Wilmington", legal_region="US-DE", legal_country="US")
    assert full_legal_address(c) == "1209 orange st 19801 wilmington usde us"


def test_address_index_skips_stubs_and_groups():
    a = company("A", "LU", legal_address_line="2 Avenue JF Kennedy", legal_city="Luxembourg")
    b = company("B", "LU", legal_address_line="2, avenue J.F. Kennedy", legal_city="LUXEMBOURG")
    store = make_store([a, b], [("A", "S", D)])
    assert store.address_index == {"2 avenue jf kennedy luxembourg lu": (lei("A"), lei("B"))}


def test_with_city_links_returns_new_store():
    store = make_store([company("A", "IE"), company("B", "NL")], [("A", "B", D)])
    linked = store.with_city_links({lei("A"): ("Q1", "Q2")})
    assert linked.get(lei("A")).legal_city_link == "Q1"
    assert linked.get(lei("A")).hq_city_link == "Q2"
    assert store.get(lei("A")).legal_city_link == ""
    assert list(linked.edges()) == list(store.edges())
