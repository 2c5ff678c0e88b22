import io
import random
import string

import pytest
from conftest import STANDARD
from hypothesis import given, settings
from hypothesis import strategies as st

from taxgraph.ingest import (
    ENTITY_HEADER,
    IngestError,
    InputPaths,
    build_graph,
    load_graph,
    parse_entities,
    parse_indicators,
    parse_legal_forms,
    parse_relationships,
    write_entities,
    write_indicators,
    write_relationships,
)
from taxgraph.model import Company, CountryIndicators, EdgeKind, RelationshipEdge

HEADER = ",".join(ENTITY_HEADER) + "\n"
A = "A" * 18 + "00"
B = "B" * 18 + "00"
C = "C" * 18 + "00"


def entity_row(lei, legal="IE", hq="IE", form="XTIQ"):
    return f"{lei},Name,{legal},,Dublin,D02,1 Street,{hq},,Dublin,D02,1 Street,{form}\n"


def rel_csv(*rows):
    return "childLei,parentLei,relationshipType\n" + "".join(",".join(r) + "\n" for r in rows)


def test_full_row_parses_into_company():
    result = parse_entities(io.StringIO(HEADER + entity_row(A, "IE", "BM", "54M6")))
    assert result.errors == []
    (c,) = result.records
    assert (c.lei, c.legal_country, c.hq_country, c.legal_form_code, c.legal_city) == (A, "IE", "BM", "54M6", "Dublin")


def test_short_row_is_skipped_with_column_count_error():
    text = HEADER + entity_row(A) + "X,Y,IE,,a,b,c,IE,,a,b,c\n"
    result = parse_entities(io.StringIO(text))
    assert len(result.records) == 1
    (err,) = result.errors
    assert err.line == 3 and "column count" in err.reason


def test_duplicate_lei_keeps_first_row():
    text = HEADER + entity_row(A, "IE") + entity_row(A, "NL")
    result = parse_entities(io.StringIO(text))
    assert [c.legal_country for c in result.records] == ["IE"]
    assert result.errors[0].line == 3
    assert "duplicate lei" in result.errors[0].reason


def test_bad_country_and_empty_lei():
    text = HEADER + entity_row(A, "IRL") + entity_row("", "IE") + entity_row(B, "ie")
    result = parse_entities(io.StringIO(text))
    assert result.records == []
    reasons = [e.reason for e in result.errors]
    assert "bad country code" in reasons[0] and reasons[1] == "empty lei" and "bad country" in reasons[2]


@pytest.mark.parametrize("header", ["", "lei,legalName\n", "wrong\n"])
def test_bad_header_is_fatal(header):
    with pytest.raises(IngestError):
        parse_entities(io.StringIO(header + entity_row(A)))


def test_bom_header_is_accepted():
    result = parse_entities(io.StringIO("﻿" + HEADER + entity_row(A)))
    assert len(result.records) == 1


def test_relationship_examples():
    text = rel_csv(
        (A, B, "IS_DIRECTLY_CONSOLIDATED_BY"),
        (A, A, "IS_DIRECTLY_CONSOLIDATED_BY"),
        (A, B, "OWNS"),
        (B, C, "IS_ULTIMATELY_CONSOLIDATED_BY"),
    )
    result = parse_relationships(io.StringIO(text))
    assert result.records == [
        RelationshipEdge(A, B, EdgeKind.DIRECT),
        RelationshipEdge(B, C, EdgeKind.ULTIMATE),
    ]
    assert result.self_loops == 1
    assert [e.reason for e in result.errors] == ["unknown relationship type 'OWNS'"]
    assert len(result.records) + result.skipped == result.rows == 4


def test_indicator_examples():
    text = (
        "country,population,gdpMillionUsd,corporateTaxRatePct\n"
        "LI,37910,6214,12.5\n"
        "DE,82927922,3947620,\n"
        "XX,abc,1,1\n"
    )
    out, errors = parse_indicators(io.StringIO(text))
    assert out["LI"] == CountryIndicators("LI", 37910, 6214, 12.5)
    assert out["DE"].population == 82927922 and out["DE"].corporate_tax_rate is None
    assert [(e.line, e.reason) for e in errors] == [(4, "population not numeric")]


def test_duplicate_indicator_country_is_fatal():
    text = "country,population,gdpMillionUsd,corporateTaxRatePct\nIE,1,1,1\nIE,2,2,2\n"
    with pytest.raises(IngestError, match="duplicate country"):
        parse_indicators(io.StringIO(text))


def test_out_of_range_tax_rate_is_row_error():
    text = "country,population,gdpMillionUsd,corporateTaxRatePct\nIE,1,1,101\n"
    out, errors = parse_indicators(io.StringIO(text))
    assert out == {} and len(errors) == 1


def test_legal_forms():
    out, errors = parse_legal_forms(io.StringIO("elfCode,name\n54M6,BV\n54M6,again\n,x\n"))
    assert out == {"54M6": "BV"}
    assert len(errors) == 2


def test_build_report_counts():
    companies = [Company(A, legal_country="IE"), Company(B), Company(C)]
    edges = [RelationshipEdge(A, B, EdgeKind.DIRECT), RelationshipEdge(B, C, EdgeKind.DIRECT)]
    store, report = build_graph(companies, edges)
    assert (report.companies, report.stubs, report.direct, report.ultimate) == (3, 0, 2, 0)


def test_dangling_edge_creates_stub():
    store, report = build_graph([Company(A)], [RelationshipEdge(A, B, EdgeKind.DIRECT)])
    assert (report.companies, report.stubs, report.direct) == (2, 1, 1)
    assert store.get(B).stub


def test_duplicate_edges_are_deduplicated_and_counted():
    edge = RelationshipEdge(A, B, EdgeKind.DIRECT)
    store, report = build_graph([Company(A), Company(B)], [edge, edge, edge])
    assert report.direct == 1 and report.duplicate_edges == 2


def test_company_count_is_distinct_leis_plus_stubs():
    companies = [Company(A), Company(A, legal_country="NL"), Company(B)]
    edges = [RelationshipEdge(A, C, EdgeKind.DIRECT), RelationshipEdge(B, "D" * 20, EdgeKind.ULTIMATE)]
    store, report = build_graph(companies, edges)
    assert len(store) == 2 + 2 == report.companies
    assert store.get(A).legal_country == ""


def test_build_is_order_independent():
    rng = random.Random(3)
    leis = [f"{i:018d}00" for i in range(40)]
    companies = [Company(x, legal_country=rng.choice(["IE", "NL", "US"])) for x in leis[:30]]
    edges = [
        RelationshipEdge(rng.choice(leis), rng.choice(leis), rng.choice(list(EdgeKind)))
        for _ in range(80)
    ]
    edges = [e for e in edges if e.child != e.parent]
    store1, r1 = build_graph(companies, edges)
    shuffled_c, shuffled_e = companies[:], edges[:]
    rng.shuffle(shuffled_c)
    rng.shuffle(shuffled_e)
    store2, r2 = build_graph(shuffled_c, shuffled_e)
    assert r1 == r2
    assert list(store1.companies) == list(store2.companies)
    assert list(store1.edges()) == list(store2.edges())


def test_load_graph_on_standard_fixture():
    paths = InputPaths(
        STANDARD / "entities.csv", STANDARD / "relationships.csv",
        STANDARD / "indicators.csv", STANDARD / "legalforms.csv",
    )
    store, report = load_graph(paths)
    # fixture: 22 entity rows, one dangling parent, one repeated row, one self-loop
    assert report.companies == 23 and report.stubs == 1
    assert report.duplicate_edges == 1 and report.self_loops == 1
    assert report.direct == 16 and report.ultimate == 9
    assert report.checksum_failures == 0 and report.malformed_leis == 0
    assert report.warning_count == 0


def test_load_graph_missing_file_names_it(tmp_path):
    paths = InputPaths(
        STANDARD / "entities.csv", tmp_path / "nope.csv", STANDARD / "indicators.csv",
    )
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_graph(paths)


# -- properties ----------------------------------------------------------------

_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
    max_size=12,
)
_code = st.sampled_from(["", "IE", "NL", "US", "BM"])
_lei = st.text(alphabet=string.ascii_uppercase + string.digits, min_size=20, max_size=20)


@st.composite
def companies(draw):
    return Company(
        lei=draw(_lei), legal_name=draw(_text), legal_country=draw(_code),
        legal_region=draw(st.sampled_from(["", "US-DE", "NL-NH"])), legal_city=draw(_text),
        legal_postal=draw(_text), legal_address_line=draw(_text), hq_country=draw(_code),
        hq_region=draw(st.sampled_from(["", "US-CA"])), hq_city=draw(_text), hq_postal=draw(_text),
        hq_address_line=draw(_text), legal_form_code=draw(st.sampled_from(["", "54M6", "8888"])),
    )


@settings(max_examples=150, deadline=None)
@given(st.lists(companies(), max_size=8, unique_by=lambda c: c.lei))
def test_entities_round_trip(records):
    buf = io.StringIO()
    write_entities(records, buf)
    result = parse_entities(io.StringIO(buf.getvalue(), newline=""))
    assert result.errors == []
    assert result.records == records


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(_lei, _lei, st.sampled_from(list(EdgeKind))), max_size=10))
def test_relationships_round_trip(triples):
    edges = [RelationshipEdge(c, p, k) for c, p, k in triples if c != p]
    buf = io.StringIO()
    write_relationships(edges, buf)
    assert parse_relationships(io.StringIO(buf.getvalue())).records == edges


@settings(max_examples=100, deadline=None)
@given(st.lists(
    st.tuples(
        st.sampled_from(["IE", "NL", "US", "DE", "LI"]),
        st.one_of(st.none(), st.integers(0, 10**10)),
        st.one_of(st.none(), st.floats(0, 1e8, allow_nan=False)),
        st.one_of(st.none(), st.floats(0, 100, allow_nan=False)),
    ),
    max_size=5, unique_by=lambda t: t[0],
))
def test_indicators_round_trip(rows):
    records = [CountryIndicators(*r) for r in rows]
    buf = io.StringIO()
    write_indicators(records, buf)
    out, errors = parse_indicators(io.StringIO(buf.getvalue()))
    assert errors == []
    assert list(out.values()) == records


@settings(max_examples=150, deadline=None)
@given(st.lists(
    st.lists(st.sampled_from(["A" * 20, "B" * 20, "", "IE", "X,Y", '"q"', "IS_DIRECTLY_CONSOLIDATED_BY", "OWNS"]),
             min_size=1, max_size=4),
    max_size=12,
))
def test_accepted_plus_skipped_equals_rows(rows):
    import csv

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["childLei", "parentLei", "relationshipType"])
    writer.writerows(rows)
    result = parse_relationships(io.StringIO(buf.getvalue()))
    # csv quotes a lone empty field, so no written row is blank
    assert result.rows == len(rows)
    assert len(result.records) + result.skipped == result.rows

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ENTITY_HEADER)
    writer.writerows(r * 4 for r in rows)
    result = parse_entities(io.StringIO(buf.getvalue()))
    assert len(result.records) + result.skipped == result.rows
