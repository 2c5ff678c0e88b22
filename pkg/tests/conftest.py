from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

from taxgraph.ingest import build_graph
from taxgraph.model import Company, CountryIndicators, EdgeKind, RelationshipEdge

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
STANDARD = FIXTURES / "standard"

D, U = EdgeKind.DIRECT, EdgeKind.ULTIMATE


def lei(tag: str) -> str:
    """20-char identifier padded from a short tag (check digits not valid)."""
    return (tag.upper() + "0" * 20)[:18] + "00"


def company(tag: str, legal="", hq=None, form="", region="", **extra) -> Company:
    return Company(
        lei=lei(tag),
        legal_name=f"{tag} Ltd",
        legal_country=legal,
        legal_region=region,
        hq_country=legal if hq is None else hq,
        legal_form_code=form,
        **extra,
    )


def make_store(companies, edges=(), indicators=None, legal_forms=None):
    """Build a store; edges are (child_tag, parent_tag, kind) triples."""
    rels = [RelationshipEdge(lei(c), lei(p), k) for c, p, k in edges]
    store, _ = build_graph(companies, rels, indicators or {}, legal_forms or {})
    return store


COUNTRIES = ("IE", "NL", "US", "BM", "KY", "DE")
FORMS = ("54M6", "XTIQ", "8888")


def random_graph(rng: random.Random, n: int, m: int, *, acyclic=False, kinds=(D, U)):
    """Random companies and up to *m* distinct edges as (child, parent, kind) LEI triples."""
    companies = [
        Company(
            lei=lei(f"N{i:03d}"),
            legal_country=rng.choice(COUNTRIES),
            hq_country=rng.choice(COUNTRIES),
            legal_form_code=rng.choice(FORMS),
            legal_region=rng.choice(("", "R1", "R2")),
        )
        for i in range(n)
    ]
    edges = set()
    for _ in range(m * 3):
        if len(edges) >= m:
            break
        a, b = rng.randrange(n), rng.randrange(n)
        if a == b:
            continue
        if acyclic and a < b:
            a, b = b, a
        edges.add((companies[a].lei, companies[b].lei, rng.choice(kinds)))
    return companies, sorted(edges)


def store_from_triples(companies, triples, indicators=None):
    rels = [RelationshipEdge(c, p, k) for c, p, k in triples]
    store, _ = build_graph(companies, rels, indicators or {}, {})
    return store


@pytest.fixture
def standard_dir() -> Path:
    return STANDARD


@pytest.fixture
def indicators():
    return {
        "IE": CountryIndicators("IE", 5_000_000, 500_000, 12.5),
        "NL": CountryIndicators("NL", 17_500_000, 1_000_000, 25.0),
        "US": CountryIndicators("US", 330_000_000, 23_000_000, 21.0),
        "BM": CountryIndicators("BM", 64_000, 7_000, 0.0),
    }
