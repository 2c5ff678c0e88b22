"""Anomaly and distribution statistics over a built graph.

Companies or edges missing a field a metric needs are excluded from that
metric rather than zero-filled.  Tax deltas are signed as
``rate(hq or parent) - rate(legal or child)``, so a positive mean means the
legal seat or subsidiary sits in the lower-tax country.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from statistics import fmean
from typing import Literal, Mapping

from .model import EdgeKind, GraphStore

log = logging.getLogger(__name__)

Attribution = Literal["legal", "hq"]


@dataclass(frozen=True)
class RankedCountryMetric:
    country: str
    numerator: int
    denominator: float
    unit: str
    ratio: float


def _country_counts(store: GraphStore, attribution: Attribution) -> Counter:
    if attribution not in ("legal", "hq"):
        raise ValueError("attribution must be 'legal' or 'hq'")
    attr = "legal_country" if attribution == "legal" else "hq_country"
    counts: Counter = Counter()
    for company in store.companies.values():
        country = getattr(company, attr)
        if country:
            counts[country] += 1
    return counts


def _rank(rows: list[RankedCountryMetric]) -> list[RankedCountryMetric]:
    return sorted(rows, key=lambda r: (-r.ratio, r.country))


def _per_indicator(store: GraphStore, attribution: Attribution, field_name: str, unit: str):
    counts = _country_counts(store, attribution)
    rows = []
    for country in sorted(set(counts) | set(store.indicators)):
        ind = store.indicators.get(country)
        denominator = getattr(ind, field_name) if ind is not None else None
        if not denominator:
            log.warning("%s: no usable %s, excluded (%d companies)", country, field_name, counts[country])
            continue
        rows.append(RankedCountryMetric(
            country, counts[country], denominator, unit, counts[country] / denominator,
        ))
    return _rank(rows)


def companies_per_capita(store: GraphStore, attribution: Attribution = "legal") -> list[RankedCountryMetric]:
    """Companies per inhabitant, ranked descending.

    Companies are attributed to their legal address country unless
    ``attribution="hq"``.  Countries without a population (or with zero) are
    left out and logged.
    """
    return _per_indicator(store, attribution, "population", "persons")


def companies_per_gdp(store: GraphStore, attribution: Attribution = "legal") -> list[RankedCountryMetric]:
    """Companies per million USD of GDP, ranked descending."""
    return _per_indicator(store, attribution, "gdp", "million USD")


def address_concentration(store: GraphStore, top_k: int | None = 10) -> list[tuple[str, int]]:
    rows = sorted(
        ((address, len(leis)) for address, leis in store.address_index.items()),
        key=lambda r: (-r[1], r[0]),
    )
    return rows if top_k is None else rows[:top_k]


@dataclass(frozen=True)
class FlowRow:
    from_country: str
    to_country: str
    count: int


@dataclass(frozen=True)
class Divergence:
    count: int
    considered: int
    share: float | None
    flows: list[FlowRow] = field(default_factory=list)
    top_legal: list[tuple[str, int]] = field(default_factory=list)


def _flows(pairs: Counter) -> list[FlowRow]:
    return [
        FlowRow(a, b, n)
        for (a, b), n in sorted(pairs.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def hq_legal_divergence(store: GraphStore) -> Divergence:
    """Companies whose headquarter and legal address countries differ.

    Flows are keyed headquarter country -> legal country.  Companies lacking
    either country are not considered.
    """
    pairs: Counter = Counter()
    considered = 0
    for company in store.companies.values():
        hq, legal = company.hq_country, company.legal_country
        if not hq or not legal:
            continue
        considered += 1
        if hq != legal:
            pairs[(hq, legal)] += 1
    count = sum(pairs.values())
    legal_counts: Counter = Counter()
    for (_, legal), n in pairs.items():
        legal_counts[legal] += n
    top_legal = sorted(legal_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Divergence(
        count=count,
        considered=considered,
        share=count / considered if considered else None,
        flows=_flows(pairs),
        top_legal=top_legal,
    )


def subsidiary_flows(store: GraphStore) -> list[FlowRow]:
    """Multinational direct edges keyed parent legal country -> child legal country."""
    pairs: Counter = Counter()
    for edge in store.edges(EdgeKind.DIRECT):
        parent = store.companies[edge.parent].legal_country
        child = store.companies[edge.child].legal_country
        if parent and child and parent != child:
            pairs[(parent, child)] += 1
    return _flows(pairs)


@dataclass(frozen=True)
class TaxDelta:
    mean: float | None
    n: int
    excluded: int


def tax_delta_hq_legal(store: GraphStore, divergent_only: bool = False) -> TaxDelta:
    """Mean of rate(hq country) - rate(legal country) in percentage points."""
    deltas = []
    excluded = 0
    for company in store.companies.values():
        hq, legal = company.hq_country, company.legal_country
        if divergent_only and (not hq or not legal or hq == legal):
            continue
        hq_rate, legal_rate = store.tax_rate(hq), store.tax_rate(legal)
        if hq_rate is None or legal_rate is None:
            excluded += 1
            continue
        deltas.append(hq_rate - legal_rate)
    return TaxDelta(fmean(deltas) if deltas else None, len(deltas), excluded)


def tax_delta_parent_child(store: GraphStore, multinational_only: bool = False) -> TaxDelta:
    """Mean over direct edges of rate(parent legal) - rate(child legal)."""
    deltas = []
    excluded = 0
    for edge in store.edges(EdgeKind.DIRECT):
        parent = store.companies[edge.parent].legal_country
        child = store.companies[edge.child].legal_country
        if multinational_only and (not parent or not child or parent == child):
            continue
        parent_rate, child_rate = store.tax_rate(parent), store.tax_rate(child)
        if parent_rate is None or child_rate is None:
            excluded += 1
            continue
        deltas.append(parent_rate - child_rate)
    return TaxDelta(fmean(deltas) if deltas else None, len(deltas), excluded)


@dataclass(frozen=True)
class RegionShare:
    legal_share: float
    hq_share_among_legal: float | None
    country_total: int
    legal_in_region: int
    hq_in_region: int


def region_share(store: GraphStore, country: str, region: str) -> RegionShare:
    """Share of a country's companies registered in *region*, and how many
    of those also keep their headquarters there."""
    total = in_region = hq_too = 0
    for company in store.companies.values():
        if company.legal_country != country:
            continue
        total += 1
        if company.legal_region == region:
            in_region += 1
            if company.hq_country == country and company.hq_region == region:
                hq_too += 1
    if total == 0:
        raise ValueError(f"empty denominator: no companies with legal country {country}")
    return RegionShare(
        legal_share=in_region / total,
        hq_share_among_legal=hq_too / in_region if in_region else None,
        country_total=total,
        legal_in_region=in_region,
        hq_in_region=hq_too,
    )


def multinational_edge_share(store: GraphStore) -> float:
    """Fraction of direct edges whose parent and child legal countries differ.

    Edges with an unknown country on either end are left out.
    """
    total = cross = 0
    for edge in store.edges(EdgeKind.DIRECT):
        parent = store.companies[edge.parent].legal_country
        child = store.companies[edge.child].legal_country
        if not parent or not child:
            continue
        total += 1
        cross += parent != child
    if total == 0:
        raise ValueError("no direct edges with known countries")
    return cross / total


@dataclass(frozen=True)
class CityDensityRow:
    city: str
    name: str
    count: int
    area: float
    density: float


@dataclass(frozen=True)
class CityDensity:
    hq: list[CityDensityRow]
    legal: list[CityDensityRow]
    skipped_without_area: int


def _density(store: GraphStore, role: str, areas: Mapping[str, float], min_companies: int):
    link_attr, name_attr = f"{role}_city_link", f"{role}_city"
    counts: Counter = Counter()
    names: dict[str, Counter] = {}
    for company in store.companies.values():
        link = getattr(company, link_attr)
        if link:
            counts[link] += 1
            names.setdefault(link, Counter())[getattr(company, name_attr)] += 1
    rows, skipped = [], 0
    for city, count in counts.items():
        if count <= min_companies:
            continue
        area = areas.get(city)
        if not area or area <= 0:
            skipped += 1
            continue
        name = min(names[city].items(), key=lambda kv: (-kv[1], kv[0]))[0]
        rows.append(CityDensityRow(city, name, count, area, count / area))
    rows.sort(key=lambda r: (-r.density, r.city))
    return rows, skipped


def city_density(
    store: GraphStore,
    areas: Mapping[str, float],
    min_companies: int = 1000,
) -> CityDensity:
    """Companies per square kilometre for linked cities.

    Only cities with more than *min_companies* companies are ranked, one
    ranking by headquarter city and one by legal city.  Qualifying cities
    with no known area are skipped and counted.
    """
    if min_companies < 1:
        raise ValueError("min_companies must be >= 1")
    hq, skipped_hq = _density(store, "hq", areas, min_companies)
    legal, skipped_legal = _density(store, "legal", areas, min_companies)
    return CityDensity(hq, legal, skipped_hq + skipped_legal)
