"""CSV ingestion for entities, relationships, country indicators and legal forms.

Every parser follows the same contract: a bad or missing header is fatal
(:class:`IngestError`), while a bad data row is recorded as a
:class:`RowError` and skipped.  ``accepted + skipped == data rows`` holds
for each parser.
"""

from __future__ import annotations

import csv
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .model import (
    Company,
    CountryIndicators,
    EdgeKind,
    GraphStore,
    RelationshipEdge,
    is_iso2,
    validate_lei,
)

log = logging.getLogger(__name__)

ENTITY_HEADER = (
    "lei", "legalName", "legalCountry", "legalRegion", "legalCity",
    "legalPostal", "legalAddressLine", "hqCountry", "hqRegion", "hqCity",
    "hqPostal", "hqAddressLine", "legalFormCode",
)
RELATIONSHIP_HEADER = ("childLei", "parentLei", "relationshipType")
INDICATOR_HEADER = ("country", "population", "gdpMillionUsd", "corporateTaxRatePct")
LEGAL_FORM_HEADER = ("elfCode", "name")

RELATIONSHIP_TYPES = {
    "IS_DIRECTLY_CONSOLIDATED_BY": EdgeKind.DIRECT,
    "IS_ULTIMATELY_CONSOLIDATED_BY": EdgeKind.ULTIMATE,
}
_TYPE_NAMES = {kind: name for name, kind in RELATIONSHIP_TYPES.items()}


class IngestError(Exception):
    """Fatal input problem (bad header, ambiguous ground truth)."""


@dataclass(frozen=True)
class RowError:
    line: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.reason}"


@dataclass
class ParseResult:
    records: list
    errors: list[RowError] = field(default_factory=list)
    rows: int = 0
    self_loops: int = 0

    @property
    def skipped(self) -> int:
        return len(self.errors) + self.self_loops


def _rows(stream: IO[str] | Iterable[str], header: Sequence[str], what: str):
    """Yield (line_number, row) after checking the header."""
    reader = csv.reader(stream, strict=True)
    try:
        first = next(reader)
    except StopIteration:
        raise IngestError(f"{what}: missing header") from None
    except csv.Error as exc:
        raise IngestError(f"{what}: garbled header ({exc})") from None
    if first:
        first[0] = first[0].lstrip("\ufeff")
    if [c.strip() for c in first] != list(header):
        raise IngestError(
            f"{what}: expected header {','.join(header)!r}, got {','.join(first)!r}"
        )
    while True:
        try:
            row = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            yield reader.line_num, exc
            continue
        if not row:
            continue
        yield reader.line_num, row


def _code(value: str) -> str:
    return sys.intern(value.strip())


def parse_entities(stream: IO[str] | Iterable[str]) -> ParseResult:
    """Parse ``entities.csv`` into :class:`Company` records.

    Duplicate LEIs keep the first row; later ones become row errors.
    """
    result = ParseResult(records=[])
    seen: set[str] = set()
    width = len(ENTITY_HEADER)
    for line, row in _rows(stream, ENTITY_HEADER, "entities"):
        result.rows += 1
        if isinstance(row, csv.Error):
            result.errors.append(RowError(line, f"malformed csv: {row}"))
            continue
        if len(row) != width:
            result.errors.append(RowError(line, f"column count {len(row)} != {width}"))
            continue
        lei = row[0].strip()
        if not lei:
            result.errors.append(RowError(line, "empty lei"))
            continue
        legal_country, hq_country = _code(row[2]), _code(row[7])
        bad = [c for c in (legal_country, hq_country) if c and not is_iso2(c)]
        if bad:
            result.errors.append(RowError(line, f"bad country code {bad[0]!r}"))
            continue
        if lei in seen:
            result.errors.append(RowError(line, f"duplicate lei {lei}"))
            continue
        seen.add(lei)
        result.records.append(Company(
            lei=lei,
            legal_name=row[1],
            legal_country=legal_country,
            legal_region=_code(row[3]),
            legal_city=row[4],
            legal_postal=row[5],
            legal_address_line=row[6],
            hq_country=hq_country,
            hq_region=_code(row[8]),
            hq_city=row[9],
            hq_postal=row[10],
            hq_address_line=row[11],
            legal_form_code=_code(row[12]),
        ))
    return result


def parse_relationships(stream: IO[str] | Iterable[str]) -> ParseResult:
    """Parse ``relationships.csv``; self-loops are dropped and counted."""
    result = ParseResult(records=[])
    width = len(RELATIONSHIP_HEADER)
    for line, row in _rows(stream, RELATIONSHIP_HEADER, "relationships"):
        result.rows += 1
        if isinstance(row, csv.Error):
            result.errors.append(RowError(line, f"malformed csv: {row}"))
            continue
        if len(row) != width:
            result.errors.append(RowError(line, f"column count {len(row)} != {width}"))
            continue
        child, parent, rel_type = (c.strip() for c in row)
        if not child or not parent:
            result.errors.append(RowError(line, "empty lei"))
            continue
        kind = RELATIONSHIP_TYPES.get(rel_type)
        if kind is None:
            result.errors.append(RowError(line, f"unknown relationship type {rel_type!r}"))
            continue
        if child == parent:
            result.self_loops += 1
            continue
        result.records.append(RelationshipEdge(child, parent, kind))
    return result


def _number(cell: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(cell)
    return int(value) if value.is_integer() else value


def parse_indicators(stream: IO[str] | Iterable[str]) -> tuple[dict[str, CountryIndicators], list[RowError]]:
    """Parse ``indicators.csv`` into a country -> indicators map.

    A country appearing twice is fatal: there is no sound way to pick one.
    """
    out: dict[str, CountryIndicators] = {}
    errors: list[RowError] = []
    width = len(INDICATOR_HEADER)
    names = ("population", "gdp", "tax rate")
    for line, row in _rows(stream, INDICATOR_HEADER, "indicators"):
        if isinstance(row, csv.Error):
            errors.append(RowError(line, f"malformed csv: {row}"))
            continue
        if len(row) != width:
            errors.append(RowError(line, f"column count {len(row)} != {width}"))
            continue
        country = _code(row[0])
        if not is_iso2(country):
            errors.append(RowError(line, f"bad country code {country!r}"))
            continue
        values = []
        for name, cell in zip(names, row[1:]):
            try:
                values.append(_number(cell))
            except ValueError:
                errors.append(RowError(line, f"{name} not numeric"))
                break
        else:
            if country in out:
                raise IngestError(f"indicators: duplicate country {country} on line {line}")
            try:
                out[country] = CountryIndicators(country, *values)
            except ValueError as exc:
                errors.append(RowError(line, str(exc)))
    return out, errors


def parse_legal_forms(stream: IO[str] | Iterable[str]) -> tuple[dict[str, str], list[RowError]]:
    out: dict[str, str] = {}
    errors: list[RowError] = []
    for line, row in _rows(stream, LEGAL_FORM_HEADER, "legalforms"):
        if isinstance(row, csv.Error) or len(row) != 2:
            errors.append(RowError(line, "column count"))
            continue
        code = row[0].strip()
        if not code:
            errors.append(RowError(line, "empty elf code"))
        elif code in out:
            errors.append(RowError(line, f"duplicate elf code {code}"))
        else:
            out[code] = row[1]
    return out, errors


@dataclass
class BuildReport:
    companies: int = 0
    stubs: int = 0
    direct: int = 0
    ultimate: int = 0
    duplicate_edges: int = 0
    self_loops: int = 0
    countries: int = 0
    cities: int = 0
    legal_forms: int = 0
    malformed_leis: int = 0
    checksum_failures: int = 0
    row_errors: dict[str, list[RowError]] = field(default_factory=dict)

    @property
    def warning_count(self) -> int:
        return sum(len(v) for v in self.row_errors.values())

    def table(self) -> list[tuple[str, int]]:
        return [
            ("Company", self.companies),
            ("  of which stubs", self.stubs),
            ("Country", self.countries),
            ("City", self.cities),
            ("Legal Form", self.legal_forms),
            ("direct subsidiary", self.direct),
            ("ultimate subsidiary", self.ultimate),
            ("duplicate edges dropped", self.duplicate_edges),
            ("self-loops dropped", self.self_loops),
            ("rows skipped", self.warning_count),
        ]


def build_graph(
    companies: Iterable[Company],
    edges: Iterable[RelationshipEdge],
    indicators: Mapping[str, CountryIndicators] | None = None,
    legal_forms: Mapping[str, str] | None = None,
) -> tuple[GraphStore, BuildReport]:
    """Assemble a :class:`GraphStore` from parsed records.

    Edge endpoints with no entity record become stub companies, duplicate
    edges are collapsed and self-loops dropped; all three are counted in the
    returned report.
    """
    report = BuildReport()
    by_lei: dict[str, Company] = {}
    for company in companies:
        # first record wins, matching parse_entities
        by_lei.setdefault(company.lei, company)

    unique: set[RelationshipEdge] = set()
    for edge in edges:
        if edge.child == edge.parent:
            report.self_loops += 1
        elif edge in unique:
            report.duplicate_edges += 1
        else:
            unique.add(edge)

    dangling = {e.child for e in unique} | {e.parent for e in unique}
    dangling.difference_update(by_lei)
    for lei in sorted(dangling):
        by_lei[lei] = Company.make_stub(lei)
    report.stubs = len(dangling)

    store = GraphStore(by_lei, sorted(unique), indicators, legal_forms)
    del by_lei, unique

    countries: set[str] = set(store.indicators)
    cities: set[tuple[str, str]] = set()
    forms: set[str] = set()
    for company in store.companies.values():
        if company.stub:
            continue
        report_lei = validate_lei(company.lei)
        if not report_lei.well_formed:
            report.malformed_leis += 1
        elif not report_lei.checksum_ok:
            report.checksum_failures += 1
        for country, city in (
            (company.legal_country, company.legal_city),
            (company.hq_country, company.hq_city),
        ):
            if country:
                countries.add(country)
                if city:
                    cities.add((country, city.casefold()))
        if company.legal_form_code:
            forms.add(company.legal_form_code)

    report.companies = len(store)
    report.direct = store.edge_count(EdgeKind.DIRECT)
    report.ultimate = store.edge_count(EdgeKind.ULTIMATE)
    report.countries = len(countries)
    report.cities = len(cities)
    report.legal_forms = len(forms)
    return store, report


@dataclass(frozen=True)
class InputPaths:
    entities: Path
    relationships: Path
    indicators: Path
    legal_forms: Path | None = None

    def all(self) -> list[Path]:
        paths = [self.entities, self.relationships, self.indicators]
        if self.legal_forms is not None:
            paths.append(self.legal_forms)
        return paths


def _open(path: Path) -> IO[str]:
    return open(path, newline="", encoding="utf-8")


def load_graph(paths: InputPaths) -> tuple[GraphStore, BuildReport]:
    """Parse the input files and build the store.

    Raises :class:`FileNotFoundError` for a missing file and
    :class:`IngestError` for a fatal parse problem.
    """
    for path in paths.all():
        if not Path(path).is_file():
            raise FileNotFoundError(f"input file not found: {path}")
    with _open(paths.entities) as fp:
        entities = parse_entities(fp)
    with _open(paths.relationships) as fp:
        rels = parse_relationships(fp)
    with _open(paths.indicators) as fp:
        indicators, ind_errors = parse_indicators(fp)
    legal_forms: dict[str, str] = {}
    lf_errors: list[RowError] = []
    if paths.legal_forms is not None:
        with _open(paths.legal_forms) as fp:
            legal_forms, lf_errors = parse_legal_forms(fp)

    store, report = build_graph(entities.records, rels.records, indicators, legal_forms)
    report.self_loops += rels.self_loops
    report.row_errors = {
        name: errs
        for name, errs in (
            ("entities", entities.errors),
            ("relationships", rels.errors),
            ("indicators", ind_errors),
            ("legalforms", lf_errors),
        )
        if errs
    }
    for name, errs in report.row_errors.items():
        for err in errs[:20]:
            log.warning("%s: %s", name, err)
    return store, report


# -- serialization -----------------------------------------------------------

def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    return repr(value)


def write_entities(companies: Iterable[Company], fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(ENTITY_HEADER)
    for c in companies:
        writer.writerow((
            c.lei, c.legal_name, c.legal_country, c.legal_region, c.legal_city,
            c.legal_postal, c.legal_address_line, c.hq_country, c.hq_region,
            c.hq_city, c.hq_postal, c.hq_address_line, c.legal_form_code,
        ))


def write_relationships(edges: Iterable[RelationshipEdge], fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(RELATIONSHIP_HEADER)
    for e in edges:
        writer.writerow((e.child, e.parent, _TYPE_NAMES[e.kind]))


def write_indicators(indicators: Iterable[CountryIndicators], fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(INDICATOR_HEADER)
    for ind in indicators:
        writer.writerow((
            ind.country, _fmt(ind.population), _fmt(ind.gdp), _fmt(ind.corporate_tax_rate),
        ))


def write_legal_forms(legal_forms: Mapping[str, str], fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(LEGAL_FORM_HEADER)
    for code, name in legal_forms.items():
        writer.writerow((code, name))
