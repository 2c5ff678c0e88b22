"""City linking by postal-code candidate retrieval and normalized edit distance.

Candidates for a (city name, postal code) pair come from a dump of external
entities with postal-code values.  Range values such as ``10115-14199`` are
expanded so that every code inside the range retrieves the entity.  Among the
candidates, the one whose folded name is closest under normalized
Levenshtein distance wins, provided the distance is at most the threshold.
"""

from __future__ import annotations

import csv
import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterable

from .model import GraphStore

DEFAULT_THRESHOLD = 0.3
CANDIDATE_HEADER = ("externalId", "cityName", "postalSpec")

# ranges wider than this are kept in a scan list instead of being expanded
MAX_EXPANDED_RANGE = 100_000

_INTERVAL_RE = re.compile(r"(\d+)\s*-\s*(\d+)")


@dataclass(frozen=True)
class Literal:
    code: str


@dataclass(frozen=True)
class Interval:
    low: int
    high: int
    width: int

    def __contains__(self, code: str) -> bool:
        return len(code) == self.width and code.isdigit() and self.low <= int(code) <= self.high


@dataclass(frozen=True)
class PostalSpec:
    raw: str
    parsed: Literal | Interval


def parse_postal_spec(raw: str) -> PostalSpec:
    """``D-D`` with equal-width digit sides and low <= high is an interval;
    anything else is kept verbatim (trimmed) as a literal code."""
    text = raw.strip()
    m = _INTERVAL_RE.fullmatch(text)
    if m:
        lo, hi = m.groups()
        if len(lo) == len(hi) and int(lo) <= int(hi):
            return PostalSpec(raw, Interval(int(lo), int(hi), len(lo)))
    return PostalSpec(raw, Literal(text))


def fold(text: str) -> str:
    """Unicode case-fold, then strip combining marks (``Köln`` -> ``koln``)."""
    decomposed = unicodedata.normalize("NFKD", text.casefold())
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def edit_ratio(a: str, b: str) -> Fraction:
    """Exact normalized distance of the folded strings."""
    fa, fb = fold(a), fold(b)
    longest = max(len(fa), len(fb))
    if longest == 0:
        return Fraction(0)
    return Fraction(levenshtein(fa, fb), longest)


def normalized_edit_distance(a: str, b: str) -> float:
    return float(edit_ratio(a, b))


@dataclass(frozen=True)
class CityEntry:
    external_id: str
    city_name: str
    postal: PostalSpec


class CityCandidateIndex:
    """Postal code -> candidate city entries."""

    def __init__(self, entries: Iterable[CityEntry]):
        self.entries: tuple[CityEntry, ...] = tuple(entries)
        self._by_code: dict[str, set[int]] = defaultdict(set)
        self._wide: list[tuple[Interval, int]] = []
        for i, entry in enumerate(self.entries):
            spec = entry.postal.parsed
            if isinstance(spec, Literal):
                self._by_code[spec.code].add(i)
            elif spec.high - spec.low < MAX_EXPANDED_RANGE:
                for n in range(spec.low, spec.high + 1):
                    self._by_code[str(n).zfill(spec.width)].add(i)
            else:
                self._wide.append((spec, i))

    def __len__(self) -> int:
        return len(self.entries)

    def candidates(self, postal: str) -> list[CityEntry]:
        code = postal.strip()
        if not code:
            return []
        hits = set(self._by_code.get(code, ()))
        for interval, i in self._wide:
            if code in interval:
                hits.add(i)
        return [self.entries[i] for i in sorted(hits)]

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str, str]]) -> CityCandidateIndex:
        return cls(CityEntry(ext, name, parse_postal_spec(spec)) for ext, name, spec in rows)


def read_candidates(fp: IO[str]) -> CityCandidateIndex:
    """Load ``citycandidates.csv``; rows with a wrong column count or an
    empty field are ignored."""
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(CANDIDATE_HEADER):
        raise ValueError(f"citycandidates: expected header {','.join(CANDIDATE_HEADER)!r}")
    rows = []
    for row in reader:
        if len(row) == 3 and all(c.strip() for c in row):
            rows.append((row[0].strip(), row[1].strip(), row[2]))
    return CityCandidateIndex.from_rows(rows)


@dataclass
class MatchReport:
    status: str  # matched | no-candidates | above-threshold | ambiguous
    candidates: int = 0
    best_distance: float | None = None
    tied: tuple[str, ...] = ()


def match_city(
    name: str,
    postal: str,
    index: CityCandidateIndex,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[str | None, MatchReport]:
    """Link a city name + postal code to an external identifier.

    Accepts the closest candidate with distance <= *threshold* (compared
    exactly, so 3/10 is accepted at 0.3).  Two different identifiers tied at
    the minimum distance give no link.
    """
    limit = Fraction(str(threshold))
    best: dict[str, Fraction] = {}
    for entry in index.candidates(postal):
        d = edit_ratio(name, entry.city_name)
        if entry.external_id not in best or d < best[entry.external_id]:
            best[entry.external_id] = d
    if not best:
        return None, MatchReport("no-candidates")
    low = min(best.values())
    report = MatchReport("above-threshold", candidates=len(best), best_distance=float(low))
    if low > limit:
        return None, report
    winners = sorted(ext for ext, d in best.items() if d == low)
    if len(winners) > 1:
        report.status = "ambiguous"
        report.tied = tuple(winners)
        return None, report
    report.status = "matched"
    return winners[0], report


@dataclass
class LinkSummary:
    links: dict[str, tuple[str, str]] = field(default_factory=dict)
    status_counts: dict[str, int] = field(default_factory=dict)
    linked_cities: int = 0


def link_companies(
    store: GraphStore,
    index: CityCandidateIndex,
    threshold: float = DEFAULT_THRESHOLD,
) -> LinkSummary:
    """Match each company's legal and headquarter city.

    Returns lei -> (legal link, hq link) for companies with at least one
    link.  Identical (name, postal) pairs are matched once.
    """
    cache: dict[tuple[str, str], str | None] = {}
    counts: dict[str, int] = defaultdict(int)
    links: dict[str, tuple[str, str]] = {}

    def lookup(name: str, postal: str) -> str:
        if not name or not postal:
            return ""
        key = (name, postal)
        if key not in cache:
            ext, report = match_city(name, postal, index, threshold)
            cache[key] = ext
            counts[report.status] += 1
        return cache[key] or ""

    for lei, company in store.companies.items():
        if company.stub:
            continue
        legal = lookup(company.legal_city, company.legal_postal)
        hq = lookup(company.hq_city, company.hq_postal)
        if legal or hq:
            links[lei] = (legal, hq)
    linked = {ext for ext in cache.values() if ext}
    return LinkSummary(links, dict(sorted(counts.items())), len(linked))

