"""Domain types and the immutable, indexed company graph."""

from __future__ import annotations

import re
import string
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

_LEI_RE = re.compile(r"[A-Z0-9]{18}[0-9]{2}")
_ISO2_RE = re.compile(r"[A-Z]{2}")


class EdgeKind(str, Enum):
    DIRECT = "direct"
    ULTIMATE = "ultimate"


class UnknownEntityError(KeyError):
    """Raised when a query names an LEI that is not in the store."""

    def __init__(self, lei: str):
        super().__init__(lei)
        self.lei = lei

    def __str__(self) -> str:
        return f"unknown entity: {self.lei}"


@dataclass(frozen=True)
class LeiReport:
    well_formed: bool
    checksum_ok: bool | None


def lei_checksum(raw: str) -> int:
    """Return the ISO 7064 MOD 97-10 remainder of *raw* (1 means valid)."""
    # letters expand to two digits (A=10 .. Z=35)
    return int("".join(str(int(ch, 36)) for ch in raw)) % 97


def validate_lei(raw: str) -> LeiReport:
    """Check the shape of an LEI and, when well formed, its check digits.

    The checksum result is informational only; ingestion never rejects a
    record on it.
    """
    if not isinstance(raw, str) or not _LEI_RE.fullmatch(raw):
        return LeiReport(well_formed=False, checksum_ok=None)
    return LeiReport(well_formed=True, checksum_ok=lei_checksum(raw) == 1)


def is_iso2(code: str) -> bool:
    return bool(_ISO2_RE.fullmatch(code))


@dataclass(frozen=True, slots=True)
class Company:
    lei: str
    legal_name: str = ""
    legal_country: str = ""
    legal_region: str = ""
    legal_city: str = ""
    legal_postal: str = ""
    legal_address_line: str = ""
    hq_country: str = ""
    hq_region: str = ""
    hq_city: str = ""
    hq_postal: str = ""
    hq_address_line: str = ""
    legal_form_code: str = ""
    legal_city_link: str = ""
    hq_city_link: str = ""
    stub: bool = False

    @classmethod
    def make_stub(cls, lei: str) -> Company:
        return cls(lei=lei, stub=True)


@dataclass(frozen=True, slots=True, order=True)
class RelationshipEdge:
    """A consolidation edge pointing from the child to its parent."""

    child: str
    parent: str
    kind: EdgeKind


@dataclass(frozen=True, slots=True)
class CountryIndicators:
    country: str
    population: float | None = None
    gdp: float | None = None  # million USD
    corporate_tax_rate: float | None = None  # percent

    def __post_init__(self):
        if self.population is not None and self.population < 0:
            raise ValueError("population must be >= 0")
        if self.gdp is not None and self.gdp < 0:
            raise ValueError("gdp must be >= 0")
        rate = self.corporate_tax_rate
        if rate is not None and not 0 <= rate <= 100:
            raise ValueError("corporate tax rate must be within [0, 100]")


_DROP_ASCII_PUNCT = str.maketrans("", "", string.punctuation)


def normalize_address(text: str) -> str:
    """Casefold, drop punctuation and collapse whitespace."""
    folded = text.casefold().translate(_DROP_ASCII_PUNCT)
    if not folded.isascii():
        folded = "".join(
            c for c in folded if not unicodedata.category(c).startswith("P")
        )
    return " ".join(folded.split())


def full_legal_address(company: Company) -> str:
    parts = (
        company.legal_address_line,
        company.legal_postal,
        company.legal_city,
        company.legal_region,
        company.legal_country,
    )
    return normalize_address(" ".join(p for p in parts if p))


def _freeze_adjacency(adj: dict[str, set[str]]) -> Mapping[str, tuple[str, ...]]:
    return MappingProxyType({k: tuple(sorted(v)) for k, v in sorted(adj.items())})


class GraphStore:
    """Read-only company graph with forward and reverse adjacency per edge kind.

    Instances are produced by :func:`taxgraph.ingest.build_graph`; nothing in
    the public API mutates a store after construction.
    """

    __slots__ = (
        "_companies", "_parents", "_children", "_indicators",
        "_legal_forms", "_address_index", "_edge_count",
    )

    def __init__(
        self,
        companies: Mapping[str, Company],
        edges: Iterable[RelationshipEdge],
        indicators: Mapping[str, CountryIndicators] | None = None,
        legal_forms: Mapping[str, str] | None = None,
    ):
        companies = dict(companies)
        parents = {kind: defaultdict(set) for kind in EdgeKind}
        children = {kind: defaultdict(set) for kind in EdgeKind}
        count = dict.fromkeys(EdgeKind, 0)
        for edge in edges:
            if edge.child not in companies or edge.parent not in companies:
                raise ValueError(f"edge endpoint missing from companies: {edge}")
            if edge.child == edge.parent:
                raise ValueError(f"self-loop edge: {edge}")
            if edge.parent in parents[edge.kind][edge.child]:
                continue
            parents[edge.kind][edge.child].add(edge.parent)
            children[edge.kind][edge.parent].add(edge.child)
            count[edge.kind] += 1

        self._companies = MappingProxyType(dict(sorted(companies.items())))
        self._parents = {k: _freeze_adjacency(v) for k, v in parents.items()}
        self._children = {k: _freeze_adjacency(v) for k, v in children.items()}
        self._indicators = MappingProxyType(dict(sorted((indicators or {}).items())))
        self._legal_forms = MappingProxyType(dict(sorted((legal_forms or {}).items())))
        self._address_index = None
        self._edge_count = count

    # -- lookups -----------------------------------------------------------

    @property
    def companies(self) -> Mapping[str, Company]:
        return self._companies

    @property
    def indicators(self) -> Mapping[str, CountryIndicators]:
        return self._indicators

    @property
    def legal_forms(self) -> Mapping[str, str]:
        return self._legal_forms

    @property
    def address_index(self) -> Mapping[str, tuple[str, ...]]:
        """Normalized full legal address -> LEIs registered there.

        Built on first access and cached; stubs carry no address.
        """
        if self._address_index is None:
            index: dict[str, list[str]] = defaultdict(list)
            for lei, company in self._companies.items():
                if company.stub:
                    continue
                key = full_legal_address(company)
                if key:
                    index[key].append(lei)
            self._address_index = MappingProxyType(
                {k: tuple(v) for k, v in sorted(index.items())}
            )
        return self._address_index

    def __len__(self) -> int:
        return len(self._companies)

    def __contains__(self, lei: object) -> bool:
        return lei in self._companies

    def get(self, lei: str) -> Company | None:
        return self._companies.get(lei)

    def require(self, lei: str) -> Company:
        try:
            return self._companies[lei]
        except KeyError:
            raise UnknownEntityError(lei) from None

    def parents(self, lei: str, kind: EdgeKind = EdgeKind.DIRECT) -> tuple[str, ...]:
        return self._parents[kind].get(lei, ())

    def children(self, lei: str, kind: EdgeKind = EdgeKind.DIRECT) -> tuple[str, ...]:
        return self._children[kind].get(lei, ())

    def parent_map(self, kind: EdgeKind) -> Mapping[str, tuple[str, ...]]:
        """child -> parents for every company having at least one parent."""
        return self._parents[kind]

    def child_map(self, kind: EdgeKind) -> Mapping[str, tuple[str, ...]]:
        return self._children[kind]

    def edge_count(self, kind: EdgeKind) -> int:
        return self._edge_count[kind]

    def edges(self, kind: EdgeKind | None = None) -> Iterator[RelationshipEdge]:
        """All edges in (kind, child, parent) order."""
        kinds = list(EdgeKind) if kind is None else [kind]
        for k in kinds:
            for child, parents in self._parents[k].items():
                for parent in parents:
                    yield RelationshipEdge(child, parent, k)

    def has_edge(self, child: str, parent: str, kind: EdgeKind) -> bool:
        return parent in self._parents[kind].get(child, ())

    def tax_rate(self, country: str) -> float | None:
        ind = self._indicators.get(country)
        return None if ind is None else ind.corporate_tax_rate

    def stub_count(self) -> int:
        return sum(1 for c in self._companies.values() if c.stub)

    def with_city_links(self, links: Mapping[str, tuple[str, str]]) -> GraphStore:
        """Return a copy whose companies carry (legal, hq) city links."""
        companies = {}
        for lei, company in self._companies.items():
            legal, hq = links.get(lei, ("", ""))
            if (legal, hq) != (company.legal_city_link, company.hq_city_link):
                company = replace(company, legal_city_link=legal, hq_city_link=hq)
            companies[lei] = company
        return GraphStore(companies, self.edges(), self._indicators, self._legal_forms)


def get_company(store: GraphStore, lei: str) -> Company | None:
    return store.get(lei)

