"""Fetch city areas from a remote SPARQL endpoint.

The local graph drives the join: linked city identifiers are sent in
batches, areas come back as SPARQL results JSON and are normalised to
square kilometres.  Network access goes through :class:`Transport` so the
whole module runs offline against canned responses in tests.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Protocol, Sequence

import requests

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://query.wikidata.org/sparql"
ENTITY_PREFIX = "http://www.wikidata.org/entity/"
AREA_PROPERTY = "P2046"

# quantity unit entity -> factor to square kilometres
UNIT_TO_KM2 = {
    "Q712226": 1.0,  # square kilometre
    "Q25343": 1e-6,  # square metre
    "Q35852": 1e-2,  # hectare
    "Q232291": 2.589988110336,  # square mile
    "Q81292": 4.0468564224e-3,  # acre
}

_QID_RE = re.compile(r"Q[1-9][0-9]*")
_XSD = "http://www.w3.org/2001/XMLSchema#"
_INT_TYPES = {_XSD + t for t in (
    "integer", "int", "long", "short", "byte", "nonNegativeInteger",
    "positiveInteger", "negativeInteger", "nonPositiveInteger",
    "unsignedLong", "unsignedInt", "unsignedShort", "unsignedByte",
)}
_FLOAT_TYPES = {_XSD + t for t in ("decimal", "double", "float")}


class SparqlResultsError(ValueError):
    def __init__(self, message: str, path: str):
        super().__init__(f"{message} at {path}")
        self.path = path


class TransportError(Exception):
    """The request could not be completed (connection, timeout, ...)."""


@dataclass(frozen=True)
class EndpointConfig:
    url: str = DEFAULT_ENDPOINT
    timeout: float = 60.0
    max_ids_per_request: int = 50
    retries: int = 2
    parallelism: int = 2
    backoff: float = 1.0

    def __post_init__(self):
        if self.max_ids_per_request < 1:
            raise ValueError("max_ids_per_request must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    @classmethod
    def from_env(cls, **overrides) -> EndpointConfig:
        """Defaults, then ``TAXGRAPH_ENDPOINT``/``TAXGRAPH_TIMEOUT``, then overrides."""
        values: dict[str, Any] = {}
        if os.environ.get("TAXGRAPH_ENDPOINT"):
            values["url"] = os.environ["TAXGRAPH_ENDPOINT"]
        if os.environ.get("TAXGRAPH_TIMEOUT"):
            values["timeout"] = float(os.environ["TAXGRAPH_TIMEOUT"])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class Transport(Protocol):
    def post(self, url: str, query: str, timeout: float) -> tuple[int, str]:
        """Send *query*; return (HTTP status, response body)."""


class HttpTransport:
    """SPARQL 1.1 protocol: query in the POST body."""

    def __init__(self, user_agent: str = "taxgraph/0.1"):
        self._session = requests.Session()
        self._session.headers.update({
            "Content-Type": "application/sparql-query",
            "Accept": "application/sparql-results+json",
            "User-Agent": user_agent,
        })

    def post(self, url: str, query: str, timeout: float) -> tuple[int, str]:
        try:
            resp = self._session.post(url, data=query.encode("utf-8"), timeout=timeout)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return resp.status_code, resp.text


class CannedTransport:
    """Answers every request with the same stored results document."""

    def __init__(self, body: str, status: int = 200):
        self.body = body
        self.status = status

    @classmethod
    def from_file(cls, path: str | Path) -> CannedTransport:
        return cls(Path(path).read_text(encoding="utf-8"))

    def post(self, url: str, query: str, timeout: float) -> tuple[int, str]:
        return self.status, self.body


def build_area_query(ids: Sequence[str]) -> str:
    """SELECT the area (with its unit) of each identifier via a VALUES block."""
    if not ids:
        raise ValueError("at least one identifier is required")
    bad = [i for i in ids if not _QID_RE.fullmatch(i)]
    if bad:
        raise ValueError(f"not an entity identifier: {bad[0]!r}")
    values = " ".join(f"wd:{i}" for i in ids)
    return (
        "PREFIX wd: <http://www.wikidata.org/entity/>\n"
        "PREFIX p: <http://www.wikidata.org/prop/>\n"
        "PREFIX psv: <http://www.wikidata.org/prop/statement/value/>\n"
        "PREFIX wikibase: <http://wikiba.se/ontology#>\n"
        "SELECT ?item ?area ?unit WHERE {\n"
        f"  VALUES ?item {{ {values} }}\n"
        f"  ?item p:{AREA_PROPERTY} ?statement .\n"
        f"  ?statement psv:{AREA_PROPERTY} ?value .\n"
        "  ?value wikibase:quantityAmount ?area .\n"
        "  OPTIONAL { ?value wikibase:quantityUnit ?unit . }\n"
        "}\n"
    )


def _term(term: Any, path: str) -> Any:
    if not isinstance(term, dict):
        raise SparqlResultsError("binding value is not an object", path)
    kind = term.get("type")
    if kind not in ("uri", "literal", "typed-literal", "bnode"):
        raise SparqlResultsError(f"unknown term type {kind!r}", path + ".type")
    value = term.get("value")
    if not isinstance(value, str):
        raise SparqlResultsError("missing string value", path + ".value")
    datatype = term.get("datatype")
    if datatype in _INT_TYPES:
        try:
            return int(value)
        except ValueError:
            raise SparqlResultsError(f"bad integer {value!r}", path + ".value") from None
    if datatype in _FLOAT_TYPES:
        try:
            return float(Decimal(value)) if datatype.endswith("decimal") else float(value)
        except (ValueError, InvalidOperation):
            raise SparqlResultsError(f"bad number {value!r}", path + ".value") from None
    return value


def parse_sparql_results(text: str) -> list[dict[str, Any]]:
    """Rows of variable -> value from a SPARQL results JSON document.

    Numeric typed literals become ``int``/``float``; everything else stays a
    string.  Structural problems raise :class:`SparqlResultsError` naming the
    JSON path.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SparqlResultsError(f"invalid JSON ({exc.msg})", "$") from None
    if not isinstance(doc, dict):
        raise SparqlResultsError("document is not an object", "$")
    head = doc.get("head")
    if not isinstance(head, dict):
        raise SparqlResultsError("missing object", "$.head")
    variables = head.get("vars", [])
    if not isinstance(variables, list):
        raise SparqlResultsError("not a list", "$.head.vars")
    results = doc.get("results")
    if not isinstance(results, dict):
        raise SparqlResultsError("missing object", "$.results")
    bindings = results.get("bindings")
    if not isinstance(bindings, list):
        raise SparqlResultsError("missing list", "$.results.bindings")
    rows = []
    for i, binding in enumerate(bindings):
        path = f"$.results.bindings[{i}]"
        if not isinstance(binding, dict):
            raise SparqlResultsError("binding is not an object", path)
        rows.append({k: _term(v, f"{path}.{k}") for k, v in binding.items()})
    return rows


@dataclass
class FetchReport:
    requests: int = 0
    batches: int = 0
    failed_batches: int = 0
    errors: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def all_failed(self) -> bool:
        return self.batches > 0 and self.failed_batches == self.batches


def _entity_id(value: Any) -> str | None:
    if isinstance(value, str):
        qid = value[len(ENTITY_PREFIX):] if value.startswith(ENTITY_PREFIX) else value
        if _QID_RE.fullmatch(qid):
            return qid
    return None


def _to_km2(area: float, unit: Any) -> tuple[float, str | None]:
    if unit is None:
        return area, "no unit, assumed km2"
    qid = _entity_id(unit)
    if qid is None or qid not in UNIT_TO_KM2:
        return area, f"unknown unit {unit}"
    return area * UNIT_TO_KM2[qid], None


def _run_batch(transport: Transport, config: EndpointConfig, batch: list[str]):
    """Returns (attempts, rows or None, error message or None)."""
    query = build_area_query(batch)
    attempts = 0
    last = ""
    for attempt in range(config.retries + 1):
        if attempt and config.backoff:
            time.sleep(config.backoff * 2 ** (attempt - 1))
        attempts += 1
        try:
            status, body = transport.post(config.url, query, config.timeout)
        except TransportError as exc:
            last = f"transport failure: {exc}"
            continue
        if status != 200:
            last = f"HTTP {status}"
            continue
        try:
            return attempts, parse_sparql_results(body), None
        except SparqlResultsError as exc:
            return attempts, None, f"malformed results: {exc}"
    return attempts, None, last


def fetch_areas(
    config: EndpointConfig,
    ids: Sequence[str],
    transport: Transport | None = None,
) -> tuple[dict[str, float], FetchReport]:
    """Areas in km2 for *ids*, fetched in batches of ``max_ids_per_request``.

    Identifiers without an area are simply absent.  When an identifier has
    several area values the largest is kept and a flag recorded.  A batch that
    still fails after ``retries`` extra attempts is reported and the other
    batches proceed.
    """
    transport = transport or HttpTransport()
    wanted = list(dict.fromkeys(ids))
    size = config.max_ids_per_request
    batches = [wanted[i:i + size] for i in range(0, len(wanted), size)]
    report = FetchReport(batches=len(batches))

    if config.parallelism > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            outcomes = list(pool.map(lambda b: _run_batch(transport, config, b), batches))
    else:
        outcomes = [_run_batch(transport, config, b) for b in batches]

    values: dict[str, list[float]] = {}
    for index, (batch, (attempts, rows, error)) in enumerate(zip(batches, outcomes)):
        report.requests += attempts
        if rows is None:
            report.failed_batches += 1
            report.errors.append(f"batch {index}: {error}")
            log.warning("area batch %d failed: %s", index, error)
            continue
        allowed = set(batch)
        for row in rows:
            qid = _entity_id(row.get("item"))
            area = row.get("area")
            if qid is None or qid not in allowed:
                report.flags.append(f"unrequested identifier {row.get('item')!r} ignored")
                continue
            if not isinstance(area, (int, float)):
                report.flags.append(f"{qid}: non-numeric area {area!r} ignored")
                continue
            km2, note = _to_km2(float(area), row.get("unit"))
            if note:
                report.flags.append(f"{qid}: {note}")
            if km2 <= 0:
                report.flags.append(f"{qid}: non-positive area {km2} ignored")
                continue
            values.setdefault(qid, []).append(km2)

    areas = {}
    for qid in sorted(values):
        found = values[qid]
        if len(set(found)) > 1:
            report.flags.append(f"{qid}: {len(found)} area values, kept largest")
        areas[qid] = max(found)
    return areas, report
