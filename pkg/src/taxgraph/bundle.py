"""Graph bundles (a directory of normalized CSVs) and run manifests.

A bundle holds ``entities.csv``, ``relationships.csv``, ``indicators.csv``,
``legalforms.csv``, an optional ``links.csv`` and ``manifest.json``.  Rows
are sorted, stubs are not written (they are rebuilt from dangling edges),
so the same graph always serializes to the same bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from . import __version__
from .ingest import (
    IngestError,
    build_graph,
    parse_entities,
    parse_indicators,
    parse_legal_forms,
    parse_relationships,
    write_entities,
    write_indicators,
    write_legal_forms,
    write_relationships,
)
from .model import GraphStore

MANIFEST = "manifest.json"
ENTITIES = "entities.csv"
RELATIONSHIPS = "relationships.csv"
INDICATORS = "indicators.csv"
LEGAL_FORMS = "legalforms.csv"
LINKS = "links.csv"
LINK_HEADER = ("lei", "legalCityLink", "hqCityLink")


class BundleError(Exception):
    pass


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class FileDigest:
    path: str
    sha256: str

    @classmethod
    def of(cls, path: str | Path, name: str | None = None) -> FileDigest:
        return cls(name if name is not None else str(path), sha256_file(path))


@dataclass
class RunManifest:
    """What a run read, how it was invoked and what it wrote.

    Output paths are relative to the manifest's directory; digests are
    checked again by :meth:`verify`.
    """

    command: str
    parameters: dict = field(default_factory=dict)
    tool_version: str = __version__
    inputs: list[FileDigest] = field(default_factory=list)
    outputs: list[FileDigest] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        raw = json.loads(text)
        return cls(
            command=raw["command"],
            parameters=raw.get("parameters", {}),
            tool_version=raw.get("tool_version", ""),
            inputs=[FileDigest(**d) for d in raw.get("inputs", [])],
            outputs=[FileDigest(**d) for d in raw.get("outputs", [])],
        )

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> RunManifest:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def verify(self, base: str | Path) -> list[str]:
        """Outputs whose current digest differs from the recorded one."""
        problems = []
        for out in self.outputs:
            target = Path(base) / out.path
            if not target.is_file():
                problems.append(f"{out.path}: missing")
            elif sha256_file(target) != out.sha256:
                problems.append(f"{out.path}: digest mismatch")
        return problems


def write_output_manifest(
    out_path: str | Path,
    command: str,
    parameters: Mapping,
    inputs: Iterable[str | Path] = (),
) -> Path:
    """Write ``<out>.manifest.json`` describing a single-file output."""
    out_path = Path(out_path)
    manifest = RunManifest(
        command=command,
        parameters=dict(parameters),
        inputs=[FileDigest.of(p) for p in inputs],
        outputs=[FileDigest.of(out_path, out_path.name)],
    )
    target = out_path.with_name(out_path.name + ".manifest.json")
    manifest.write(target)
    return target


def _open_w(path: Path):
    return open(path, "w", newline="", encoding="utf-8")


def _open_r(path: Path):
    return open(path, newline="", encoding="utf-8")


def write_links(links: Mapping[str, tuple[str, str]], path: Path) -> None:
    with _open_w(path) as fp:
        writer = csv.writer(fp)
        writer.writerow(LINK_HEADER)
        for lei in sorted(links):
            legal, hq = links[lei]
            writer.writerow((lei, legal, hq))


def read_links(path: Path) -> dict[str, tuple[str, str]]:
    with _open_r(path) as fp:
        reader = csv.reader(fp)
        if next(reader, None) != list(LINK_HEADER):
            raise BundleError(f"{path}: bad header")
        return {row[0]: (row[1], row[2]) for row in reader if len(row) == 3}


def current_links(store: GraphStore) -> dict[str, tuple[str, str]]:
    return {
        lei: (c.legal_city_link, c.hq_city_link)
        for lei, c in store.companies.items()
        if c.legal_city_link or c.hq_city_link
    }


def save_bundle(
    store: GraphStore,
    directory: str | Path,
    command: str,
    parameters: Mapping | None = None,
    inputs: Iterable[str | Path] = (),
) -> RunManifest:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with _open_w(directory / ENTITIES) as fp:
        write_entities((c for c in store.companies.values() if not c.stub), fp)
    with _open_w(directory / RELATIONSHIPS) as fp:
        write_relationships(store.edges(), fp)
    with _open_w(directory / INDICATORS) as fp:
        write_indicators(store.indicators.values(), fp)
    with _open_w(directory / LEGAL_FORMS) as fp:
        write_legal_forms(store.legal_forms, fp)
    names = [ENTITIES, RELATIONSHIPS, INDICATORS, LEGAL_FORMS]
    links = current_links(store)
    if links:
        write_links(links, directory / LINKS)
        names.append(LINKS)
    elif (directory / LINKS).exists():
        (directory / LINKS).unlink()

    manifest = RunManifest(
        command=command,
        parameters=dict(parameters or {}),
        inputs=[FileDigest.of(p) for p in inputs],
        outputs=[FileDigest.of(directory / n, n) for n in names],
    )
    manifest.write(directory / MANIFEST)
    return manifest


def bundle_files(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    return [directory / n for n in (ENTITIES, RELATIONSHIPS, INDICATORS, LEGAL_FORMS, LINKS)
            if (directory / n).exists()]


def load_bundle(directory: str | Path, verify: bool = True) -> GraphStore:
    """Rebuild the store from a bundle, checking digests against the manifest."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    if not manifest_path.is_file():
        raise BundleError(f"{directory}: not a graph bundle (no {MANIFEST})")
    if verify:
        problems = RunManifest.read(manifest_path).verify(directory)
        if problems:
            raise BundleError(f"{directory}: manifest check failed: {'; '.join(problems)}")
    try:
        with _open_r(directory / ENTITIES) as fp:
            entities = parse_entities(fp)
        with _open_r(directory / RELATIONSHIPS) as fp:
            rels = parse_relationships(fp)
        with _open_r(directory / INDICATORS) as fp:
            indicators, _ = parse_indicators(fp)
        with _open_r(directory / LEGAL_FORMS) as fp:
            legal_forms, _ = parse_legal_forms(fp)
    except (OSError, IngestError) as exc:
        raise BundleError(f"{directory}: {exc}") from exc
    store, _ = build_graph(entities.records, rels.records, indicators, legal_forms)
    if (directory / LINKS).exists():
        store = store.with_city_links(read_links(directory / LINKS))
    return store
