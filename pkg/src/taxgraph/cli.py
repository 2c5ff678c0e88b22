"""Command-line entry point: ``taxgraph <subcommand> ...``.

Exit codes: 0 success (possibly with warnings), 2 usage or parse error,
3 runtime or network failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import analytics, traversal
from .bundle import (
    BundleError,
    bundle_files,
    current_links,
    load_bundle,
    save_bundle,
    write_links,
    write_output_manifest,
)
from .federation import CannedTransport, EndpointConfig, fetch_areas
from .ingest import (
    IngestError,
    InputPaths,
    load_graph,
    write_entities,
    write_indicators,
    write_legal_forms,
    write_relationships,
)
from .linking import DEFAULT_THRESHOLD, link_companies, read_candidates
from .model import EdgeKind, GraphStore
from .patterns import (
    DEFAULT_HAVENS,
    DEFAULT_MAX_PATH_LEN,
    PatternError,
    detect_double_irish,
    detect_duck_rabbit,
    match_pattern,
    parse_pattern,
)
from .patterns.detectors import double_irish_pattern, duck_rabbit_text

log = logging.getLogger("taxgraph")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Output:
    """CSV to ``--out`` (plus manifest), aligned text to stdout."""

    def __init__(self, args: argparse.Namespace):
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.quiet = args.quiet
        self.command = args.command

    def echo(self, text: str = "") -> None:
        if not self.quiet:
            print(text)

    def table(
        self,
        header: Sequence[str],
        rows: Iterable[Sequence],
        parameters: dict,
        inputs: Iterable[Path] = (),
    ) -> None:
        rows = [[_cell(v) for v in row] for row in rows]
        if self.out is not None:
            self.out.parent.mkdir(parents=True, exist_ok=True)
            with open(self.out, "w", newline="", encoding="utf-8") as fp:
                writer = csv.writer(fp)
                writer.writerow(header)
                writer.writerows(rows)
            write_output_manifest(self.out, self.command, parameters, inputs)
        if not self.quiet:
            print(format_table(header, rows))


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _load(args) -> GraphStore:
    try:
        return load_bundle(args.graph)
    except BundleError as exc:
        raise CliError(str(exc)) from exc


def _params(args, *names: str) -> dict:
    return {n: _cell(getattr(args, n)) for n in names if getattr(args, n, None) is not None}


# -- ingest ------------------------------------------------------------------

def cmd_ingest(args) -> int:
    paths = InputPaths(
        Path(args.entities), Path(args.relationships), Path(args.indicators),
        Path(args.legalforms) if args.legalforms else None,
    )
    try:
        store, report = load_graph(paths)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from exc
    except IngestError as exc:
        raise CliError(f"fatal parse error: {exc}") from exc
    save_bundle(store, args.out, "ingest", {}, paths.all())
    out = Output(args)
    out.echo(format_table(("Class", "Count"), [(k, str(v)) for k, v in report.table()]))
    if report.warning_count:
        print(f"warning: {report.warning_count} row(s) skipped", file=sys.stderr)
        for name, errors in report.row_errors.items():
            for err in errors[:10]:
                print(f"  {name}: {err}", file=sys.stderr)
    return EXIT_OK


# -- link-cities -------------------------------------------------------------

def cmd_link_cities(args) -> int:
    store = _load(args)
    try:
        with open(args.candidates, newline="", encoding="utf-8") as fp:
            index = read_candidates(fp)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    summary = link_companies(store, index, args.threshold)
    linked = store.with_city_links(summary.links)
    inputs = [*bundle_files(args.graph), Path(args.candidates)]
    save_bundle(linked, args.graph, "link-cities", _params(args, "threshold"), inputs)
    rows = [(status, str(n)) for status, n in summary.status_counts.items()]
    rows.append(("linked cities", str(summary.linked_cities)))
    rows.append(("linked companies", str(len(summary.links))))
    Output(args).echo(format_table(("outcome", "count"), rows))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_links(current_links(linked), out)
        write_output_manifest(out, "link-cities", _params(args, "threshold"), inputs)
    return EXIT_OK


# -- detect ------------------------------------------------------------------

def cmd_detect(args) -> int:
    if bool(args.builtin) == bool(args.pattern):
        raise CliError("give exactly one of --builtin or --pattern")
    store = _load(args)
    inputs = list(bundle_files(args.graph))
    if args.pattern:
        try:
            ast = parse_pattern(Path(args.pattern).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(str(exc)) from exc
        except PatternError as exc:
            raise CliError(f"{args.pattern}:{exc.line}:{exc.column}: {exc.message}") from exc
        inputs.append(Path(args.pattern))
        bindings = match_pattern(store, ast, args.max_path_len, args.max_results)
    elif args.builtin == "double-irish":
        country_c = None if args.relaxed else args.country_c
        ast = double_irish_pattern(args.country_a, args.country_b, country_c)
        bindings = detect_double_irish(
            store, args.country_a, args.country_b, country_c, args.max_path_len, args.max_results,
        )
    else:
        havens = [h.strip() for h in args.havens.split(",") if h.strip()]
        ast = parse_pattern(duck_rabbit_text(
            havens[0] if havens else "BM", args.child_country, args.child_form, args.child_field,
        ))
        bindings = detect_duck_rabbit(
            store, havens, args.child_country, args.child_form, args.child_field, args.max_results,
        )

    hop_columns = []
    for e in ast.edges:
        name = f"hops_{e.source}_{e.target}"
        while name in hop_columns:
            name += "_"
        hop_columns.append(name)
    header = [*ast.variables, *hop_columns]
    rows = [[*b.key, *(len(w) - 1 for w in b.witnesses)] for b in bindings]
    params = _params(
        args, "builtin", "pattern", "relaxed", "country_a", "country_b", "country_c", "havens",
        "child_country", "child_form", "child_field", "max_path_len", "max_results",
    )
    Output(args).table(header, rows, params, inputs)
    return EXIT_OK


# -- stats -------------------------------------------------------------------

def _top(rows: list, args) -> list:
    return rows if args.top is None else rows[: args.top]


def _ranked(fn, unit_header):
    def run(store, args):
        rows = fn(store, args.attribution)
        return (
            ("country", "companies", unit_header, "ratio"),
            [(r.country, r.numerator, r.denominator, r.ratio) for r in _top(rows, args)],
        )
    return run


def _stat_address(store, args):
    return ("address", "companies"), analytics.address_concentration(store, args.top)


def _stat_divergence(store, args):
    div = analytics.hq_legal_divergence(store)
    log.info("divergent companies: %d of %d", div.count, div.considered)
    return (
        ("hqCountry", "legalCountry", "companies"),
        [(f.from_country, f.to_country, f.count) for f in _top(div.flows, args)],
    )


def _stat_subsidiary_flows(store, args):
    flows = analytics.subsidiary_flows(store)
    return (
        ("parentCountry", "childCountry", "edges"),
        [(f.from_country, f.to_country, f.count) for f in _top(flows, args)],
    )


def _stat_delta_hq_legal(store, args):
    d = analytics.tax_delta_hq_legal(store, args.divergent_only)
    return ("meanDeltaPp", "n", "excluded"), [(d.mean, d.n, d.excluded)]


def _stat_delta_parent_child(store, args):
    d = analytics.tax_delta_parent_child(store, args.multinational_only)
    return ("meanDeltaPp", "n", "excluded"), [(d.mean, d.n, d.excluded)]


def _stat_region(store, args):
    if not args.country or not args.region:
        raise CliError("region-share needs --country and --region")
    try:
        r = analytics.region_share(store, args.country, args.region)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from exc
    return (
        ("country", "region", "legalShare", "hqShareAmongLegal",
         "countryTotal", "legalInRegion", "hqInRegion"),
        [(args.country, args.region, r.legal_share, r.hq_share_among_legal,
          r.country_total, r.legal_in_region, r.hq_in_region)],
    )


def _stat_multinational(store, args):
    try:
        share = analytics.multinational_edge_share(store)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from exc
    return ("share",), [(share,)]


def read_areas(path: str | Path) -> dict[str, float]:
    areas = {}
    with open(path, newline="", encoding="utf-8") as fp:
        reader = csv.reader(fp)
        if next(reader, None) != ["externalId", "areaSqKm"]:
            raise CliError(f"{path}: expected header externalId,areaSqKm")
        for row in reader:
            if len(row) == 2 and row[1].strip():
                areas[row[0].strip()] = float(row[1])
    return areas


def _stat_density(store, args):
    if not args.areas:
        raise CliError("density needs --areas")
    try:
        areas = read_areas(args.areas)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    result = analytics.city_density(store, areas, args.min)
    rows = []
    for role, ranking in (("hq", result.hq), ("legal", result.legal)):
        for r in _top(ranking, args):
            rows.append((role, r.city, r.name, r.count, r.area, r.density))
    if result.skipped_without_area:
        log.warning("%d qualifying cities have no area", result.skipped_without_area)
    return ("role", "city", "name", "companies", "areaSqKm", "density"), rows


def _stat_child_stats(store, args):
    s = traversal.child_stats(store)
    rows = [
        ("avgDirect", "", s.avg_direct),
        ("avgUltimate", "", s.avg_ultimate),
        ("avgUltimateClosure", "", s.avg_ultimate_closure),
    ]
    rows += [("histogramDirect", k, v) for k, v in s.histogram_direct.items()]
    rows += [("histogramUltimate", k, v) for k, v in s.histogram_ultimate.items()]
    return ("statistic", "key", "value"), rows


def _stat_longest_chain(store, args):
    path = traversal.longest_chain(store, EdgeKind(args.kind))
    return ("position", "lei"), list(enumerate(path))


def _stat_chain_histogram(store, args):
    hist = traversal.chain_histogram(store, EdgeKind(args.kind))
    return ("hops", "chains"), list(hist.items())


def _stat_ultimate(store, args):
    checks = traversal.ultimate_discrepancies(store)
    return (
        ("childLei", "ultimateParentLei", "reachableViaDirect"),
        [(c.child, c.ultimate_parent, c.reachable_via_direct) for c in checks],
    )


METRICS: dict[str, Callable] = {
    "per-capita": _ranked(analytics.companies_per_capita, "population"),
    "per-gdp": _ranked(analytics.companies_per_gdp, "gdpMillionUsd"),
    "address-concentration": _stat_address,
    "hq-legal-divergence": _stat_divergence,
    "subsidiary-flows": _stat_subsidiary_flows,
    "tax-delta-hq-legal": _stat_delta_hq_legal,
    "tax-delta-parent-child": _stat_delta_parent_child,
    "region-share": _stat_region,
    "multinational-share": _stat_multinational,
    "density": _stat_density,
    "child-stats": _stat_child_stats,
    "longest-chain": _stat_longest_chain,
    "chain-histogram": _stat_chain_histogram,
    "ultimate-discrepancies": _stat_ultimate,
}


def cmd_stats(args) -> int:
    store = _load(args)
    header, rows = METRICS[args.metric](store, args)
    inputs = list(bundle_files(args.graph))
    if args.areas:
        inputs.append(Path(args.areas))
    params = _params(
        args, "metric", "top", "attribution", "divergent_only", "multinational_only",
        "country", "region", "min", "kind",
    )
    Output(args).table(header, rows, params, inputs)
    return EXIT_OK


# -- fetch-areas -------------------------------------------------------------

def cmd_fetch_areas(args) -> int:
    store = _load(args)
    ids = sorted({
        link
        for c in store.companies.values()
        for link in (c.legal_city_link, c.hq_city_link)
        if link
    })
    try:
        config = EndpointConfig.from_env(
            url=args.endpoint, timeout=args.timeout, max_ids_per_request=args.batch_size,
            retries=args.retries, parallelism=args.parallelism, backoff=args.backoff,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    transport = CannedTransport.from_file(args.offline) if args.offline else None
    inputs = list(bundle_files(args.graph))
    if args.offline:
        inputs.append(Path(args.offline))
    params = {"endpoint": config.url, "batch_size": str(config.max_ids_per_request),
              "retries": str(config.retries), "offline": _cell(args.offline)}
    out = Output(args)

    if not ids:
        print("warning: no linked cities in the graph", file=sys.stderr)
        out.table(("externalId", "areaSqKm"), [], params, inputs)
        return EXIT_OK
    try:
        areas, report = fetch_areas(config, ids, transport)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    for flag in report.flags:
        log.warning("%s", flag)
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    if report.all_failed:
        return EXIT_RUNTIME
    out.table(("externalId", "areaSqKm"), sorted(areas.items()), params, inputs)
    return EXIT_OK


# -- export ------------------------------------------------------------------

def cmd_export(args) -> int:
    store = _load(args)
    target = Path(args.out)
    target.mkdir(parents=True, exist_ok=True)
    companies = [c for c in store.companies.values() if args.include_stubs or not c.stub]
    written = []

    def emit(name, writer_fn, payload):
        path = target / name
        with open(path, "w", newline="", encoding="utf-8") as fp:
            writer_fn(payload, fp)
        written.append(path)

    emit("entities.csv", write_entities, companies)
    emit("relationships.csv", write_relationships, list(store.edges()))
    emit("indicators.csv", write_indicators, list(store.indicators.values()))
    emit("legalforms.csv", write_legal_forms, store.legal_forms)
    links = current_links(store)
    if links:
        write_links(links, target / "links.csv")
        written.append(target / "links.csv")
    for path in written:
        write_output_manifest(path, "export", _params(args, "include_stubs"), bundle_files(args.graph))
    Output(args).echo(f"exported {len(companies)} companies to {target}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress stdout tables")

    parser = argparse.ArgumentParser(prog="taxgraph", description="Corporate ownership graph analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse input CSVs into a graph bundle")
    p.add_argument("--entities", required=True)
    p.add_argument("--relationships", required=True)
    p.add_argument("--indicators", required=True)
    p.add_argument("--legalforms")
    p.add_argument("--out", required=True, help="bundle directory to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("link-cities", parents=[common], help="link cities to external ids")
    p.add_argument("--graph", required=True)
    p.add_argument("--candidates", required=True, help="citycandidates.csv")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", help="also write the links table here")
    p.set_defaults(func=cmd_link_cities)

    p = sub.add_parser("detect", parents=[common], help="run a pattern or built-in detector")
    p.add_argument("--graph", required=True)
    p.add_argument("--builtin", choices=("double-irish", "duck-rabbit"))
    p.add_argument("--pattern", help="pattern DSL file")
    p.add_argument("--relaxed", action="store_true", help="double-irish: drop the top company's country")
    p.add_argument("--country-a", default="IE")
    p.add_argument("--country-b", default="NL")
    p.add_argument("--country-c", default="IE")
    p.add_argument("--havens", default=",".join(DEFAULT_HAVENS))
    p.add_argument("--child-country", default="NL")
    p.add_argument("--child-form", default="54M6")
    p.add_argument("--child-field", choices=("legal", "hq"), default="legal")
    p.add_argument("--max-path-len", type=int, default=DEFAULT_MAX_PATH_LEN)
    p.add_argument("--max-results", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("stats", parents=[common], help="compute one analytics metric")
    p.add_argument("--graph", required=True)
    p.add_argument("metric", choices=sorted(METRICS))
    p.add_argument("--top", type=int)
    p.add_argument("--attribution", choices=("legal", "hq"), default="legal")
    p.add_argument("--divergent-only", action="store_true")
    p.add_argument("--multinational-only", action="store_true")
    p.add_argument("--country")
    p.add_argument("--region")
    p.add_argument("--areas", help="externalId,areaSqKm CSV for density")
    p.add_argument("--min", type=int, default=1000, help="density: minimum companies per city")
    p.add_argument("--kind", choices=[k.value for k in EdgeKind], default="direct")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fetch-areas", parents=[common], help="fetch city areas from an endpoint")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint")
    p.add_argument("--timeout", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--retries", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--backoff", type=float)
    p.add_argument("--offline", help="canned SPARQL results JSON used instead of the network")
    p.set_defaults(func=cmd_fetch_areas)

    p = sub.add_parser("export", parents=[common], help="write the bundle's tables elsewhere")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--include-stubs", action="store_true")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
