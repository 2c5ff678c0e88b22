"""Synthetic input generator for scale and smoke testing.

Rows are streamed straight to disk, so generating 1.5M companies needs
little memory.  Output is fully determined by the seed.
"""

from __future__ import annotations

import argparse
import csv
import random
from pathlib import Path

from .ingest import ENTITY_HEADER, INDICATOR_HEADER, LEGAL_FORM_HEADER, RELATIONSHIP_HEADER
from .model import lei_checksum

COUNTRIES = (
    "US", "GB", "DE", "FR", "NL", "IE", "LU", "CH", "IT", "ES",
    "BE", "SE", "DK", "NO", "AT", "PL", "CA", "JP", "CN", "AU",
    "KY", "BM", "VG", "LI", "JE", "GG", "MT", "CY", "SG", "HK",
)
LEGAL_FORMS = (
    ("54M6", "Besloten vennootschap"),
    ("8888", "Other"),
    ("XTIQ", "Limited company"),
    ("2HBR", "Gesellschaft mit beschraenkter Haftung"),
    ("5RDO", "Societe a responsabilite limitee"),
)
CITY_NAMES = ("Springfield", "Riverton", "Lakeside", "Hillview", "Fairport", "Oakdale", "Marston", "Easton")


def make_lei(n: int, prefix: str = "5299") -> str:
    """A well-formed LEI with valid check digits built from a counter."""
    body = f"{prefix}{n:014d}"
    check = 98 - lei_checksum(body + "00")
    return f"{body}{check:02d}"


def generate(
    out_dir: str | Path,
    companies: int = 1_500_000,
    direct_edges: int = 87_000,
    ultimate_edges: int = 93_000,
    seed: int = 0,
) -> dict[str, Path]:
    """Write entities, relationships, indicators and legal forms CSVs.

    Parents are drawn from a smaller pool than children, giving the skewed
    child counts seen in real consolidation data.  Edges always point from a
    higher index to a lower one, so the direct layer is acyclic.
    """
    rng = random.Random(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "entities": out / "entities.csv",
        "relationships": out / "relationships.csv",
        "indicators": out / "indicators.csv",
        "legal_forms": out / "legalforms.csv",
    }

    with open(paths["entities"], "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(ENTITY_HEADER)
        for i in range(companies):
            legal = rng.choice(COUNTRIES)
            hq = legal if rng.random() < 0.9 else rng.choice(COUNTRIES)
            city = CITY_NAMES[i % len(CITY_NAMES)]
            postal = f"{rng.randrange(10000, 99999)}"
            street = f"{rng.randrange(1, 500)} Main Street"
            writer.writerow((
                make_lei(i), f"Company {i} Ltd", legal, "", city, postal, street,
                hq, "", city, postal, street, LEGAL_FORMS[i % len(LEGAL_FORMS)][0],
            ))

    parents = max(1, companies // 20)
    with open(paths["relationships"], "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(RELATIONSHIP_HEADER)
        for count, kind in ((direct_edges, "IS_DIRECTLY_CONSOLIDATED_BY"),
                            (ultimate_edges, "IS_ULTIMATELY_CONSOLIDATED_BY")):
            for _ in range(count):
                child = rng.randrange(1, companies)
                parent = rng.randrange(0, min(child, parents))
                writer.writerow((make_lei(child), make_lei(parent), kind))

    with open(paths["indicators"], "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(INDICATOR_HEADER)
        for country in COUNTRIES:
            writer.writerow((
                country, rng.randrange(30_000, 300_000_000),
                rng.randrange(1_000, 20_000_000), rng.randrange(0, 35),
            ))

    with open(paths["legal_forms"], "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(LEGAL_FORM_HEADER)
        writer.writerows(LEGAL_FORMS)
    return paths


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description="Generate synthetic ownership-graph inputs.")
    parser.add_argument("out")
    parser.add_argument("--companies", type=int, default=1_500_000)
    parser.add_argument("--direct", type=int, default=87_000)
    parser.add_argument("--ultimate", type=int, default=93_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    generate(args.out, args.companies, args.direct, args.ultimate, args.seed)


if __name__ == "__main__":
    main()
