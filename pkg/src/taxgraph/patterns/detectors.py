"""Built-in detectors for two well-known tax planning constructs.

Both are thin wrappers that render pattern text and run it through the
generic matcher, so anything a detector finds can be reproduced with a
hand-written pattern file.
"""

from __future__ import annotations

from typing import Iterable

from ..model import GraphStore
from .dsl import PatternAST, parse_pattern
from .matcher import DEFAULT_MAX_PATH_LEN, Binding, match_pattern

DEFAULT_HAVENS = ("BM", "KY")


def double_irish_text(country_a: str = "IE", country_b: str = "NL", country_c: str | None = "IE") -> str:
    lines = [
        "# a is consolidated (via any chain) by b, which is consolidated by c",
        f"a.hq={country_a};",
        f"b.hq={country_b};",
    ]
    if country_c:
        lines.append(f"c.hq={country_c};")
    lines += ["a -[direct+]-> b;", "b -[direct+]-> c;"]
    return "\n".join(lines) + "\n"


def double_irish_pattern(country_a: str = "IE", country_b: str = "NL", country_c: str | None = "IE") -> PatternAST:
    return parse_pattern(double_irish_text(country_a, country_b, country_c))


def detect_double_irish(
    store: GraphStore,
    country_a: str = "IE",
    country_b: str = "NL",
    country_c: str | None = "IE",
    max_path_len: int = DEFAULT_MAX_PATH_LEN,
    max_results: int | None = None,
) -> list[Binding]:
    """Double Irish with a Dutch conduit.

    Headquarters in *country_a* -> (chain) -> *country_b* -> (chain) ->
    *country_c*.  Passing ``country_c=None`` gives the relaxed variant that
    leaves the top company's country open.
    """
    ast = double_irish_pattern(country_a, country_b, country_c)
    return match_pattern(store, ast, max_path_len, max_results)


def duck_rabbit_text(
    haven: str,
    child_country: str = "NL",
    child_legal_form: str = "54M6",
    child_country_field: str = "legal",
) -> str:
    if child_country_field not in ("legal", "hq"):
        raise ValueError("child_country_field must be 'legal' or 'hq'")
    return (
        f"b.hq={haven};\n"
        f"c.{child_country_field}={child_country};\n"
        f"c.form={child_legal_form};\n"
        "b -[ultimate]-> a;\n"
        "c -[direct]-> b;\n"
    )


def detect_duck_rabbit(
    store: GraphStore,
    havens: Iterable[str] = DEFAULT_HAVENS,
    child_country: str = "NL",
    child_legal_form: str = "54M6",
    child_country_field: str = "legal",
    max_results: int | None = None,
) -> list[Binding]:
    """Hybrid-entity construct: a haven-headquartered company b, ultimately
    consolidated by some a, directly consolidating a child c of the given
    country and legal form.  Both hops are single recorded edges.

    The child's country is checked on its legal address by default; use
    ``child_country_field="hq"`` to check the headquarters instead.
    """
    found: list[Binding] = []
    for haven in sorted(set(havens)):
        ast = parse_pattern(duck_rabbit_text(haven, child_country, child_legal_form, child_country_field))
        found.extend(match_pattern(store, ast))
    found.sort(key=lambda b: b.key)
    return found if max_results is None else found[:max_results]
