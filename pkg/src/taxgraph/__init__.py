"""Corporate ownership graph: ingestion, pattern detection and anomaly statistics."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Company,
    CountryIndicators,
    EdgeKind,
    GraphStore,
    RelationshipEdge,
    UnknownEntityError,
    get_company,
    validate_lei,
)

__all__ = [
    "Company",
    "CountryIndicators",
    "EdgeKind",
    "GraphStore",
    "RelationshipEdge",
    "UnknownEntityError",
    "__version__",
    "get_company",
    "validate_lei",
]
