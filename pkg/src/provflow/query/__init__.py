"""Graph pattern querying and ancestor/descendant traversal."""

from provflow.query.builder import QueryBuilder
from provflow.query.plan import FilterExpr, Pattern, QueryPlan, Relation
from provflow.query.traverse import ancestors_of, descendants_of

__all__ = [
    "FilterExpr",
    "Pattern",
    "QueryBuilder",
    "QueryPlan",
    "Relation",
    "ancestors_of",
    "descendants_of",
]
