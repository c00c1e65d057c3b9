"""HTTP service over a profile: browse the graph, steer the engine."""

from provflow.rest.app import DEFAULT_PORT, create_app, serve
from provflow.rest.filters import FilterSyntaxError, UnknownFilterPath, parse_filters

__all__ = [
    "DEFAULT_PORT",
    "FilterSyntaxError",
    "UnknownFilterPath",
    "create_app",
    "parse_filters",
    "serve",
]
