"""Query-string filter grammar.

One filter is ``path op value``; several are joined with commas. The
triple maps one-to-one onto the query module's FilterExpr, so anything
expressible here behaves exactly like the same filter given to a
QueryPlan. Values are typed by their literal syntax: JSON literals
parse as JSON (``5``, ``0.5``, ``"relax"``, ``["a","b"]``, ``true``,
``null``), anything else is taken as a bare string, which keeps common
cases like ``kind==data.int`` unquoted.

Two failure modes map onto different HTTP statuses, so they get
distinct exception types: a clause that does not scan (or an operand of
the wrong shape) is a syntax problem, while a well-formed clause whose
path starts outside the node schema is a semantic one.
"""

from __future__ import annotations

import json
import re

from provflow.exceptions import QueryError
from provflow.query.plan import FilterExpr


class FilterSyntaxError(ValueError):
    """The filter string does not scan as ``path op value`` triples."""


class UnknownFilterPath(ValueError):
    """Syntactically fine, but the path root is not a node property."""


# top-level properties a filter path may start with
KNOWN_ROOTS = frozenset(
    {
        "id",
        "uuid",
        "kind",
        "label",
        "description",
        "ctime",
        "mtime",
        "computer",
        "hash",
        "attributes",
        "extras",
    }
)

_PATH = r"[A-Za-z0-9_][A-Za-z0-9_.]*"
# two-char operators listed first so the regex does not stop at "<"
_SYMBOLIC = re.compile(rf"^\s*({_PATH})\s*(==|!=|<=|>=|<|>)\s*(.*?)\s*$", re.DOTALL)
_WORDED = re.compile(
    rf"^\s*({_PATH})\s+(in|like|has_key|of_type)\s+(.*?)\s*$", re.DOTALL
)


def _split_clauses(text: str) -> list[str]:
    """Split on commas that sit outside JSON strings and brackets."""
    clauses = []
    buf = []
    depth = 0
    in_str = False
    escaped = False
    for ch in text:
        if in_str:
            buf.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
            buf.append(ch)
        elif ch in "[{":
            depth += 1
            buf.append(ch)
        elif ch in "]}":
            depth -= 1
            buf.append(ch)
        elif ch == "," and depth == 0:
            clauses.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    clauses.append("".join(buf))
    return clauses


def _parse_value(raw: str, op: str):
    if op == "of_type":
        # type names are bare words, never quoted literals
        return raw
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def parse_filters(text: str) -> list[FilterExpr]:
    """Compile a query-string filter expression into FilterExpr objects.

    Raises FilterSyntaxError for clauses that do not scan and
    UnknownFilterPath for paths rooted outside the node schema.
    """
    if not text or not text.strip():
        return []
    out = []
    for clause in _split_clauses(text):
        if not clause.strip():
            continue
        m = _SYMBOLIC.match(clause) or _WORDED.match(clause)
        if m is None:
            raise FilterSyntaxError(f"cannot parse filter clause {clause.strip()!r}")
        path, op, raw = m.group(1), m.group(2), m.group(3)
        if not raw:
            raise FilterSyntaxError(f"filter clause {clause.strip()!r} has no value")
        root = path.split(".", 1)[0]
        if root not in KNOWN_ROOTS:
            raise UnknownFilterPath(
                f"unknown filter path {path!r} (expected one of "
                f"{', '.join(sorted(KNOWN_ROOTS))})"
            )
        try:
            out.append(FilterExpr(path, op, _parse_value(raw, op)))
        except QueryError as exc:
            raise FilterSyntaxError(str(exc)) from exc
    return out
