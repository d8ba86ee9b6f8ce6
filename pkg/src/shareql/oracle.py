"""Cleartext reference semantics: the ideal query execution every
share-based result is diffed against."""

from __future__ import annotations

from .owner import Relation, append_rid
from .storage import RID_NAME


def _with_rid(relation: Relation) -> Relation:
    if RID_NAME in relation.attributes:
        return relation
    return append_rid(relation)


def count(relation: Relation, column: str, value: str) -> int:
    j = relation.attributes.index(column)
    return sum(1 for row in relation.rows if row[j] == value)


def select(relation: Relation, column: str, value: str) -> list[tuple[str, ...]]:
    """Exact-match selection; rows come back with their RID appended."""
    rel = _with_rid(relation)
    j = rel.attributes.index(column)
    return [row for row in rel.rows if row[j] == value]


def equijoin(parent: Relation, child: Relation, on: str) -> list[tuple[str, ...]]:
    """Equality join; output is parent columns then child columns minus the
    join column, ordered by (parent row, child row)."""
    pj = parent.attributes.index(on)
    cj = child.attributes.index(on)
    out = []
    for crow in child.rows:
        for prow in parent.rows:
            if prow[pj] == crow[cj]:
                out.append(tuple(prow) + tuple(v for k, v in enumerate(crow)
                                               if k != cj))
    return out


def range_count(relation: Relation, column: str, low: int, high: int) -> int:
    j = relation.attributes.index(column)
    return sum(1 for row in relation.rows if low <= int(row[j]) <= high)


def range_select(relation: Relation, column: str, low: int,
                 high: int) -> list[tuple[str, ...]]:
    rel = _with_rid(relation)
    j = rel.attributes.index(column)
    return [row for row in rel.rows if low <= int(row[j]) <= high]
