"""The trusted data owner: ingests a cleartext relation, appends the RID
attribute, secret-shares every encoded bit with a fresh polynomial, and
writes one share file per server.

After the share files are written the owner keeps no query-time role; the
query side links only against share files and the public schema.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import codec as _codec
from .codec import ColumnCodec, infer_codec
from .field import DEFAULT_PRIME
from .sss import BadParams, SharingParams, coefficient_rng, required_share_count
from .storage import (
    RID_NAME,
    RID_PERMUTED,
    RID_SEQUENTIAL,
    ColumnSchema,
    RelationSchema,
    SharedRelation,
    write_share_files,
)

__all__ = [
    "Relation",
    "RidExists",
    "append_rid",
    "build_schema",
    "share_relation",
    "share_relations",
    "write_share_files",
]


class OwnerError(ValueError):
    """Base class for ingestion errors."""


class RidExists(OwnerError):
    """Raised when a relation already carries a RID attribute."""


@dataclass(frozen=True)
class Relation:
    """A cleartext relation: attribute names plus rectangular text rows."""

    name: str
    attributes: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.rows:
            raise OwnerError(f"relation {self.name!r} has no tuples")
        if len(set(self.attributes)) != len(self.attributes):
            raise OwnerError("attribute names must be distinct")
        width = len(self.attributes)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise OwnerError(f"row {i + 1} has {len(row)} cells, want {width}")

    @staticmethod
    def build(name: str, attributes, rows) -> "Relation":
        return Relation(name, tuple(attributes),
                        tuple(tuple(str(v) for v in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.rows)

    def column(self, j: int) -> list[str]:
        return [row[j] for row in self.rows]


def append_rid(relation: Relation) -> Relation:
    """Add the row-id attribute with values 1..n as the last column."""
    if RID_NAME in relation.attributes:
        raise RidExists(f"relation {relation.name!r} already has {RID_NAME}")
    rows = tuple(row + (str(i + 1),) for i, row in enumerate(relation.rows))
    return Relation(relation.name, relation.attributes + (RID_NAME,), rows)


def _rid_width(space: int) -> int:
    # one fake row-id per padded fetch slot must fit the column, and fakes
    # live strictly above the real ids; doubling the id space guarantees room
    return len(str(2 * space))


def build_schema(relation: Relation, params: SharingParams, *,
                 column_options: dict | None = None,
                 rid_mode: str = RID_SEQUENTIAL,
                 align_values: dict | None = None) -> tuple[RelationSchema, Relation]:
    """Infer per-column codecs and fix the RID layout.

    ``column_options`` maps attribute name to any of ``hash_digits``,
    ``range`` (bool) and ``compact`` (bool).  ``align_values`` maps
    attribute name to extra values the codec must also cover, used to give
    two join columns one identical codec.  Returns the schema together
    with the relation extended by its RID column.
    """
    if RID_NAME in relation.attributes:
        raise RidExists("build_schema expects the relation before append_rid")
    column_options = column_options or {}
    align_values = align_values or {}
    for name in (*column_options, *align_values):
        if name not in relation.attributes:
            raise OwnerError(f"unknown attribute {name!r}")

    n = relation.n
    rng = coefficient_rng(params.seed, relation.name, "rid-layout")
    if rid_mode == RID_SEQUENTIAL:
        space = n
        rid_values = [str(i + 1) for i in range(n)]
        permutation = None
    elif rid_mode == RID_PERMUTED:
        # unique random ids over a doubled space plus a server-side shuffle,
        # so interpolated id vectors reveal nothing about tuple positions
        space = 2 * n
        ids = rng.permutation(space)[:n] + 1
        rid_values = [str(int(v)) for v in ids]
        permutation = tuple(int(v) for v in rng.permutation(n))
    else:
        raise OwnerError(f"unknown rid mode {rid_mode!r}")

    columns = []
    for j, name in enumerate(relation.attributes):
        opts = column_options.get(name, {})
        codec = infer_codec(
            relation.column(j),
            hash_digits=int(opts.get("hash_digits", 0)),
            range_enabled=bool(opts.get("range", False)),
            extra_values=align_values.get(name, ()),
            prime=params.prime,
            compact_allowed=bool(opts.get("compact", True)),
        )
        columns.append(ColumnSchema(name, codec))

    rid_codec = ColumnCodec(
        alphabet=_codec.Alphabet.digits10(),
        width=_rid_width(space),
        pad_mode=_codec.PAD_LEFT_ZERO,
        compact=_codec.packed_max(10, _rid_width(space)) < params.prime,
    )
    columns.append(ColumnSchema(RID_NAME, rid_codec))

    schema = RelationSchema(
        name=relation.name,
        prime=params.prime,
        degree=params.degree,
        rows=n,
        columns=tuple(columns),
        rid_mode=rid_mode,
        rid_space=space,
        permutation=permutation,
    )
    extended = Relation(relation.name, relation.attributes + (RID_NAME,),
                        tuple(row + (rid,) for row, rid in
                              zip(relation.rows, rid_values)))
    return schema, extended


def _share_block(clear: np.ndarray, params: SharingParams,
                 rng: np.random.Generator) -> np.ndarray:
    """Shamir-share a block of secrets; returns shape (servers,) + clear.shape.

    Every entry gets its own fresh polynomial, so repeated cleartext bits
    end up with unrelated share sequences.
    """
    prime = params.prime
    coeffs = rng.integers(1, prime, size=(params.degree,) + clear.shape,
                          dtype=np.int64)
    out = np.empty((params.servers,) + clear.shape, dtype=np.int64)
    for x in params.xs:
        acc = np.zeros(clear.shape, dtype=np.int64)
        for k in range(params.degree - 1, -1, -1):
            acc = (acc + coeffs[k]) * x % prime
        out[x - 1] = (acc + clear) % prime
    return out


def share_relation(relation: Relation, params: SharingParams, *,
                   column_options: dict | None = None,
                   rid_mode: str = RID_SEQUENTIAL,
                   align_values: dict | None = None,
                   workload: list[tuple[str, str]] | None = None
                   ) -> list[SharedRelation]:
    """Create the c per-server share relations for one cleartext relation.

    ``workload`` optionally declares (query_kind, attribute) pairs the
    deployment must support; the server count is validated against the
    strictest of them up front instead of failing at query time.
    """
    schema, extended = build_schema(relation, params,
                                    column_options=column_options,
                                    rid_mode=rid_mode,
                                    align_values=align_values)
    if workload:
        for kind, attr in workload:
            col = schema.columns[schema.column_index(attr)]
            length = (col.codec.range_bits if kind.startswith("range")
                      else col.codec.width)
            need = required_share_count(kind, length)
            if params.servers < need:
                raise BadParams(
                    f"{kind} over {attr!r} needs {need} servers, have "
                    f"{params.servers}"
                )

    n = schema.rows
    per_server: list[SharedRelation] = [
        SharedRelation(server=x, schema=schema,
                       unary=[None] * len(schema.columns),
                       compact=[None] * len(schema.columns),
                       binary=[None] * len(schema.columns))
        for x in params.xs
    ]
    for j, col in enumerate(schema.columns):
        values = extended.column(j)
        coords = col.codec.encode_unary_block(values)
        rng = coefficient_rng(params.seed, relation.name, col.name, "unary")
        shared = _share_block(coords, params, rng)
        for x in params.xs:
            per_server[x - 1].unary[j] = shared[x - 1]
        if col.codec.compact:
            packed = col.codec.encode_compact_block(values)
            rng = coefficient_rng(params.seed, relation.name, col.name, "compact")
            shared = _share_block(packed, params, rng)
            for x in params.xs:
                per_server[x - 1].compact[j] = shared[x - 1]
        if col.codec.range_bits:
            bits = np.stack([col.codec.encode_binary(v) for v in values])
            rng = coefficient_rng(params.seed, relation.name, col.name, "binary")
            shared = _share_block(bits, params, rng)
            for x in params.xs:
                per_server[x - 1].binary[j] = shared[x - 1]

    for rel in per_server:
        rel.validate()
    return per_server


def share_relations(relations, params: SharingParams, *,
                    options: dict | None = None,
                    join_on: list[tuple[str, str, str, str]] | None = None,
                    rid_mode: str = RID_SEQUENTIAL) -> dict[str, list[SharedRelation]]:
    """Share several relations together, harmonizing join-column codecs.

    ``join_on`` lists (relation_a, column_a, relation_b, column_b) pairs;
    both columns then encode over the union of their value sets so shared
    string matching across the pair is meaningful.
    """
    options = options or {}
    by_name = {rel.name: rel for rel in relations}
    align: dict[str, dict[str, list[str]]] = {rel.name: {} for rel in relations}
    for rel_a, col_a, rel_b, col_b in join_on or []:
        try:
            a, b = by_name[rel_a], by_name[rel_b]
        except KeyError as exc:
            raise OwnerError(f"join alignment names unknown relation {exc}")
        va = a.column(a.attributes.index(col_a))
        vb = b.column(b.attributes.index(col_b))
        align[rel_a].setdefault(col_a, []).extend(vb)
        align[rel_b].setdefault(col_b, []).extend(va)

    out = {}
    for rel in relations:
        out[rel.name] = share_relation(
            rel, params,
            column_options=options.get(rel.name),
            align_values=align[rel.name],
            rid_mode=rid_mode,
        )
    return out
