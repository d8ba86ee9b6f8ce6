"""One server's query evaluator.

An engine sees exactly one server's share relations plus the per-query
share material a user sends it; it never touches another server's state
or any cleartext.  Every computation is a fixed pipeline over whole
columns (map over tuples, grouped shuffle, reduce), so the work done and
the rows touched are identical whichever tuples actually satisfy the
query.  Field-operation counters back that claim and feed the cost
ledger.

All arithmetic stays in int64: with a 24-bit modulus a product of two
reduced elements is < 2^48 and row sums stay far below 2^63.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .sss import degree_after
from .storage import SharedRelation

__all__ = [
    "EngineError",
    "ShapeMismatch",
    "BadPartition",
    "OpCounters",
    "SharedScalar",
    "ShareVector",
    "QueryShares",
    "ServerEngine",
]


class EngineError(ValueError):
    """Base class for server-side evaluation errors."""


class ShapeMismatch(EngineError):
    """Query share material does not fit the column layout."""


class BadPartition(EngineError):
    """Block list is overlapping or out of range."""


@dataclass
class OpCounters:
    """Instrumentation for the obliviousness trace and the cost ledger."""

    field_adds: int = 0
    field_muls: int = 0
    rows_touched: int = 0
    shuffle_pairs: int = 0

    def as_dict(self) -> dict:
        return {
            "field_adds": self.field_adds,
            "field_muls": self.field_muls,
            "rows_touched": self.rows_touched,
            "shuffle_pairs": self.shuffle_pairs,
        }

    def snapshot(self) -> tuple:
        return (self.field_adds, self.field_muls, self.rows_touched,
                self.shuffle_pairs)

    def reset(self) -> None:
        self.field_adds = self.field_muls = 0
        self.rows_touched = self.shuffle_pairs = 0


@dataclass(frozen=True)
class SharedScalar:
    """A single share with its tracked polynomial degree."""

    value: int
    degree: int


@dataclass(frozen=True)
class ShareVector:
    """A block of shares produced by one expression, one common degree."""

    values: np.ndarray
    degree: int

    def __len__(self) -> int:
        return self.values.shape[0]

    def scalar(self) -> SharedScalar:
        if self.values.shape != ():
            raise EngineError("not a scalar result")
        return SharedScalar(int(self.values), self.degree)


@dataclass(frozen=True)
class QueryShares:
    """Per-server secret-shared query material.

    kind is one of count, select_single, match_vector, fetch,
    range_count, range_mark, join.  All share entries are degree
    ``degree`` (fresh user-side sharings).
    """

    kind: str
    relation: str
    attr: int | None = None
    pred: np.ndarray | None = None          # flattened unary word
    pred_width: int = 0
    pred_alphabet: int = 0
    bound_low: np.ndarray | None = None     # 2's-complement bit shares of a
    bound_high: np.ndarray | None = None    # 2's-complement bit shares of b
    fetch: np.ndarray | None = None         # (slots, rid coords)
    range_mode: str = "eq2"
    degree: int = 1
    parent: str | None = None
    child: str | None = None
    parent_on: int | None = None
    child_on: int | None = None


class ServerEngine:
    """Evaluator over one server's SharedRelation set."""

    def __init__(self, relations, splits: int = 1):
        if isinstance(relations, SharedRelation):
            relations = {relations.schema.name: relations}
        self.relations: dict[str, SharedRelation] = dict(relations)
        if not self.relations:
            raise EngineError("engine needs at least one shared relation")
        servers = {r.server for r in self.relations.values()}
        primes = {r.schema.prime for r in self.relations.values()}
        if len(servers) != 1 or len(primes) != 1:
            raise EngineError("an engine holds exactly one server's shares")
        self.server = servers.pop()
        self.prime = primes.pop()
        self.splits = max(1, splits)
        self.counters = OpCounters()

    def relation(self, name: str) -> SharedRelation:
        try:
            return self.relations[name]
        except KeyError:
            raise EngineError(f"server holds no relation {name!r}") from None

    # ------------------------------------------------------------------
    # counted field primitives
    # ------------------------------------------------------------------

    def _mul(self, a, b) -> np.ndarray:
        out = (np.asarray(a) * np.asarray(b)) % self.prime
        self.counters.field_muls += int(np.size(out))
        return out

    def _add(self, a, b) -> np.ndarray:
        out = (np.asarray(a) + np.asarray(b)) % self.prime
        self.counters.field_adds += int(np.size(out))
        return out

    def _sub(self, a, b) -> np.ndarray:
        out = (np.asarray(a) - np.asarray(b)) % self.prime
        self.counters.field_adds += int(np.size(out))
        return out

    def _sum(self, a, axis=None) -> np.ndarray:
        a = np.asarray(a)
        out = a.sum(axis=axis) % self.prime
        self.counters.field_adds += max(int(a.size) - int(np.size(out)), 0)
        return out

    # ------------------------------------------------------------------
    # string matching (the per-word multiply-and-sum pipeline)
    # ------------------------------------------------------------------

    def _match_rows(self, data: np.ndarray, pred: np.ndarray, width: int,
                    alphabet: int, data_degree: int, pred_degree: int
                    ) -> ShareVector:
        """Equality share per row of a (rows, width*alphabet) unary block.

        Per symbol an inner product of the two one-hot share vectors, then
        the chained product over all symbols of the word.
        """
        rows = data.shape[0]
        if data.shape != (rows, width * alphabet) or pred.shape != (width * alphabet,):
            raise ShapeMismatch(
                f"unary shapes {data.shape} / {pred.shape} do not agree with "
                f"width {width} x alphabet {alphabet}"
            )
        d3 = data.reshape(rows, width, alphabet)
        p3 = pred.reshape(1, width, alphabet)
        per_symbol = self._sum(self._mul(d3, p3), axis=2)  # (rows, width)
        sym_degree = degree_after("mul", data_degree, pred_degree)
        out = per_symbol[:, 0]
        degree = sym_degree
        for k in range(1, width):
            out = self._mul(out, per_symbol[:, k])
            degree = degree_after("mul", degree, sym_degree)
        self.counters.rows_touched += rows
        return ShareVector(out, degree)

    def string_match(self, cell: np.ndarray, pred: np.ndarray, width: int,
                     alphabet: int, cell_degree: int = 1,
                     pred_degree: int = 1) -> SharedScalar:
        """Share of 1 iff the two unary-encoded words hold equal cleartext."""
        cell = np.asarray(cell, dtype=np.int64).reshape(1, -1)
        out = self._match_rows(cell, np.asarray(pred, dtype=np.int64),
                               width, alphabet, cell_degree, pred_degree)
        return SharedScalar(int(out.values[0]), out.degree)

    def _column_match(self, q: QueryShares) -> ShareVector:
        rel = self.relation(q.relation)
        col = rel.schema.columns[q.attr]
        if (q.pred_width, q.pred_alphabet) != (col.codec.width,
                                               col.codec.alphabet.size):
            raise ShapeMismatch(
                f"predicate shape ({q.pred_width}x{q.pred_alphabet}) does not "
                f"match column {col.name!r}"
            )
        return self._match_rows(rel.unary[q.attr], q.pred, col.codec.width,
                                col.codec.alphabet.size, rel.schema.degree,
                                q.degree)

    # ------------------------------------------------------------------
    # deterministic in-process map -> shuffle -> reduce
    # ------------------------------------------------------------------

    def _map_reduce(self, items, map_fn, reduce_fn) -> dict:
        groups: dict = {}
        for item in items:
            for key, value in map_fn(item):
                groups.setdefault(key, []).append(value)
                self.counters.shuffle_pairs += 1
        return {key: reduce_fn(key, values) for key, values in sorted(groups.items())}

    # ------------------------------------------------------------------
    # count and selection
    # ------------------------------------------------------------------

    def count_query(self, q: QueryShares) -> SharedScalar:
        """Share of the predicate's multiplicity in the target attribute."""
        theta = self._column_match(q)
        chunks = np.array_split(np.arange(len(theta)), self.splits)

        def map_fn(chunk):
            yield 0, self._sum(theta.values[chunk])

        def reduce_fn(_key, partials):
            return self._sum(np.asarray(partials, dtype=np.int64))

        total = self._map_reduce(chunks, map_fn, reduce_fn)[0]
        return SharedScalar(int(total), theta.degree)

    def match_vector(self, q: QueryShares) -> ShareVector:
        """Per-tuple equality shares, unaccumulated."""
        return self._column_match(q)

    def _payload(self, rel: SharedRelation, attr: int) -> np.ndarray:
        """Fetchable form of a column: the compact share if the whole word
        fits one field element, the unary block otherwise."""
        blk = rel.compact[attr]
        if blk is not None:
            return blk.reshape(-1, 1)
        return rel.unary[attr]

    def _gather(self, rel: SharedRelation, theta: ShareVector,
                columns) -> list[ShareVector]:
        """Sum theta[i] * payload[i] over all rows, one result per column."""
        out = []
        degree = degree_after("mul", theta.degree, rel.schema.degree)
        for attr in columns:
            pay = self._payload(rel, attr)
            out.append(ShareVector(
                self._sum(self._mul(theta.values[:, None], pay), axis=0),
                degree,
            ))
        return out

    def select_single(self, q: QueryShares) -> list[ShareVector]:
        """Per-attribute share sums that decode to the unique matching tuple.

        The server cannot tell how many tuples matched; with more than one
        the sums superimpose and the caller's count pre-check is what rules
        that out.
        """
        rel = self.relation(q.relation)
        theta = self._column_match(q)
        return self._gather(rel, theta, range(len(rel.schema.columns)))

    def fetch_by_rids(self, q: QueryShares, columns=None) -> list[list[ShareVector]]:
        """Oblivious gather of one tuple per fetch-vector entry.

        Entries carrying a fake row-id above the real id space match no
        tuple and come back as all-zero shares.
        """
        rel = self.relation(q.relation)
        rid = rel.schema.rid_index
        codec = rel.schema.columns[rid].codec
        if q.fetch is None or q.fetch.ndim != 2 or \
                q.fetch.shape[1] != codec.coords:
            raise ShapeMismatch("fetch vector does not match the RID layout")
        if columns is None:
            columns = range(len(rel.schema.columns))
        out = []
        for entry in q.fetch:
            theta = self._match_rows(rel.unary[rid], entry, codec.width,
                                     codec.alphabet.size, rel.schema.degree,
                                     q.degree)
            out.append(self._gather(rel, theta, columns))
        return out

    # ------------------------------------------------------------------
    # block operations for the tree-based search
    # ------------------------------------------------------------------

    @staticmethod
    def _check_blocks(blocks, rows: int) -> None:
        last = 0
        for lo, hi in blocks:
            if lo < last or hi <= lo or hi > rows:
                raise BadPartition(f"bad block list {list(blocks)}")
            last = hi

    def block_counts(self, q: QueryShares, blocks) -> list[SharedScalar]:
        """Predicate multiplicity share per row range.

        Blocks are half-open 0-based (lo, hi) ranges, ordered and disjoint;
        a full-cover partition of the relation is the canonical call.
        """
        rel = self.relation(q.relation)
        self._check_blocks(blocks, rel.schema.rows)
        theta = self._column_match(q)
        return [
            SharedScalar(int(self._sum(theta.values[lo:hi])), theta.degree)
            for lo, hi in blocks
        ]

    def block_rid_sums(self, q: QueryShares, blocks) -> list[ShareVector]:
        """Sum of match * row-id payload per block.

        For a block holding exactly one match this decodes to the matching
        tuple's row-id without the server learning which row it was.
        """
        rel = self.relation(q.relation)
        self._check_blocks(blocks, rel.schema.rows)
        theta = self._column_match(q)
        rid = rel.schema.rid_index
        pay = self._payload(rel, rid)
        degree = degree_after("mul", theta.degree, rel.schema.degree)
        masked = self._mul(theta.values[:, None], pay)
        return [
            ShareVector(self._sum(masked[lo:hi], axis=0), degree)
            for lo, hi in blocks
        ]

    def masked_rid_vector(self, q: QueryShares) -> ShareVector:
        """match * row-id payload per tuple, shuffled by the stored permutation.

        Supports the permuted-RID mode: the user learns the matching ids
        but not their positions.
        """
        rel = self.relation(q.relation)
        theta = self._column_match(q)
        rid = rel.schema.rid_index
        pay = self._payload(rel, rid)
        degree = degree_after("mul", theta.degree, rel.schema.degree)
        masked = self._mul(theta.values[:, None], pay)
        if rel.schema.permutation is not None:
            masked = masked[np.asarray(rel.schema.permutation)]
        return ShareVector(masked, degree)

    # ------------------------------------------------------------------
    # joins
    # ------------------------------------------------------------------

    def pkfk_join_reduce(self, parent: SharedRelation, parent_on: int,
                         child: SharedRelation, child_on: int,
                         child_row: int) -> list[ShareVector]:
        """One reducer of the key-equality join: matches the child row's
        join value against every parent row, collapses the parent side by
        the match shares, and appends the child row's remaining columns."""
        codec = parent.schema.columns[parent_on].codec
        pred = child.unary[child_on][child_row]
        theta = self._match_rows(parent.unary[parent_on], pred, codec.width,
                                 codec.alphabet.size, parent.schema.degree,
                                 child.schema.degree)
        parent_cols = [j for j, _ in enumerate(parent.schema.data_columns)]
        joined = self._gather(parent, theta, parent_cols)
        for j, _ in enumerate(child.schema.data_columns):
            if j == child_on:
                continue
            pay = self._payload(child, j)[child_row]
            joined.append(ShareVector(pay.copy(), child.schema.degree))
        return joined

    def pkfk_join(self, q: QueryShares) -> list[list[ShareVector]]:
        """Key-to-foreign-key join, one output tuple per child row.

        Map fan-out mirrors the shuffle contract: every parent tuple is
        replicated to all child keys, every child tuple addresses exactly
        one key.
        """
        parent = self.relation(q.parent)
        child = self.relation(q.child)
        pc = parent.schema.columns[q.parent_on].codec
        cc = child.schema.columns[q.child_on].codec
        if (pc.alphabet, pc.width) != (cc.alphabet, cc.width):
            raise ShapeMismatch("join columns were not shared with one codec")
        n_child = child.schema.rows

        def map_fn(item):
            side, i = item
            if side == "parent":
                for key in range(1, n_child + 1):
                    yield key, ("parent", i)
            else:
                yield i + 1, ("child", i)

        def reduce_fn(key, values):
            assert any(v[0] == "child" for v in values)
            return self.pkfk_join_reduce(parent, q.parent_on, child,
                                         q.child_on, key - 1)

        items = [("parent", i) for i in range(parent.schema.rows)]
        items += [("child", j) for j in range(n_child)]
        reduced = self._map_reduce(items, map_fn, reduce_fn)
        return [reduced[key] for key in range(1, n_child + 1)]

    @staticmethod
    def nonpkfk_concat(x_tuples: list[list[ShareVector]],
                       y_tuples: list[list[ShareVector]]
                       ) -> list[list[ShareVector]]:
        """Cartesian concatenation of two pre-filtered tuple sets; pure
        copying, no share arithmetic."""
        return [xt + yt for xt in x_tuples for yt in y_tuples]

    def fetch_join_pair(self, qx: QueryShares, qy: QueryShares
                        ) -> list[list[ShareVector]]:
        """Server step for one joining value: gather both sides' padded
        tuple sets by row-id, then concatenate every pair."""
        x_rel = self.relation(qx.relation)
        y_rel = self.relation(qy.relation)
        x_cols = range(len(x_rel.schema.data_columns))
        y_cols = [j for j, _ in enumerate(y_rel.schema.data_columns)
                  if j != qy.attr]
        x_rows = self.fetch_by_rids(qx, columns=x_cols)
        y_rows = self.fetch_by_rids(qy, columns=y_cols)
        return self.nonpkfk_concat(x_rows, y_rows)

    # ------------------------------------------------------------------
    # range predicates over 2's-complement bit shares
    # ------------------------------------------------------------------

    def _sign_bits(self, sub_bits, sub_degree: int, min_bits,
                   min_degree: int) -> tuple[np.ndarray, int]:
        """Sign share(s) of (minuend - subtrahend) by ripple evaluation of
        minuend + ~subtrahend + 1; returns the final sum bit (MSB)."""
        sub_bits = np.asarray(sub_bits, dtype=np.int64)
        min_bits = np.asarray(min_bits, dtype=np.int64)
        if sub_bits.shape[-1] != min_bits.shape[-1]:
            raise ShapeMismatch("binary operands must share one bit width")
        bits = sub_bits.shape[-1]
        inv = self._sub(1, sub_bits[..., 0])
        b0 = min_bits[..., 0] + np.zeros_like(inv)
        carry = self._sub(self._add(inv, b0), self._mul(inv, b0))
        carry_deg = degree_after("mul", sub_degree, min_degree)
        # full-adder sum bit with carry-in 1; only consulted when bits == 1
        rb = self._sub(self._add(self._add(inv, b0), 1),
                       self._mul(2, carry))
        rb_deg = carry_deg
        for i in range(1, bits):
            inv = self._sub(1, sub_bits[..., i])
            bi = min_bits[..., i] + np.zeros_like(inv)
            xor = self._sub(self._add(inv, bi), self._mul(2, self._mul(inv, bi)))
            xor_deg = degree_after("mul", sub_degree, min_degree)
            rb = self._sub(self._add(xor, carry),
                           self._mul(2, self._mul(carry, xor)))
            rb_deg = degree_after("mul", carry_deg, xor_deg)
            carry = self._add(self._mul(inv, bi), self._mul(carry, xor))
            carry_deg = degree_after("mul", carry_deg, xor_deg)
        return rb, rb_deg

    def sign_after_subtract(self, subtrahend, minuend, sub_degree: int = 1,
                            min_degree: int = 1) -> SharedScalar:
        """Share of the sign bit of (minuend - subtrahend), both given as
        equal-width little-endian 2's-complement bit shares."""
        rb, deg = self._sign_bits(np.asarray(subtrahend, dtype=np.int64),
                                  sub_degree,
                                  np.asarray(minuend, dtype=np.int64),
                                  min_degree)
        return SharedScalar(int(rb), deg)

    def _range_flags(self, q: QueryShares) -> ShareVector:
        rel = self.relation(q.relation)
        col = rel.schema.columns[q.attr]
        data = rel.binary[q.attr]
        if data is None:
            raise ShapeMismatch(f"column {col.name!r} has no binary sharing")
        if q.bound_low is None or q.bound_high is None or \
                len(q.bound_low) != col.codec.range_bits or \
                len(q.bound_high) != col.codec.range_bits:
            raise ShapeMismatch("range bounds do not match the column bit width")
        # out-of-range flag per tuple: sign(x - a) + sign(b - x)
        low_sign, deg = self._sign_bits(q.bound_low, q.degree, data,
                                        rel.schema.degree)
        high_sign, deg2 = self._sign_bits(data, rel.schema.degree,
                                          q.bound_high, q.degree)
        flags = self._add(low_sign, high_sign)
        degree = degree_after("add", deg, deg2)
        if q.range_mode == "eq2":
            flags = self._sub(1, flags)  # in-range indicator instead
        elif q.range_mode != "sum-signs":
            raise EngineError(f"unknown range mode {q.range_mode!r}")
        self.counters.rows_touched += rel.schema.rows
        return ShareVector(flags, degree)

    def range_mark(self, q: QueryShares) -> ShareVector:
        """Per-tuple range flags: in-range tuples carry 1 in eq2 mode and 0
        in sum-signs mode."""
        return self._range_flags(q)

    def range_count(self, q: QueryShares) -> SharedScalar:
        """Accumulated range flags: the in-range count in eq2 mode, the
        out-of-range count in sum-signs mode."""
        flags = self._range_flags(q)
        return SharedScalar(int(self._sum(flags.values)), flags.degree)

    # ------------------------------------------------------------------
    # raw column transfer (used by the join planner's value discovery)
    # ------------------------------------------------------------------

    def column_payload(self, relation: str, attr: int) -> ShareVector:
        """The stored payload shares of one column, degree as shared."""
        rel = self.relation(relation)
        self.counters.rows_touched += rel.schema.rows
        return ShareVector(self._payload(rel, attr).copy(), rel.schema.degree)
