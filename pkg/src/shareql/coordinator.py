"""The user side: shares query predicates, drives the round protocols
across the c server engines, interpolates answers, and keeps the cost
ledger.

Every round sends each engine its own share material and barriers on the
replies before interpolating; engines never observe each other.  The
ledger records per-round element flow (identical for every server), the
servers' field-operation counters (asserted identical across servers),
and the closed-form bound checks for each protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .engine import QueryShares, ServerEngine, ShareVector
from .field import PrimeField
from .sss import coefficient_rng, required_share_count
from .storage import RID_PERMUTED, RID_SEQUENTIAL, RelationSchema, load_share_dir

__all__ = [
    "Coordinator",
    "CostLedger",
    "QueryPlan",
    "CoordinatorError",
    "InsufficientServers",
    "PaddingTooSmall",
    "NotUnique",
]

PARTITION_ALL = "all"
PARTITION_CASE4 = "case4"


class CoordinatorError(ValueError):
    """Base class for user-side protocol errors."""


class InsufficientServers(CoordinatorError):
    """The deployment has fewer servers than the query's share degree needs."""


class PaddingTooSmall(CoordinatorError):
    """More matching tuples than padded fetch slots."""


class NotUnique(CoordinatorError):
    """A single-tuple selection found several matches and fallback is off."""


class ReconstructionMismatch(CoordinatorError):
    """Interpolation over d+1 shares disagrees with the full server set."""


@dataclass(frozen=True)
class QueryPlan:
    """A fully specified query: what to run and the privacy knobs.

    fetch_pad fixes the padded fetch-vector length (default: smallest
    power of two covering the result).  branching overrides the tree
    split factor.  partition_policy 'all' keeps the partition transcript
    data-independent; 'case4' splits only still-ambiguous blocks.
    """

    kind: str
    relation: str = ""
    column: str = ""
    value: str | None = None
    low: int | None = None
    high: int | None = None
    strategy: str = "one-round"          # or "tree" for multi-tuple selection
    fetch_pad: int | None = None
    branching: int | None = None
    partition_policy: str = PARTITION_ALL
    range_mode: str = "eq2"
    parent: str = ""
    child: str = ""
    on: str = ""
    uniform_fetch: bool = True
    fake_join_values: int = 0


@dataclass
class CostLedger:
    """Per-query accounting: rounds, element flow, ops, bound checks."""

    query: str = ""
    params: dict = dc_field(default_factory=dict)
    rounds: int = 0
    address_rounds: int = 0
    elements_up: int = 0
    elements_down: int = 0
    user_interp_ops: int = 0
    phases: list = dc_field(default_factory=list)
    server_ops: dict = dc_field(default_factory=dict)
    bounds: list = dc_field(default_factory=list)

    def phase(self, name: str, up: int, down: int) -> None:
        self.rounds += 1
        self.elements_up += up
        self.elements_down += down
        self.phases.append({"name": name, "up": up, "down": down})

    def check(self, name: str, actual, limit, ok: bool | None = None) -> None:
        self.bounds.append({
            "name": name,
            "actual": actual,
            "limit": limit,
            "ok": bool(actual <= limit) if ok is None else bool(ok),
        })

    def transcript(self) -> tuple:
        return tuple((p["name"], p["up"], p["down"]) for p in self.phases)

    def as_dict(self) -> dict:
        return {
            "query": self.query,
            "params": dict(self.params),
            "rounds": self.rounds,
            "address_rounds": self.address_rounds,
            "elements_up_per_server": self.elements_up,
            "elements_down_per_server": self.elements_down,
            "user_interp_ops": self.user_interp_ops,
            "phases": list(self.phases),
            "server_ops": dict(self.server_ops),
            "bounds": list(self.bounds),
        }

    def as_text(self) -> str:
        lines = [f"query={self.query}"]
        for key, val in self.params.items():
            lines.append(f"param.{key}={val}")
        lines += [
            f"rounds={self.rounds}",
            f"address_rounds={self.address_rounds}",
            f"elements_up_per_server={self.elements_up}",
            f"elements_down_per_server={self.elements_down}",
            f"user_interp_ops={self.user_interp_ops}",
        ]
        for p in self.phases:
            lines.append(f"phase.{p['name']}.up={p['up']}")
            lines.append(f"phase.{p['name']}.down={p['down']}")
        for key, val in self.server_ops.items():
            lines.append(f"server.{key}={val}")
        for b in self.bounds:
            lines.append(
                f"bound.{b['name']}={'pass' if b['ok'] else 'FAIL'} "
                f"(actual={b['actual']} limit={b['limit']})"
            )
        return "\n".join(lines)


def _floor_log(n: int, base: int) -> int:
    if n < 1 or base < 2:
        raise CoordinatorError("floor log needs n >= 1, base >= 2")
    out, acc = 0, base
    while acc <= n:
        out += 1
        acc *= base
    return out


def _next_pow2(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length()


class Coordinator:
    """Runs oblivious queries against one deployment's share relations."""

    def __init__(self, shares: dict, *, seed: int | None = None,
                 verify_consistency: bool = True, splits: int = 1):
        if not shares:
            raise CoordinatorError("no share relations supplied")
        self.schemas: dict[str, RelationSchema] = {}
        primes = set()
        server_sets = set()
        for name, rels in shares.items():
            rels = sorted(rels, key=lambda r: r.server)
            shares[name] = rels
            sigs = {r.shape_signature() for r in rels}
            if len(sigs) != 1:
                raise CoordinatorError(f"relation {name!r}: server shapes differ")
            self.schemas[name] = rels[0].schema
            primes.add(rels[0].schema.prime)
            server_sets.add(tuple(r.server for r in rels))
        if len(primes) != 1:
            raise CoordinatorError("relations were shared under different primes")
        if len(server_sets) != 1:
            raise CoordinatorError("relations live on different server sets")
        self.prime = primes.pop()
        self.field = PrimeField(self.prime)
        self.xs = list(server_sets.pop())
        self.servers = len(self.xs)
        self.engines = [
            ServerEngine({name: rels[i] for name, rels in shares.items()},
                         splits=splits)
            for i in range(self.servers)
        ]
        self.verify_consistency = verify_consistency
        self.rng = coefficient_rng(seed, "coordinator")
        self.ledger = CostLedger()

    @classmethod
    def from_dir(cls, directory, **kwargs) -> "Coordinator":
        return cls(load_share_dir(directory), **kwargs)

    # ------------------------------------------------------------------
    # bookkeeping
    # ------------------------------------------------------------------

    def _begin(self, kind: str, **params) -> None:
        self.ledger = CostLedger(query=kind, params=params)
        for eng in self.engines:
            eng.counters.reset()

    def _finish(self) -> None:
        snaps = {eng.counters.snapshot() for eng in self.engines}
        if len(snaps) != 1:
            raise CoordinatorError("server op counts diverged; engine bug")
        self.ledger.server_ops = self.engines[0].counters.as_dict()

    def cost_report(self) -> CostLedger:
        """Ledger of the most recently completed query."""
        return self.ledger

    # ------------------------------------------------------------------
    # share material for queries (always fresh degree-1 polynomials)
    # ------------------------------------------------------------------

    def _share_bits(self, bits: np.ndarray) -> np.ndarray:
        """Degree-1 sharing of each entry; returns (servers,) + bits.shape."""
        bits = np.asarray(bits, dtype=np.int64)
        coeffs = self.rng.integers(1, self.prime, size=bits.shape, dtype=np.int64)
        xs = np.asarray(self.xs, dtype=np.int64).reshape(
            (self.servers,) + (1,) * bits.ndim)
        return (bits[None, ...] + coeffs[None, ...] * xs) % self.prime

    def _schema(self, relation: str) -> RelationSchema:
        try:
            return self.schemas[relation]
        except KeyError:
            raise CoordinatorError(f"unknown relation {relation!r}") from None

    def _require(self, kind: str, length: int) -> None:
        need = required_share_count(kind, length)
        if self.servers < need:
            raise InsufficientServers(
                f"{kind} over length {length} needs {need} servers, "
                f"deployment has {self.servers}"
            )

    def _pred_queries(self, kind: str, relation: str, attr: int, value: str,
                      **extra) -> tuple[list[QueryShares], int]:
        codec = self._schema(relation).columns[attr].codec
        word = codec.encode_unary(value)
        shared = self._share_bits(word)
        queries = [
            QueryShares(kind=kind, relation=relation, attr=attr,
                        pred=shared[i], pred_width=codec.width,
                        pred_alphabet=codec.alphabet.size, **extra)
            for i in range(self.servers)
        ]
        return queries, codec.coords

    # ------------------------------------------------------------------
    # interpolation with degree verification
    # ------------------------------------------------------------------

    def _interp(self, vectors: list[ShareVector]) -> np.ndarray:
        degrees = {v.degree for v in vectors}
        if len(degrees) != 1:
            raise CoordinatorError("servers disagree on result degree")
        degree = degrees.pop()
        if degree + 1 > self.servers:
            raise InsufficientServers(
                f"result of degree {degree} needs {degree + 1} servers, "
                f"deployment has {self.servers}"
            )
        stacked = np.stack([np.asarray(v.values, dtype=np.int64)
                            for v in vectors])
        need = degree + 1
        out = self.field.interpolate_columns(self.xs[:need], stacked[:need])
        if self.verify_consistency:
            full = self.field.interpolate_columns(self.xs, stacked)
            if not np.array_equal(out, full):
                raise ReconstructionMismatch(
                    "tracked degree inconsistent with the full server set"
                )
        self.ledger.user_interp_ops += int(np.size(out))
        return out

    def _interp_scalar(self, scalars) -> int:
        vecs = [ShareVector(np.asarray([s.value], dtype=np.int64), s.degree)
                for s in scalars]
        return int(self._interp(vecs)[0])

    # ------------------------------------------------------------------
    # decoding reconstructed payloads
    # ------------------------------------------------------------------

    def _decode_cell(self, codec, ints: np.ndarray) -> str:
        if codec.compact:
            return codec.decode_compact(int(ints[0]))
        return codec.decode_unary([int(v) for v in ints])

    def _decode_tuple(self, schema: RelationSchema, per_col: list[np.ndarray],
                      columns) -> tuple[str, ...]:
        return tuple(
            self._decode_cell(schema.columns[attr].codec, vals)
            for attr, vals in zip(columns, per_col)
        )

    @staticmethod
    def _payload_width(schema: RelationSchema, columns) -> int:
        total = 0
        for attr in columns:
            codec = schema.columns[attr].codec
            total += 1 if codec.compact else codec.coords
        return total

    # ------------------------------------------------------------------
    # count
    # ------------------------------------------------------------------

    def _count_phase(self, relation: str, column: str, value: str) -> int:
        schema = self._schema(relation)
        attr = schema.column_index(column)
        codec = schema.columns[attr].codec
        self._require("count", codec.width)
        queries, up = self._pred_queries("count", relation, attr, value)
        results = [eng.count_query(q) for eng, q in zip(self.engines, queries)]
        self.ledger.phase("count", up, 1)
        return self._interp_scalar(results)

    def run_count(self, plan: QueryPlan) -> int:
        """Multiplicity of the predicate: one round, one element down."""
        self._begin("count", relation=plan.relation, column=plan.column,
                    n=self._schema(plan.relation).rows)
        total = self._count_phase(plan.relation, plan.column, plan.value)
        self.ledger.check("rounds", self.ledger.rounds, 1)
        self.ledger.check("elements_down", self.ledger.elements_down, 1)
        self._finish()
        return total

    def count(self, relation: str, column: str, value: str) -> int:
        return self.run_count(QueryPlan("count", relation, column, value))

    # ------------------------------------------------------------------
    # single-tuple selection
    # ------------------------------------------------------------------

    def _single_fetch_phase(self, relation: str, column: str,
                            value: str) -> tuple[str, ...]:
        schema = self._schema(relation)
        attr = schema.column_index(column)
        codec = schema.columns[attr].codec
        self._require("select", codec.width)
        queries, up = self._pred_queries("select_single", relation, attr, value)
        results = [eng.select_single(q) for eng, q in zip(self.engines, queries)]
        columns = range(len(schema.columns))
        down = self._payload_width(schema, columns)
        self.ledger.phase("single_fetch", up, down)
        per_col = [
            self._interp([res[j] for res in results])
            for j, _ in enumerate(schema.columns)
        ]
        return self._decode_tuple(schema, per_col, columns)

    def run_select_single(self, plan: QueryPlan, fallback: bool = True):
        """Selection for a unique predicate; embeds the count pre-check.

        With several matches it falls through to the tree-based
        multi-tuple path unless ``fallback`` is off, in which case it
        raises NotUnique.  Returns None when nothing matches.
        """
        self._begin("select_single", relation=plan.relation, column=plan.column,
                    n=self._schema(plan.relation).rows)
        hits = self._count_phase(plan.relation, plan.column, plan.value)
        if hits > 1:
            if not fallback:
                raise NotUnique(f"predicate matches {hits} tuples")
            rows = self._select_tree_phases(plan, hits)
            self._finish()
            return rows
        if hits == 0:
            self._finish()
            return None
        row = self._single_fetch_phase(plan.relation, plan.column, plan.value)
        self.ledger.check("rounds", self.ledger.rounds, 2)
        self._finish()
        return row

    def select_single(self, relation: str, column: str, value: str, **kw):
        return self.run_select_single(
            QueryPlan("select_single", relation, column, value), **kw)

    # ------------------------------------------------------------------
    # padded oblivious fetch by row-id
    # ------------------------------------------------------------------

    def _fake_rids(self, schema: RelationSchema, count: int,
                   taken: set[int]) -> list[int]:
        space = schema.rid_space
        limit = 10 ** schema.columns[schema.rid_index].codec.width - 1
        pool = np.arange(space + 1, min(2 * space, limit) + 1)
        pool = pool[~np.isin(pool, list(taken))] if taken else pool
        if count > len(pool):
            raise CoordinatorError("fake row-id space exhausted")
        picked = self.rng.choice(pool, size=count, replace=False)
        return [int(v) for v in np.sort(picked)]

    def _fetch_phase(self, relation: str, rids: list[int], pad_to: int | None,
                     phase_name: str = "fetch") -> list[tuple[str, ...]]:
        """One padded fetch round; returns the real tuples in rid order."""
        schema = self._schema(relation)
        rid_codec = schema.columns[schema.rid_index].codec
        self._require("fetch", rid_codec.width)
        slots = pad_to if pad_to is not None else _next_pow2(max(len(rids), 1))
        if len(rids) > slots:
            raise PaddingTooSmall(
                f"{len(rids)} matching tuples exceed the fetch pad {slots}"
            )
        fakes = self._fake_rids(schema, slots - len(rids), set(rids))
        vector = list(rids) + fakes
        words = np.stack([rid_codec.encode_unary(str(r)) for r in vector])
        shared = self._share_bits(words)  # (c, slots, coords)
        queries = [
            QueryShares(kind="fetch", relation=relation, fetch=shared[i])
            for i in range(self.servers)
        ]
        results = [eng.fetch_by_rids(q) for eng, q in zip(self.engines, queries)]
        columns = list(range(len(schema.columns)))
        down = slots * self._payload_width(schema, columns)
        self.ledger.phase(phase_name, slots * rid_codec.coords, down)

        rows: list[tuple[str, ...]] = []
        for slot in range(slots):
            per_col = [
                self._interp([res[slot][j] for res in results])
                for j, _ in enumerate(columns)
            ]
            if slot >= len(rids):
                if any(int(v.sum()) != 0 for v in per_col):
                    raise CoordinatorError(
                        f"fake row-id {vector[slot]} fetched a real tuple"
                    )
                continue
            rows.append(self._decode_tuple(schema, per_col, columns))
        return rows

    # ------------------------------------------------------------------
    # multi-tuple selection, one-round flavor
    # ------------------------------------------------------------------

    def _match_vector_phase(self, relation: str, column: str,
                            value: str) -> list[int]:
        """Round 1: per-tuple match shares; returns the matching row-ids."""
        schema = self._schema(relation)
        attr = schema.column_index(column)
        codec = schema.columns[attr].codec
        self._require("count", codec.width)
        queries, up = self._pred_queries("match_vector", relation, attr, value)
        if schema.rid_mode == RID_PERMUTED:
            results = [eng.masked_rid_vector(q)
                       for eng, q in zip(self.engines, queries)]
            self.ledger.phase("match_vector", up,
                              int(np.size(results[0].values)))
            flat = self._interp(results)
            rid_codec = schema.columns[schema.rid_index].codec
            rids = []
            for entry in np.atleast_2d(flat):
                if int(entry.sum()) == 0:
                    continue
                rids.append(int(self._decode_cell(rid_codec, entry)))
            return sorted(rids)
        results = [eng.match_vector(q) for eng, q in zip(self.engines, queries)]
        self.ledger.phase("match_vector", up, schema.rows)
        flags = self._interp(results)
        bad = set(np.unique(flags)) - {0, 1}
        if bad:
            raise CoordinatorError(f"match vector holds non-bits: {bad}")
        return [i + 1 for i, flag in enumerate(flags) if flag == 1]

    def _rid_values_for_rows(self, schema: RelationSchema,
                             rows: list[int]) -> list[int]:
        # sequential mode: the RID value of row i is i itself
        return list(rows)

    def run_select_multi_oneround(self, plan: QueryPlan) -> list[tuple[str, ...]]:
        """Match-vector round plus one padded fetch round."""
        self._begin("select_oneround", relation=plan.relation,
                    column=plan.column, n=self._schema(plan.relation).rows,
                    fetch_pad=plan.fetch_pad)
        rids = self._match_vector_phase(plan.relation, plan.column, plan.value)
        rows = self._fetch_phase(plan.relation, rids, plan.fetch_pad)
        self.ledger.params["matches"] = len(rids)
        self.ledger.check("rounds", self.ledger.rounds, 2)
        self.ledger.check("phase1_elements_down",
                          self.ledger.phases[0]["down"],
                          self._schema(plan.relation).rows)
        self._finish()
        return rows

    # ------------------------------------------------------------------
    # multi-tuple selection, tree flavor
    # ------------------------------------------------------------------

    def _block_split(self, lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
        size = hi - lo
        parts = max(2, min(parts, size))
        base, extra = divmod(size, parts)
        out = []
        cursor = lo
        for i in range(parts):
            step = base + (1 if i < extra else 0)
            out.append((cursor, cursor + step))
            cursor += step
        return out

    def _tree_address_phases(self, plan: QueryPlan, hits: int) -> list[int]:
        """Q&A partition rounds; returns the matching row-ids (seq mode)."""
        schema = self._schema(plan.relation)
        attr = schema.column_index(plan.column)
        codec = schema.columns[attr].codec
        n = schema.rows
        split_base = plan.branching if plan.branching else hits
        policy = plan.partition_policy
        if policy not in (PARTITION_ALL, PARTITION_CASE4):
            raise CoordinatorError(f"unknown partition policy {policy!r}")

        blocks = [(0, n, hits)]  # (lo, hi, count); root count from phase 0
        qa_rounds = 0
        while any(0 < cnt < hi - lo and cnt != 1 for lo, hi, cnt in blocks):
            qa_rounds += 1
            requested: list[tuple[int, int]] = []
            kept: list[tuple[int, int, int]] = []
            for lo, hi, cnt in blocks:
                size = hi - lo
                case4 = 1 < cnt < size
                splittable = size > 1 and (policy == PARTITION_ALL or case4)
                if splittable:
                    parts = split_base if size >= split_base else 2
                    requested.extend(self._block_split(lo, hi, parts))
                else:
                    kept.append((lo, hi, cnt))
            queries, up = self._pred_queries("count", plan.relation, attr,
                                             plan.value)
            per_server = [eng.block_counts(q, requested)
                          for eng, q in zip(self.engines, queries)]
            self.ledger.phase(f"qa_round_{qa_rounds}", up, len(requested))
            counts = [
                self._interp_scalar([per_server[s][b]
                                     for s in range(self.servers)])
                for b in range(len(requested))
            ]
            blocks = sorted(kept + [(lo, hi, cnt) for (lo, hi), cnt in
                                    zip(requested, counts)])

        rids: list[int] = []
        pending: list[tuple[int, int]] = []
        for lo, hi, cnt in blocks:
            size = hi - lo
            if cnt == 0:
                continue
            if cnt == size:
                rids.extend(range(lo + 1, hi + 1))
            elif cnt == 1 and size == 1:
                rids.append(lo + 1)
            else:  # exactly one match somewhere in a longer block
                pending.append((lo, hi))

        if pending:
            self._require("select", codec.width)
            queries, up = self._pred_queries("count", plan.relation, attr,
                                             plan.value)
            per_server = [eng.block_rid_sums(q, pending)
                          for eng, q in zip(self.engines, queries)]
            rid_codec = schema.columns[schema.rid_index].codec
            width = 1 if rid_codec.compact else rid_codec.coords
            self.ledger.phase("rid_extract", up, len(pending) * width)
            for b, _ in enumerate(pending):
                vals = self._interp([per_server[s][b]
                                     for s in range(self.servers)])
                rids.append(int(self._decode_cell(rid_codec, vals)))

        self.ledger.address_rounds = qa_rounds + (1 if pending else 0)
        if len(rids) != hits:
            raise CoordinatorError(
                f"tree search found {len(rids)} addresses, count said {hits}"
            )
        return sorted(rids)

    def _select_tree_phases(self, plan: QueryPlan,
                            hits: int) -> list[tuple[str, ...]]:
        schema = self._schema(plan.relation)
        if schema.rid_mode != RID_SEQUENTIAL:
            raise CoordinatorError(
                "tree-based selection needs sequential row-ids"
            )
        if hits == 0:
            return self._fetch_phase(plan.relation, [], plan.fetch_pad)
        if hits == 1:
            return [self._single_fetch_phase(plan.relation, plan.column,
                                             plan.value)]
        rows = self._tree_address_phases(plan, hits)
        out = self._fetch_phase(plan.relation,
                                self._rid_values_for_rows(schema, rows),
                                plan.fetch_pad)
        n = schema.rows
        limit = _floor_log(n, min(hits, n)) + _floor_log(hits, 2) + 1
        self.ledger.check("theorem_tree_rounds", self.ledger.address_rounds,
                          limit)
        return out

    def run_select_multi_tree(self, plan: QueryPlan) -> list[tuple[str, ...]]:
        """Count phase, logarithmic Q&A address rounds, one padded fetch."""
        self._begin("select_tree", relation=plan.relation, column=plan.column,
                    n=self._schema(plan.relation).rows,
                    policy=plan.partition_policy, fetch_pad=plan.fetch_pad)
        hits = self._count_phase(plan.relation, plan.column, plan.value)
        rows = self._select_tree_phases(plan, hits)
        self.ledger.params["matches"] = hits
        self._finish()
        return rows

    def select(self, relation: str, column: str, value: str,
               strategy: str = "one-round", **plan_kw) -> list[tuple[str, ...]]:
        plan = QueryPlan("select", relation, column, value,
                         strategy=strategy, **plan_kw)
        if strategy == "one-round":
            return self.run_select_multi_oneround(plan)
        if strategy == "tree":
            return self.run_select_multi_tree(plan)
        raise CoordinatorError(f"unknown selection strategy {strategy!r}")

    # ------------------------------------------------------------------
    # joins
    # ------------------------------------------------------------------

    def _join_columns(self, parent: str, child: str, on: str) -> tuple[int, int]:
        ps, cs = self._schema(parent), self._schema(child)
        pj, cj = ps.column_index(on), cs.column_index(on)
        pc, cc = ps.columns[pj].codec, cs.columns[cj].codec
        if (pc.alphabet, pc.width, pc.pad_mode) != (cc.alphabet, cc.width,
                                                    cc.pad_mode):
            raise CoordinatorError(
                f"join columns {on!r} were not shared with one codec; "
                f"re-share the relations with join alignment"
            )
        return pj, cj

    def run_pkfk_join(self, plan: QueryPlan) -> list[tuple[str, ...]]:
        """Key/foreign-key join in one round; one output per child tuple,
        zero rows (child values missing from the parent) filtered here."""
        parent_schema = self._schema(plan.parent)
        child_schema = self._schema(plan.child)
        pj, cj = self._join_columns(plan.parent, plan.child, plan.on)
        self._require("join", parent_schema.columns[pj].codec.width)
        self._begin("pkfk_join", parent=plan.parent, child=plan.child,
                    on=plan.on, n_parent=parent_schema.rows,
                    n_child=child_schema.rows)
        queries = [
            QueryShares(kind="join", relation=plan.parent, parent=plan.parent,
                        child=plan.child, parent_on=pj, child_on=cj)
            for _ in range(self.servers)
        ]
        results = [eng.pkfk_join(q) for eng, q in zip(self.engines, queries)]

        parent_cols = list(range(len(parent_schema.data_columns)))
        child_cols = [j for j, _ in enumerate(child_schema.data_columns)
                      if j != cj]
        down = child_schema.rows * (
            self._payload_width(parent_schema, parent_cols)
            + self._payload_width(child_schema, child_cols)
        )
        self.ledger.phase("join_reduce", 0, down)

        rows = []
        for t in range(child_schema.rows):
            per_col = [
                self._interp([results[s][t][j] for s in range(self.servers)])
                for j in range(len(parent_cols) + len(child_cols))
            ]
            parent_part = per_col[:len(parent_cols)]
            if all(int(v.sum()) == 0 for v in parent_part):
                continue  # child join value absent from the parent
            left = self._decode_tuple(parent_schema, parent_part, parent_cols)
            right = self._decode_tuple(child_schema, per_col[len(parent_cols):],
                                       child_cols)
            rows.append(left + right)
        self.ledger.check("rounds", self.ledger.rounds, 1)
        self._finish()
        return rows

    def pkfk_join(self, parent: str, child: str, on: str):
        return self.run_pkfk_join(QueryPlan("pkfk_join", parent=parent,
                                            child=child, on=on))

    def _column_values_phase(self, relation: str, column: str) -> list[str]:
        """Transfer one column's payload shares and reconstruct its values."""
        schema = self._schema(relation)
        attr = schema.column_index(column)
        results = [eng.column_payload(relation, attr) for eng in self.engines]
        flat = self._interp(results)
        codec = schema.columns[attr].codec
        return [self._decode_cell(codec, row) for row in np.atleast_2d(flat)]

    def run_nonpkfk_join(self, plan: QueryPlan) -> list[tuple[str, ...]]:
        """General equi-join: reconstruct both join columns, then one
        padded fetch-and-concatenate round per common value."""
        x_schema = self._schema(plan.parent)
        y_schema = self._schema(plan.child)
        if RID_PERMUTED in (x_schema.rid_mode, y_schema.rid_mode):
            raise CoordinatorError("join planning needs sequential row-ids")
        xj, yj = self._join_columns(plan.parent, plan.child, plan.on)
        self._require("join", x_schema.columns[xj].codec.width)
        rid_w = max(x_schema.columns[x_schema.rid_index].codec.width,
                    y_schema.columns[y_schema.rid_index].codec.width)
        self._require("fetch", rid_w)
        self._begin("nonpkfk_join", parent=plan.parent, child=plan.child,
                    on=plan.on, n_parent=x_schema.rows, n_child=y_schema.rows)

        x_values = self._column_values_phase(plan.parent, plan.on)
        y_values = self._column_values_phase(plan.child, plan.on)
        self.ledger.phase(
            "join_values", 0,
            x_schema.rows * self._payload_width(x_schema, [xj])
            + y_schema.rows * self._payload_width(y_schema, [yj]),
        )

        x_map: dict[str, list[int]] = {}
        for i, v in enumerate(x_values):
            x_map.setdefault(v, []).append(i + 1)
        y_map: dict[str, list[int]] = {}
        for i, v in enumerate(y_values):
            y_map.setdefault(v, []).append(i + 1)
        common = sorted(set(x_map) & set(y_map))
        k = len(common)

        x_pad = max((len(x_map[v]) for v in common), default=1)
        y_pad = max((len(y_map[v]) for v in common), default=1)

        x_cols = list(range(len(x_schema.data_columns)))
        y_cols = [j for j, _ in enumerate(y_schema.data_columns) if j != yj]
        x_rid_codec = x_schema.columns[x_schema.rid_index].codec
        y_rid_codec = y_schema.columns[y_schema.rid_index].codec

        rows: list[tuple[str, ...]] = []
        rounds_for_values = list(common) + [None] * plan.fake_join_values
        for value in rounds_for_values:
            if value is None:
                x_rids: list[int] = []
                y_rids: list[int] = []
            else:
                x_rids = x_map[value]
                y_rids = y_map[value]
            if plan.uniform_fetch:
                x_slots, y_slots = x_pad, y_pad
            else:
                x_slots, y_slots = max(len(x_rids), 1), max(len(y_rids), 1)
            if len(x_rids) > x_slots or len(y_rids) > y_slots:
                raise PaddingTooSmall("per-value fetch pad too small")
            x_vec = x_rids + self._fake_rids(x_schema, x_slots - len(x_rids),
                                             set(x_rids))
            y_vec = y_rids + self._fake_rids(y_schema, y_slots - len(y_rids),
                                             set(y_rids))
            x_words = np.stack([x_rid_codec.encode_unary(str(r))
                                for r in x_vec])
            y_words = np.stack([y_rid_codec.encode_unary(str(r))
                                for r in y_vec])
            x_shared = self._share_bits(x_words)
            y_shared = self._share_bits(y_words)
            results = []
            for s, eng in enumerate(self.engines):
                qx = QueryShares(kind="fetch", relation=plan.parent,
                                 fetch=x_shared[s])
                qy = QueryShares(kind="fetch", relation=plan.child,
                                 attr=yj, fetch=y_shared[s])
                results.append(eng.fetch_join_pair(qx, qy))
            down = x_slots * y_slots * (
                self._payload_width(x_schema, x_cols)
                + self._payload_width(y_schema, y_cols)
            )
            self.ledger.phase("join_value_fetch",
                              x_slots * x_rid_codec.coords
                              + y_slots * y_rid_codec.coords, down)
            for xi in range(x_slots):
                for yi in range(y_slots):
                    t = xi * y_slots + yi
                    if xi >= len(x_rids) or yi >= len(y_rids):
                        continue  # padding slot, known to the user
                    per_col = [
                        self._interp([results[s][t][j]
                                      for s in range(self.servers)])
                        for j in range(len(x_cols) + len(y_cols))
                    ]
                    left = self._decode_tuple(x_schema,
                                              per_col[:len(x_cols)], x_cols)
                    right = self._decode_tuple(y_schema,
                                               per_col[len(x_cols):], y_cols)
                    rows.append(left + right)

        self.ledger.params["common_values"] = k
        self.ledger.check("theorem_join_rounds", self.ledger.rounds,
                          2 * k + 2)
        self._finish()
        return rows

    def nonpkfk_join(self, parent: str, child: str, on: str, **kw):
        return self.run_nonpkfk_join(
            QueryPlan("nonpkfk_join", parent=parent, child=child, on=on, **kw))

    # ------------------------------------------------------------------
    # range queries
    # ------------------------------------------------------------------

    def _range_queries(self, kind: str, relation: str, column: str,
                       low: int, high: int,
                       mode: str) -> tuple[list[QueryShares], int, int]:
        schema = self._schema(relation)
        attr = schema.column_index(column)
        codec = schema.columns[attr].codec
        if not codec.range_bits:
            raise CoordinatorError(
                f"column {column!r} was not shared with a binary form"
            )
        if low > high:
            raise CoordinatorError(f"empty range [{low}, {high}]")
        bits = codec.range_bits
        low_shared = self._share_bits(codec.encode_binary(str(low)))
        high_shared = self._share_bits(codec.encode_binary(str(high)))
        queries = [
            QueryShares(kind=kind, relation=relation, attr=attr,
                        bound_low=low_shared[i], bound_high=high_shared[i],
                        range_mode=mode)
            for i in range(self.servers)
        ]
        return queries, bits, attr

    def run_range_count(self, plan: QueryPlan) -> int:
        """In-range multiplicity: one round, one element down."""
        schema = self._schema(plan.relation)
        self._begin("range_count", relation=plan.relation, column=plan.column,
                    low=plan.low, high=plan.high, mode=plan.range_mode,
                    n=schema.rows)
        queries, bits, _ = self._range_queries("range_count", plan.relation,
                                               plan.column, plan.low,
                                               plan.high, plan.range_mode)
        self._require("range_count", bits)
        results = [eng.range_count(q) for eng, q in zip(self.engines, queries)]
        self.ledger.phase("range_count", 2 * bits, 1)
        total = self._interp_scalar(results)
        if plan.range_mode == "sum-signs":
            total = schema.rows - total
        self.ledger.check("rounds", self.ledger.rounds, 1)
        self.ledger.check("elements_down", self.ledger.elements_down, 1)
        self._finish()
        return total

    def range_count(self, relation: str, column: str, low: int, high: int,
                    mode: str = "eq2") -> int:
        return self.run_range_count(QueryPlan(
            "range_count", relation, column, low=low, high=high,
            range_mode=mode))

    def run_range_select(self, plan: QueryPlan) -> list[tuple[str, ...]]:
        """Range-mark round plus one padded fetch round."""
        schema = self._schema(plan.relation)
        if schema.rid_mode != RID_SEQUENTIAL:
            raise CoordinatorError("range selection needs sequential row-ids")
        self._begin("range_select", relation=plan.relation, column=plan.column,
                    low=plan.low, high=plan.high, mode=plan.range_mode,
                    n=schema.rows, fetch_pad=plan.fetch_pad)
        queries, bits, _ = self._range_queries("range_mark", plan.relation,
                                               plan.column, plan.low,
                                               plan.high, plan.range_mode)
        self._require("range_select", bits)
        results = [eng.range_mark(q) for eng, q in zip(self.engines, queries)]
        self.ledger.phase("range_mark", 2 * bits, schema.rows)
        flags = self._interp(results)
        want = 1 if plan.range_mode == "eq2" else 0
        rids = [i + 1 for i, flag in enumerate(flags) if int(flag) == want]
        rows = self._fetch_phase(plan.relation, rids, plan.fetch_pad)
        self.ledger.params["matches"] = len(rids)
        self.ledger.check("rounds", self.ledger.rounds, 2)
        self.ledger.check("phase1_elements_down",
                          self.ledger.phases[0]["down"], schema.rows)
        self._finish()
        return rows

    def range_select(self, relation: str, column: str, low: int, high: int,
                     mode: str = "eq2", **kw) -> list[tuple[str, ...]]:
        return self.run_range_select(QueryPlan(
            "range_select", relation, column, low=low, high=high,
            range_mode=mode, **kw))
