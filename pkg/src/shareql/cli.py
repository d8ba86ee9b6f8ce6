"""Command-line front end: share a CSV, run queries over share files,
verify against the cleartext oracle, and micro-benchmark.

Exit codes: 0 success/match, 1 verification mismatch, 2 usage error,
3 data error (malformed input, corrupt share files, unsupported query).
"""

from __future__ import annotations

import csv
import io
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import datagen, oracle
from .codec import CodecError
from .coordinator import Coordinator, CoordinatorError, QueryPlan
from .engine import EngineError
from .owner import OwnerError, Relation, share_relations
from .sss import SSSError, SharingParams
from .storage import StorageError, write_share_files

DATA_ERRORS = (OwnerError, StorageError, CoordinatorError, EngineError,
               CodecError, SSSError, OSError)


def _fail(message: str, code: int = 3):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_csv(spec: str) -> Relation:
    name, _, path = spec.rpartition("=")
    path = Path(path)
    if not name:
        name = path.stem
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if len(rows) < 2:
        raise OwnerError(f"{path}: need a header row and at least one tuple")
    return Relation.build(name, rows[0], rows[1:])


def _write_rows(rows, header=None) -> None:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    click.echo(out.getvalue(), nl=False)


def _emit_report(coord: Coordinator, report_path) -> None:
    ledger = coord.cost_report()
    click.echo(ledger.as_text(), err=True)
    if report_path:
        Path(report_path).write_text(
            json.dumps(ledger.as_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def _parse_where(where: str) -> tuple[str, str]:
    column, sep, value = where.partition("=")
    if not sep or not column:
        raise click.UsageError("--where expects COLUMN=VALUE")
    return column, value


@click.group()
def main():
    """Secret-shared SQL over simulated non-communicating servers."""


# ---------------------------------------------------------------------------
# data generation and sharing
# ---------------------------------------------------------------------------


@main.command()
@click.option("--dataset", required=True,
              type=click.Choice(sorted(datagen.BUILTIN)))
@click.option("--rows", type=int, default=0, help="Row count where applicable.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def gen(dataset, rows, out_dir):
    """Write built-in cleartext fixtures as CSV files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    relations = (datagen.BUILTIN[dataset](rows) if rows
                 else datagen.BUILTIN[dataset]())
    for rel in relations:
        path = out / f"{rel.name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(rel.attributes)
            writer.writerows(rel.rows)
        click.echo(f"wrote {path}")


@main.command()
@click.option("--input", "inputs", multiple=True, required=True,
              help="CSV path, optionally NAME=path; repeatable.")
@click.option("--servers", type=int, required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--rid-mode", type=click.Choice(["seq", "permuted"]),
              default="seq", show_default=True)
@click.option("--range-columns", default="",
              help="Comma list of REL:COL (or COL) to also share in binary form.")
@click.option("--hash-columns", default="",
              help="Comma list of REL:COL=digits to digest-map before encoding.")
@click.option("--join-on", "join_specs", multiple=True,
              help="RELA:COLA=RELB:COLB; aligns the two columns' codecs.")
@click.option("--compact/--no-compact", default=True, show_default=True,
              help="Emit one-share compact payload columns where they fit.")
def share(inputs, servers, out_dir, seed, rid_mode, range_columns,
          hash_columns, join_specs, compact):
    """Secret-share CSV relations into per-server share files."""
    try:
        relations = [_read_csv(spec) for spec in inputs]
        names = [r.name for r in relations]

        def locate(token: str, default_only: bool) -> tuple[str, str]:
            rel, sep, col = token.partition(":")
            if not sep:
                if len(names) != 1 and default_only:
                    raise click.UsageError(
                        f"{token!r}: qualify as REL:COL with several inputs")
                return names[0], rel
            return rel, col

        options: dict[str, dict[str, dict]] = {}
        for token in filter(None, range_columns.split(",")):
            rel, col = locate(token.strip(), True)
            options.setdefault(rel, {}).setdefault(col, {})["range"] = True
        for token in filter(None, hash_columns.split(",")):
            spec, _, digits = token.strip().partition("=")
            rel, col = locate(spec, True)
            options.setdefault(rel, {}).setdefault(col, {})["hash_digits"] = \
                int(digits or 8)
        if not compact:
            for rel in relations:
                for col in rel.attributes:
                    options.setdefault(rel.name, {}).setdefault(col, {})[
                        "compact"] = False

        join_on = []
        for spec in join_specs:
            left, sep, right = spec.partition("=")
            if not sep:
                raise click.UsageError("--join-on expects RELA:COLA=RELB:COLB")
            ra, ca = left.split(":")
            rb, cb = right.split(":")
            join_on.append((ra, ca, rb, cb))

        params = SharingParams(servers=servers, seed=seed)
        shared = share_relations(relations, params, options=options,
                                 join_on=join_on, rid_mode=rid_mode)
        paths = []
        for rels in shared.values():
            paths += write_share_files(rels, out_dir)
    except click.UsageError:
        raise
    except DATA_ERRORS as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(paths)} share files to {out_dir}")


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------


def _shares_option(fn):
    fn = click.option("--shares", "shares_dir", required=True,
                      type=click.Path(exists=True))(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Seed for query-side share material.")(fn)
    fn = click.option("--report", "report_path", type=click.Path(),
                      default=None, help="Write the cost ledger as JSON.")(fn)
    return fn


def _load(shares_dir, seed) -> Coordinator:
    return Coordinator.from_dir(shares_dir, seed=seed)


def _single_relation(coord: Coordinator, relation: str | None) -> str:
    if relation:
        return relation
    if len(coord.schemas) == 1:
        return next(iter(coord.schemas))
    raise click.UsageError("several relations are shared; pass --relation")


@main.group()
def query():
    """Run a query over share files and print result rows as CSV."""


@query.command("count")
@_shares_option
@click.option("--relation", default=None)
@click.option("--where", required=True, help="COLUMN=VALUE")
def query_count(shares_dir, seed, report_path, relation, where):
    column, value = _parse_where(where)
    try:
        coord = _load(shares_dir, seed)
        rel = _single_relation(coord, relation)
        result = coord.count(rel, column, value)
    except DATA_ERRORS as exc:
        _fail(str(exc))
    _write_rows([[result]], header=["count"])
    _emit_report(coord, report_path)


@query.command("select")
@_shares_option
@click.option("--relation", default=None)
@click.option("--where", required=True, help="COLUMN=VALUE")
@click.option("--one-round/--tree", "one_round", default=True,
              help="Address-finding strategy for multi-tuple predicates.")
@click.option("--pad-fetch", type=int, default=None,
              help="Fixed fetch-vector length (default: next power of two).")
@click.option("--partition-policy", type=click.Choice(["all", "case4"]),
              default="all", show_default=True)
@click.option("--branching", type=int, default=None)
def query_select(shares_dir, seed, report_path, relation, where, one_round,
                 pad_fetch, partition_policy, branching):
    column, value = _parse_where(where)
    try:
        coord = _load(shares_dir, seed)
        rel = _single_relation(coord, relation)
        rows = coord.select(rel, column, value,
                            strategy="one-round" if one_round else "tree",
                            fetch_pad=pad_fetch,
                            partition_policy=partition_policy,
                            branching=branching)
        header = coord.schemas[rel].attribute_names
    except DATA_ERRORS as exc:
        _fail(str(exc))
    _write_rows(rows, header=header)
    _emit_report(coord, report_path)


@query.command("join")
@_shares_option
@click.option("--parent", required=True)
@click.option("--child", required=True)
@click.option("--on", "join_col", required=True)
@click.option("--non-pkfk", is_flag=True, default=False,
              help="General equi-join instead of the key/foreign-key path.")
@click.option("--fake-values", type=int, default=0, show_default=True,
              help="Extra all-fake per-value rounds (non-PK/FK only).")
@click.option("--uniform-fetch/--no-uniform-fetch", default=True,
              show_default=True)
def query_join(shares_dir, seed, report_path, parent, child, join_col,
               non_pkfk, fake_values, uniform_fetch):
    try:
        coord = _load(shares_dir, seed)
        if non_pkfk:
            rows = coord.nonpkfk_join(parent, child, join_col,
                                      fake_join_values=fake_values,
                                      uniform_fetch=uniform_fetch)
        else:
            rows = coord.pkfk_join(parent, child, join_col)
        ps, cs = coord.schemas[parent], coord.schemas[child]
        header = [c.name for c in ps.data_columns]
        header += [c.name for c in cs.data_columns if c.name != join_col]
    except DATA_ERRORS as exc:
        _fail(str(exc))
    _write_rows(rows, header=header)
    _emit_report(coord, report_path)


@query.command("range")
@_shares_option
@click.option("--relation", default=None)
@click.option("--column", required=True)
@click.option("--low", type=int, required=True)
@click.option("--high", type=int, required=True)
@click.option("--count-only", is_flag=True, default=False)
@click.option("--range-mode", type=click.Choice(["eq2", "sum-signs"]),
              default="eq2", show_default=True)
@click.option("--pad-fetch", type=int, default=None)
def query_range(shares_dir, seed, report_path, relation, column, low, high,
                count_only, range_mode, pad_fetch):
    try:
        coord = _load(shares_dir, seed)
        rel = _single_relation(coord, relation)
        if count_only:
            result = coord.range_count(rel, column, low, high, mode=range_mode)
            _write_rows([[result]], header=["count"])
        else:
            rows = coord.range_select(rel, column, low, high, mode=range_mode,
                                      fetch_pad=pad_fetch)
            _write_rows(rows, header=coord.schemas[rel].attribute_names)
    except DATA_ERRORS as exc:
        _fail(str(exc))
    _emit_report(coord, report_path)


# ---------------------------------------------------------------------------
# verification against the cleartext oracle
# ---------------------------------------------------------------------------


def _verdict(label: str, got, want) -> None:
    if got == want:
        click.echo(f"MATCH {label}: {got}")
        sys.exit(0)
    click.echo(f"MISMATCH {label}: shares={got!r} oracle={want!r}", err=True)
    sys.exit(1)


@main.group()
def verify():
    """Run a query on shares and on cleartext, and diff the results."""


@verify.command("count")
@_shares_option
@click.option("--input", "input_spec", required=True,
              help="Cleartext CSV ([NAME=]path).")
@click.option("--relation", default=None)
@click.option("--where", required=True)
def verify_count(shares_dir, seed, report_path, input_spec, relation, where):
    column, value = _parse_where(where)
    try:
        clear = _read_csv(input_spec)
        coord = _load(shares_dir, seed)
        rel = _single_relation(coord, relation)
        got = coord.count(rel, column, value)
    except DATA_ERRORS as exc:
        _fail(str(exc))
    _emit_report(coord, report_path)
    _verdict(f"count {where}", got, oracle.count(clear, column, value))


@verify.command("select")
@_shares_option
@click.option("--input", "input_spec", required=True)
@click.option("--relation", default=None)
@click.option("--where", required=True)
@click.option("--one-round/--tree", "one_round", default=True)
@click.option("--pad-fetch", type=int, default=None)
def verify_select(shares_dir, seed, report_path, input_spec, relation, where,
                  one_round, pad_fetch):
    column, value = _parse_where(where)
    try:
        clear = _read_csv(input_spec)
        coord = _load(shares_dir, seed)
        rel = _single_relation(coord, relation)
        got = coord.select(rel, column, value,
                           strategy="one-round" if one_round else "tree",
                           fetch_pad=pad_fetch)
    except DATA_ERRORS as exc:
        _fail(str(exc))
    _emit_report(coord, report_path)
    _verdict(f"select {where}", sorted(got),
             sorted(oracle.select(clear, column, value)))


@verify.command("join")
@_shares_option
@click.option("--input", "input_specs", multiple=True, required=True,
              help="Cleartext CSVs for both relations; repeat the option.")
@click.option("--parent", required=True)
@click.option("--child", required=True)
@click.option("--on", "join_col", required=True)
@click.option("--non-pkfk", is_flag=True, default=False)
def verify_join(shares_dir, seed, report_path, input_specs, parent, child,
                join_col, non_pkfk):
    try:
        clear = {rel.name: rel for rel in map(_read_csv, input_specs)}
        coord = _load(shares_dir, seed)
        if non_pkfk:
            got = coord.nonpkfk_join(parent, child, join_col)
        else:
            got = coord.pkfk_join(parent, child, join_col)
        want = oracle.equijoin(clear[parent], clear[child], join_col)
    except DATA_ERRORS as exc:
        _fail(str(exc))
    except KeyError as exc:
        _fail(f"no cleartext input for relation {exc}")
    _emit_report(coord, report_path)
    _verdict(f"join {parent}*{child} on {join_col}", sorted(got), sorted(want))


@verify.command("range")
@_shares_option
@click.option("--input", "input_spec", required=True)
@click.option("--relation", default=None)
@click.option("--column", required=True)
@click.option("--low", type=int, required=True)
@click.option("--high", type=int, required=True)
@click.option("--count-only", is_flag=True, default=False)
@click.option("--range-mode", type=click.Choice(["eq2", "sum-signs"]),
              default="eq2")
def verify_range(shares_dir, seed, report_path, input_spec, relation, column,
                 low, high, count_only, range_mode):
    try:
        clear = _read_csv(input_spec)
        coord = _load(shares_dir, seed)
        rel = _single_relation(coord, relation)
        if count_only:
            got = coord.range_count(rel, column, low, high, mode=range_mode)
            want = oracle.range_count(clear, column, low, high)
        else:
            got = sorted(coord.range_select(rel, column, low, high,
                                            mode=range_mode))
            want = sorted(oracle.range_select(clear, column, low, high))
    except DATA_ERRORS as exc:
        _fail(str(exc))
    _emit_report(coord, report_path)
    _verdict(f"range [{low},{high}] on {column}", got, want)


# ---------------------------------------------------------------------------
# micro-benchmark
# ---------------------------------------------------------------------------


@main.command()
@click.option("--rows", type=int, default=100_000, show_default=True)
@click.option("--steps", type=int, default=5, show_default=True,
              help="Number of relation sizes on the scaling grid.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
def bench(rows, steps, seed, report_path):
    """Count-query micro-benchmark with an op-count linearity check."""
    from .bench import run_count_bench

    try:
        result = run_count_bench(rows=rows, steps=steps, seed=seed)
    except DATA_ERRORS as exc:
        _fail(str(exc))
    for line in result.table():
        click.echo(line)
    click.echo(f"count over {rows} rows: {result.query_seconds:.3f}s "
               f"(share generation {result.share_seconds:.3f}s)")
    click.echo(f"linear fit residual: {result.max_residual * 100:.3f}% "
               f"(ops per row {result.slope:.1f})")
    if report_path:
        Path(report_path).write_text(
            json.dumps(result.as_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    sys.exit(0 if result.query_seconds < 10.0 and result.max_residual <= 0.05
             else 1)
