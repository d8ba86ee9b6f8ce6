"""Share-relation containers and the on-disk share-file format.

Each of the c servers gets one file.  The format is line-oriented decimal
text so share files stay human-diffable and language-neutral:

    line 1   header:  SSSv1 prime=<P> server=<k> degree=<d> n=<n> m=<m>
                      alphabet=<spec;spec;...> widths=<w1,...> hash=<id>
                      name=<rel> rid_mode=<seq|permuted> rid_space=<x>
                      perm=<-|i,i,...>
    line 2+  one line per tuple: cells separated by '|', shares within a
             cell separated by single spaces
    last     check=<sha256 of all preceding lines>

Cell order per row: the unary block of every attribute (RID last), then a
one-share compact cell for every compact-enabled attribute, then the
binary block of every range-enabled attribute.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import ColumnCodec
from .field import PrimeField

RID_NAME = "RID"

RID_SEQUENTIAL = "seq"
RID_PERMUTED = "permuted"


class StorageError(ValueError):
    """Base class for share-file errors."""


class CorruptFile(StorageError):
    """Checksum or structural failure while reading a share file."""


class PrimeMismatch(StorageError):
    """Share file written under a different field modulus."""


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    codec: ColumnCodec


@dataclass(frozen=True)
class RelationSchema:
    """Public description of a shared relation (no secrets).

    ``columns`` lists the data attributes followed by the RID attribute.
    ``rid_space`` is the largest real row-id value; fake row-ids used for
    fetch padding are drawn strictly above it.  ``permutation`` is only
    set in permuted-RID mode and is applied by every server to the
    match-times-RID vector before answering.
    """

    name: str
    prime: int
    degree: int
    rows: int
    columns: tuple[ColumnSchema, ...]
    rid_mode: str = RID_SEQUENTIAL
    rid_space: int = 0
    hash_algorithm: str = "sha256"
    permutation: tuple[int, ...] | None = None

    @property
    def rid_index(self) -> int:
        return len(self.columns) - 1

    @property
    def data_columns(self) -> tuple[ColumnSchema, ...]:
        return self.columns[:-1]

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise StorageError(f"no attribute {name!r} in relation {self.name!r}")


@dataclass
class SharedRelation:
    """One server's view of a relation: share values only, plus the schema.

    unary[j] has shape (n, columns[j].codec.coords); compact[j] is (n,) or
    None; binary[j] is (n, range_bits) or None.
    """

    server: int
    schema: RelationSchema
    unary: list[np.ndarray]
    compact: list[np.ndarray | None]
    binary: list[np.ndarray | None]

    def validate(self) -> None:
        n = self.schema.rows
        if len(self.unary) != len(self.schema.columns):
            raise StorageError("one unary block per attribute required")
        for block, col in zip(self.unary, self.schema.columns):
            if block.shape != (n, col.codec.coords):
                raise StorageError(
                    f"column {col.name!r}: unary block shape {block.shape} "
                    f"!= {(n, col.codec.coords)}"
                )
        for blk, col in zip(self.compact, self.schema.columns):
            if col.codec.compact != (blk is not None):
                raise StorageError(f"column {col.name!r}: compact block mismatch")
            if blk is not None and blk.shape != (n,):
                raise StorageError(f"column {col.name!r}: bad compact shape")
        for blk, col in zip(self.binary, self.schema.columns):
            if bool(col.codec.range_bits) != (blk is not None):
                raise StorageError(f"column {col.name!r}: binary block mismatch")
            if blk is not None and blk.shape != (n, col.codec.range_bits):
                raise StorageError(f"column {col.name!r}: bad binary shape")

    def shape_signature(self) -> tuple:
        """Layout fingerprint; identical across all c servers of one relation."""
        return (
            self.schema.rows,
            tuple(b.shape for b in self.unary),
            tuple(None if b is None else b.shape for b in self.compact),
            tuple(None if b is None else b.shape for b in self.binary),
        )


def _header_line(rel: SharedRelation) -> str:
    s = rel.schema
    perm = "-" if s.permutation is None else ",".join(map(str, s.permutation))
    fields = [
        "SSSv1",
        f"prime={s.prime}",
        f"server={rel.server}",
        f"degree={s.degree}",
        f"n={s.rows}",
        f"m={len(s.data_columns)}",
        f"name={s.name}",
        f"alphabet={';'.join(c.codec.header_spec() for c in s.columns)}",
        f"widths={','.join(str(c.codec.width) for c in s.columns)}",
        f"hash={s.hash_algorithm}",
        f"columns={','.join(c.name for c in s.columns)}",
        f"rid_mode={s.rid_mode}",
        f"rid_space={s.rid_space}",
        f"perm={perm}",
    ]
    return " ".join(fields)


def write_share_file(rel: SharedRelation, path) -> Path:
    rel.validate()
    lines = [_header_line(rel)]
    n = rel.schema.rows
    for i in range(n):
        cells = [" ".join(map(str, block[i])) for block in rel.unary]
        cells += [str(int(blk[i])) for blk in rel.compact if blk is not None]
        cells += [" ".join(map(str, blk[i])) for blk in rel.binary if blk is not None]
        lines.append("|".join(cells))
    body = "\n".join(lines)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    path = Path(path)
    path.write_text(body + f"\ncheck={digest}\n", encoding="utf-8")
    return path


def _parse_header(line: str) -> tuple[RelationSchema, int]:
    parts = line.split(" ")
    if not parts or parts[0] != "SSSv1":
        raise CorruptFile("missing SSSv1 header")
    kv = {}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        kv[key] = value
    try:
        prime = int(kv["prime"])
        server = int(kv["server"])
        specs = kv["alphabet"].split(";")
        names = kv["columns"].split(",")
        perm = (None if kv["perm"] == "-"
                else tuple(int(x) for x in kv["perm"].split(",")))
        schema = RelationSchema(
            name=kv["name"],
            prime=prime,
            degree=int(kv["degree"]),
            rows=int(kv["n"]),
            columns=tuple(
                ColumnSchema(name, ColumnCodec.parse(spec))
                for name, spec in zip(names, specs, strict=True)
            ),
            rid_mode=kv["rid_mode"],
            rid_space=int(kv["rid_space"]),
            hash_algorithm=kv["hash"],
            permutation=perm,
        )
    except (KeyError, ValueError) as exc:
        raise CorruptFile(f"malformed header: {exc}") from exc
    if int(kv["m"]) != len(schema.data_columns):
        raise CorruptFile("attribute count disagrees with column list")
    return schema, server


def read_share_file(path, expected_prime: int | None = None) -> SharedRelation:
    """Parse one server's share file, verifying prime and checksum."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if len(lines) < 2 or not lines[-1].startswith("check="):
        raise CorruptFile(f"{path}: missing checksum line")
    schema, server = _parse_header(lines[0])
    if expected_prime is not None and schema.prime != expected_prime:
        raise PrimeMismatch(
            f"{path}: file prime {schema.prime} != expected {expected_prime}"
        )
    PrimeField(schema.prime)  # composite modulus counts as corruption
    body = "\n".join(lines[:-1])
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if lines[-1] != f"check={digest}":
        raise CorruptFile(f"{path}: checksum mismatch")

    rows = lines[1:-1]
    if len(rows) != schema.rows:
        raise CorruptFile(f"{path}: expected {schema.rows} tuples, found {len(rows)}")
    cols = schema.columns
    compact_cols = [j for j, c in enumerate(cols) if c.codec.compact]
    binary_cols = [j for j, c in enumerate(cols) if c.codec.range_bits]
    cells_per_row = len(cols) + len(compact_cols) + len(binary_cols)

    unary = [np.empty((schema.rows, c.codec.coords), dtype=np.int64) for c in cols]
    compact: list[np.ndarray | None] = [
        np.empty(schema.rows, dtype=np.int64) if c.codec.compact else None
        for c in cols
    ]
    binary: list[np.ndarray | None] = [
        np.empty((schema.rows, c.codec.range_bits), dtype=np.int64)
        if c.codec.range_bits else None
        for c in cols
    ]
    try:
        for i, row in enumerate(rows):
            cells = row.split("|")
            if len(cells) != cells_per_row:
                raise CorruptFile(f"{path}: row {i + 1} has {len(cells)} cells")
            k = 0
            for j in range(len(cols)):
                unary[j][i] = np.array(cells[k].split(" "), dtype=np.int64)
                k += 1
            for j in compact_cols:
                compact[j][i] = int(cells[k])
                k += 1
            for j in binary_cols:
                binary[j][i] = np.array(cells[k].split(" "), dtype=np.int64)
                k += 1
    except (ValueError, CorruptFile) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc

    rel = SharedRelation(server=server, schema=schema, unary=unary,
                         compact=compact, binary=binary)
    try:
        rel.validate()
    except StorageError as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    return rel


def share_file_name(relation: str, server: int) -> str:
    return f"{relation}.s{server:02d}.shares"


def write_share_files(shareds, directory) -> list[Path]:
    """Write one file per server under ``directory``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for rel in shareds:
        paths.append(
            write_share_file(rel, directory / share_file_name(rel.schema.name,
                                                              rel.server))
        )
    return paths


def load_share_dir(directory) -> dict[str, list[SharedRelation]]:
    """Load every share file in a directory, grouped by relation name.

    All files must agree on the prime; per relation, all servers must
    agree on shape.
    """
    directory = Path(directory)
    paths = sorted(directory.glob("*.shares"))
    if not paths:
        raise StorageError(f"no .shares files under {directory}")
    groups: dict[str, list[SharedRelation]] = {}
    prime = None
    for p in paths:
        rel = read_share_file(p, expected_prime=prime)
        prime = rel.schema.prime
        groups.setdefault(rel.schema.name, []).append(rel)
    for name, rels in groups.items():
        rels.sort(key=lambda r: r.server)
        sigs = {r.shape_signature() for r in rels}
        if len(sigs) != 1:
            raise CorruptFile(f"relation {name!r}: servers disagree on shape")
        xs = [r.server for r in rels]
        if len(set(xs)) != len(xs):
            raise CorruptFile(f"relation {name!r}: duplicate server indexes")
    return groups
