"""Micro-benchmark: count-query timing and op-count scaling in the row count.

Desk-scale stand-in for cluster wall-clock runs: shares a two-digit
numeric column at several sizes, times the count query single-threaded,
and fits reported server op-counts against the row count.  The protocol
does identical work per row, so the fit residual should be zero up to
the one-off predicate-share cost.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coordinator import Coordinator
from .owner import Relation, share_relation
from .sss import SharingParams, coefficient_rng


@dataclass
class BenchResult:
    sizes: list[int]
    ops: list[int]
    seconds: list[float]
    share_seconds: float
    query_seconds: float
    slope: float
    intercept: float
    max_residual: float

    def table(self) -> list[str]:
        lines = [f"{'rows':>10} {'server_ops':>14} {'seconds':>10}"]
        for n, ops, sec in zip(self.sizes, self.ops, self.seconds):
            lines.append(f"{n:>10} {ops:>14} {sec:>10.4f}")
        return lines

    def as_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "server_ops": self.ops,
            "seconds": self.seconds,
            "share_seconds": self.share_seconds,
            "query_seconds": self.query_seconds,
            "ops_per_row": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
        }


def _column_relation(rows: int, seed: int) -> Relation:
    rng = coefficient_rng(seed, "bench", rows)
    values = rng.integers(1, 26, size=rows)
    return Relation.build("Bench", ("NK",),
                          [(str(int(v)),) for v in values])


def _count_ops(rows: int, seed: int) -> tuple[int, float, float]:
    rel = _column_relation(rows, seed)
    t0 = time.perf_counter()
    shared = share_relation(rel, SharingParams(servers=5, seed=seed))
    t1 = time.perf_counter()
    coord = Coordinator({"Bench": shared}, seed=seed,
                        verify_consistency=False)
    t2 = time.perf_counter()
    coord.count("Bench", "NK", "7")
    t3 = time.perf_counter()
    ops = coord.cost_report().server_ops
    return (ops["field_adds"] + ops["field_muls"], t1 - t0, t3 - t2)


def run_count_bench(rows: int = 100_000, steps: int = 5,
                    seed: int = 0) -> BenchResult:
    sizes = [max(1, rows * (i + 1) // steps) for i in range(steps)]
    ops, seconds = [], []
    share_seconds = query_seconds = 0.0
    for n in sizes:
        total, share_s, query_s = _count_ops(n, seed)
        ops.append(total)
        seconds.append(query_s)
        if n == sizes[-1]:
            share_seconds, query_seconds = share_s, query_s
    slope, intercept = np.polyfit(np.asarray(sizes, dtype=float),
                                  np.asarray(ops, dtype=float), 1)
    fitted = slope * np.asarray(sizes, dtype=float) + intercept
    residual = float(np.max(np.abs(fitted - np.asarray(ops, dtype=float))
                            / np.asarray(ops, dtype=float)))
    return BenchResult(sizes=sizes, ops=ops, seconds=seconds,
                       share_seconds=share_seconds,
                       query_seconds=query_seconds,
                       slope=float(slope), intercept=float(intercept),
                       max_residual=residual)
