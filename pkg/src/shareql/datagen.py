"""Built-in cleartext fixtures and the TPC-H-like benchmark generator."""

from __future__ import annotations

import numpy as np

from .owner import Relation
from .sss import coefficient_rng


def employee() -> Relation:
    """The four-row worked example driving the count/selection transcripts."""
    return Relation.build(
        "Employee",
        ("EId", "FirstName", "LastName", "DateofBirth", "Salary", "Dept"),
        [
            ("E101", "Adam", "Smith", "12/07/1975", "1000", "Sale"),
            ("E102", "John", "Taylor", "10/30/1985", "2000", "Design"),
            ("E103", "Eve", "Smith", "05/07/1985", "500", "Sale"),
            ("E104", "John", "Williams", "04/04/1990", "5000", "Sale"),
        ],
    )


def join_pair() -> tuple[Relation, Relation]:
    """Parent X(A, B) with unique B, child Y(B, C); joined output has 4 rows."""
    x = Relation.build("X", ("A", "B"),
                       [("a1", "b1"), ("a2", "b2"), ("a3", "b3")])
    y = Relation.build("Y", ("B", "C"),
                       [("b1", "c1"), ("b2", "c2"), ("b2", "c3"), ("b2", "c4")])
    return x, y


def nation(rows: int = 25) -> Relation:
    rng = coefficient_rng(25, "nation")
    data = [
        (str(i + 1), str(i + 1), str(int(rng.integers(1, 6))))
        for i in range(rows)
    ]
    return Relation.build("Nation", ("NK", "NE", "RK"), data)


def customer(rows: int, seed: int = 7) -> Relation:
    rng = coefficient_rng(seed, "customer")
    data = [
        (
            str(i + 1),                              # CK
            str(int(rng.integers(1, rows + 1))),     # CN
            str(int(rng.integers(1, 26))),           # NK
            str(int(rng.integers(1, 6))),            # MS
        )
        for i in range(rows)
    ]
    return Relation.build("Customer", ("CK", "CN", "NK", "MS"), data)


def supplier(rows: int, seed: int = 11) -> Relation:
    rng = coefficient_rng(seed, "supplier")
    data = [
        (str(i + 1), str(int(rng.integers(1, rows + 1))),
         str(int(rng.integers(1, 26))))
        for i in range(rows)
    ]
    return Relation.build("Supplier", ("SK", "SN", "NK"), data)


def random_relation(rng: np.random.Generator, rows: int, cols: int,
                    name: str = "R", domain: int = 30) -> Relation:
    """Numeric relation with controllable value skew for oracle sweeps."""
    attributes = tuple(f"A{j + 1}" for j in range(cols))
    data = [
        tuple(str(int(rng.integers(1, domain + 1))) for _ in range(cols))
        for _ in range(rows)
    ]
    return Relation.build(name, attributes, data)


BUILTIN = {
    "employee": lambda rows=0: [employee()],
    "tablex": lambda rows=0: list(join_pair()),
    "nation": lambda rows=25: [nation(rows)],
    "customer": lambda rows=1000: [customer(rows)],
    "supplier": lambda rows=100: [supplier(rows)],
}
