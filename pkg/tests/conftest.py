"""Shared fixtures: worked-example relations shared once per session."""

import numpy as np
import pytest

from shareql import datagen, owner
from shareql.coordinator import Coordinator
from shareql.sss import SharingParams


def share_bits(bits, servers, rng, prime=15_000_017):
    """Degree-1 sharing of a 0/1 (or small-int) array for test inputs.

    Returns shape (servers,) + bits.shape; coefficient per entry drawn
    uniformly from [1, prime).
    """
    bits = np.asarray(bits, dtype=np.int64)
    coeffs = rng.integers(1, prime, size=bits.shape, dtype=np.int64)
    xs = np.arange(1, servers + 1, dtype=np.int64).reshape(
        (servers,) + (1,) * bits.ndim)
    return (bits[None, ...] + coeffs[None, ...] * xs) % prime


@pytest.fixture(scope="session")
def employee():
    return datagen.employee()


@pytest.fixture(scope="session")
def employee_shares(employee):
    return owner.share_relation(employee, SharingParams(servers=12, seed=42))


@pytest.fixture()
def employee_coord(employee_shares):
    return Coordinator({"Employee": employee_shares}, seed=7)


@pytest.fixture(scope="session")
def tablex():
    return datagen.join_pair()


@pytest.fixture(scope="session")
def tablex_shares(tablex):
    x, y = tablex
    return owner.share_relations([x, y], SharingParams(servers=8, seed=3),
                                 join_on=[("X", "B", "Y", "B")])


@pytest.fixture()
def tablex_coord(tablex_shares):
    return Coordinator(tablex_shares, seed=5)
