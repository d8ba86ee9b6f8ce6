"""Prime-field arithmetic and interpolation against independent oracles."""

import numpy as np
import pytest

from shareql.field import (
    DEFAULT_PRIME,
    DuplicateX,
    NotPrime,
    PrimeField,
    ZeroInverse,
    is_prime,
)

F = PrimeField(DEFAULT_PRIME)
F7 = PrimeField(7)


def test_default_prime_is_prime():
    assert is_prime(DEFAULT_PRIME)


@pytest.mark.parametrize("n,expect", [
    (0, False), (1, False), (2, True), (3, True), (4, False),
    (15_000_017, True), (15_000_015, False), (2**31 - 1, True),
    (7919 * 7927, False),
])
def test_is_prime(n, expect):
    assert is_prime(n) is expect


def test_composite_modulus_rejected():
    with pytest.raises(NotPrime):
        PrimeField(15_000_015)


def test_add_identity():
    for x in (0, 1, 123456, DEFAULT_PRIME - 1):
        assert F.add(0, x) == x


def test_mul_wraps_at_modulus():
    # checked against arbitrary-precision integers
    assert F.mul(15_000_016, 2) == (15_000_016 * 2) % 15_000_017 == 15_000_015


def test_sub_small_modulus():
    assert F7.sub(3, 5) == 5


def test_inverse_examples():
    assert F.inverse(1) == 1
    assert F7.inverse(2) == 4  # 2*4 = 8 = 1 mod 7


def test_inverse_of_zero_raises():
    with pytest.raises(ZeroInverse):
        F.inverse(0)


def test_inverse_property_random():
    rng = np.random.default_rng(11)
    for a in rng.integers(1, DEFAULT_PRIME, size=1000):
        assert F.mul(int(a), F.inverse(int(a))) == 1


def test_vector_ops_match_bigint_oracle():
    # 10^5 random operand pairs through the int64 fast path vs Python ints
    rng = np.random.default_rng(5)
    a = rng.integers(0, DEFAULT_PRIME, size=100_000)
    b = rng.integers(0, DEFAULT_PRIME, size=100_000)
    vmul = F.vmul(a, b)
    vadd = F.vadd(a, b)
    vsub = F.vsub(a, b)
    step = 997  # spot-check a spread of indexes exactly with big ints
    for i in range(0, 100_000, step):
        ai, bi = int(a[i]), int(b[i])
        assert int(vmul[i]) == (ai * bi) % DEFAULT_PRIME
        assert int(vadd[i]) == (ai + bi) % DEFAULT_PRIME
        assert int(vsub[i]) == (ai - bi) % DEFAULT_PRIME
    # and in aggregate against object-dtype exact arithmetic
    ao, bo = a.astype(object), b.astype(object)
    assert np.array_equal(vmul, (ao * bo) % DEFAULT_PRIME)
    assert np.array_equal(vadd, (ao + bo) % DEFAULT_PRIME)
    assert np.array_equal(vsub, (ao - bo) % DEFAULT_PRIME)


def test_worked_interpolation_transcript():
    # five server outputs of the two-symbol match reconstruct to exactly 1
    points = [(1, 2028), (2, 26505), (3, 125632), (4, 384345), (5, 920316)]
    assert F.interpolate_at_zero(points) == 1


def test_single_point_is_constant_polynomial():
    assert F.interpolate_at_zero([(1, 1234)]) == 1234


def test_duplicate_x_rejected():
    with pytest.raises(DuplicateX):
        F.interpolate_at_zero([(1, 5), (1, 6)])
    with pytest.raises(DuplicateX):
        F.interpolate_columns([1, 1], np.zeros((2, 3), dtype=np.int64))


def test_interpolation_roundtrip_degree3():
    # forward-evaluate random cubics, recover the constant term
    rng = np.random.default_rng(13)
    for _ in range(500):
        coeffs = [int(c) for c in rng.integers(0, DEFAULT_PRIME, size=4)]
        pts = []
        for x in range(1, 5):
            y = 0
            for c in reversed(coeffs):
                y = (y * x + c) % DEFAULT_PRIME
            pts.append((x, y))
        assert F.interpolate_at_zero(pts) == coeffs[0]


def test_interpolate_columns_matches_scalar_path():
    rng = np.random.default_rng(17)
    ys = rng.integers(0, DEFAULT_PRIME, size=(4, 50))
    xs = [1, 2, 3, 4]
    cols = F.interpolate_columns(xs, ys)
    for j in range(50):
        pts = [(x, int(ys[i, j])) for i, x in enumerate(xs)]
        assert int(cols[j]) == F.interpolate_at_zero(pts)
