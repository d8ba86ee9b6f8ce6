"""Share generation, reconstruction, degree tracking, and the hiding
properties of fresh per-occurrence polynomials."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shareql.field import DEFAULT_PRIME
from shareql.sss import (
    BadParams,
    InsufficientShares,
    Share,
    SharingParams,
    _shares_from_coeffs,
    coefficient_rng,
    degree_after,
    make_shares,
    reconstruct,
    required_share_count,
)
from conftest import share_bits


def test_forced_polynomial_row():
    # secret 1 on the line 1 + x gives consecutive shares at x = 1..5
    shares = _shares_from_coeffs(1, [1], 5)
    assert [(s.x, s.value) for s in shares] == [
        (1, 2), (2, 3), (3, 4), (4, 5), (5, 6)]


def test_zero_secret_zero_coefficients():
    shares = _shares_from_coeffs(0, [0], 5)
    assert all(s.value == 0 for s in shares)


def test_roundtrip_random_secrets():
    rng = coefficient_rng(21, "roundtrip")
    params = SharingParams(servers=5, degree=2, seed=None)
    for secret in rng.integers(0, DEFAULT_PRIME, size=1000):
        shares = make_shares(int(secret), params, rng=rng)
        assert reconstruct(shares) == int(secret)
        # any degree+1 subset reconstructs too
        assert reconstruct(shares[:3]) == int(secret)


def test_bad_params():
    with pytest.raises(BadParams):
        SharingParams(servers=2, degree=2)
    with pytest.raises(BadParams):
        SharingParams(servers=3, degree=0)


def test_insufficient_shares():
    shares = _shares_from_coeffs(9, [4, 7], 5)  # degree 2
    with pytest.raises(InsufficientShares):
        reconstruct(shares[:2])


def test_duplicate_x_rejected():
    from shareql.field import DuplicateX
    with pytest.raises(DuplicateX):
        reconstruct([Share(1, 3, 1), Share(1, 4, 1)])


@pytest.mark.parametrize("kind,length,expect", [
    ("count", 7, 15),
    ("select", 7, 16),
    ("count", 1, 3),
    ("fetch", 3, 8),
    ("join", 2, 6),
    ("range_count", 5, 11),
    ("range_select", 5, 12),
])
def test_required_share_count(kind, length, expect):
    assert required_share_count(kind, length) == expect


def test_degree_after():
    assert degree_after("mul", 1, 1) == 2
    assert degree_after("add", 2, 2) == 2
    assert degree_after("add", 3, 1) == 3


def test_chained_match_degree_consistent_with_interpolation():
    # multiplying word-length degree-1 share pairs yields degree 2L results:
    # reconstructing from 2L+1 shares equals reconstructing from all shares
    rng = coefficient_rng(33, "degree-chain")
    servers, length = 9, 4  # 2L+1 = 9
    prime = DEFAULT_PRIME
    left = share_bits(np.ones(length, dtype=np.int64), servers, rng)
    right = share_bits(np.ones(length, dtype=np.int64), servers, rng)
    prod = np.ones(servers, dtype=np.int64)
    for j in range(length):
        prod = prod * left[:, j] % prime
        prod = prod * right[:, j] % prime
    shares = [Share(x + 1, int(v), 2 * length) for x, v in enumerate(prod)]
    assert reconstruct(shares) == 1
    assert reconstruct(shares[:2 * length + 1]) == 1


@settings(max_examples=60, deadline=None)
@given(secret=st.integers(min_value=0, max_value=DEFAULT_PRIME - 1),
       degree=st.integers(min_value=1, max_value=4),
       extra=st.integers(min_value=0, max_value=4))
def test_roundtrip_property(secret, degree, extra):
    params = SharingParams(servers=degree + 1 + extra, degree=degree, seed=1)
    rng = coefficient_rng(2, "hyp", secret, degree, extra)
    assert reconstruct(make_shares(secret, params, rng=rng)) == secret


def test_frequency_hiding_no_repeated_word_sharing():
    # one 7-digit word (70 coordinates) shared 10^4 times: fresh polynomials
    # per coordinate make full-sequence collisions vanishingly unlikely
    rng = coefficient_rng(8, "freq-hiding")
    bits = np.zeros(70, dtype=np.int64)
    bits[::10] = 1
    seen = set()
    reps = 10_000
    coeffs = rng.integers(1, DEFAULT_PRIME, size=(reps, 70), dtype=np.int64)
    xs = np.arange(1, 4, dtype=np.int64)
    shares = (bits[None, None, :] + coeffs[:, None, :] * xs[None, :, None]) \
        % DEFAULT_PRIME
    for i in range(reps):
        seen.add(shares[i].tobytes())
    assert len(seen) == reps


def test_single_share_marginal_uniformity():
    # chi-square on 10^5 single-share samples for two distinct secrets:
    # a server's one share tells the secrets apart with p > 0.01 never
    from scipy import stats

    rng = coefficient_rng(14, "marginals")
    for secret in (3, 1_234_567):
        coeffs = rng.integers(1, DEFAULT_PRIME, size=100_000)
        values = (secret + coeffs) % DEFAULT_PRIME
        counts, _ = np.histogram(values, bins=50, range=(0, DEFAULT_PRIME))
        _, pvalue = stats.chisquare(counts)
        assert pvalue > 0.01
