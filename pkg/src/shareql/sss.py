"""Shamir share generation, reconstruction, and polynomial-degree tracking.

A secret ``s`` is placed in the constant term of a fresh random polynomial
``f(x) = s + a_1 x + ... + a_d x^d`` over F_P and server ``k`` receives the
point ``(k, f(k))``.  Non-constant coefficients are drawn uniformly from
``[1, P-1]``; excluding 0 means two sharings of the same secret never
coincide at degree 1, which is what hides value frequencies from a server.

Every share carries the degree of the polynomial it lies on.  Share
addition keeps the maximum degree, share multiplication adds degrees; the
tracked degree decides how many servers an interpolation needs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .field import DEFAULT_PRIME, PrimeField

__all__ = [
    "Share",
    "SharingParams",
    "BadParams",
    "InsufficientShares",
    "make_shares",
    "reconstruct",
    "required_share_count",
    "degree_after",
    "coefficient_rng",
]


class SSSError(ValueError):
    """Base class for sharing errors."""


class BadParams(SSSError):
    """Raised when the server count cannot support the sharing degree."""


class InsufficientShares(SSSError):
    """Raised when too few shares are supplied for the tracked degree."""


@dataclass(frozen=True)
class Share:
    """One server's point (x, f(x)) of a sharing polynomial."""

    x: int
    value: int
    degree: int = 1


@dataclass(frozen=True)
class SharingParams:
    """Deployment-wide sharing configuration."""

    servers: int
    degree: int = 1
    prime: int = DEFAULT_PRIME
    seed: int | None = None

    def __post_init__(self):
        if self.degree < 1:
            raise BadParams("sharing degree must be at least 1")
        if self.servers < self.degree + 1:
            raise BadParams(
                f"{self.servers} servers cannot reconstruct degree "
                f"{self.degree} sharings (need at least {self.degree + 1})"
            )
        PrimeField(self.prime)  # validates primality

    @property
    def xs(self) -> tuple[int, ...]:
        return tuple(range(1, self.servers + 1))


def coefficient_rng(seed: int | None, *context) -> np.random.Generator:
    """Counter-based generator for sharing coefficients.

    Keyed by a digest of (seed, context) so each (relation, column,
    representation) stream is independent and reproducible no matter how
    work is scheduled.  ``seed=None`` keys the stream from OS entropy.
    """
    h = hashlib.sha256()
    if seed is None:
        import secrets

        h.update(secrets.token_bytes(32))
    else:
        h.update(str(int(seed)).encode())
    for part in context:
        h.update(b"\x1f")
        h.update(str(part).encode())
    key = int.from_bytes(h.digest()[:16], "big")
    return np.random.Generator(np.random.Philox(key=key))


def _shares_from_coeffs(secret: int, coeffs, servers: int,
                        prime: int = DEFAULT_PRIME) -> list[Share]:
    """Evaluate ``secret + sum(coeffs[j] x^(j+1))`` at x = 1..servers.

    Test hook for reproducing published worked examples with forced
    polynomials; production callers go through make_shares.
    """
    coeffs = [int(c) % prime for c in coeffs]
    out = []
    for x in range(1, servers + 1):
        acc = 0
        for c in reversed(coeffs):
            acc = (acc + c) * x % prime
        out.append(Share(x=x, value=(acc + secret) % prime, degree=len(coeffs)))
    return out


def make_shares(secret: int, params: SharingParams,
                rng: np.random.Generator | None = None) -> list[Share]:
    """Split ``secret`` into ``params.servers`` shares with a fresh polynomial."""
    if not 0 <= secret < params.prime:
        raise SSSError(f"secret {secret} outside [0, {params.prime})")
    if rng is None:
        rng = coefficient_rng(params.seed, "scalar")
    coeffs = rng.integers(1, params.prime, size=params.degree)
    return _shares_from_coeffs(secret, coeffs.tolist(), params.servers, params.prime)


def reconstruct(shares, prime: int = DEFAULT_PRIME) -> int:
    """Recover the constant term from a share sequence.

    Needs at least ``max(degree) + 1`` shares with pairwise-distinct x.
    """
    shares = list(shares)
    if not shares:
        raise InsufficientShares("no shares supplied")
    need = max(s.degree for s in shares) + 1
    if len(shares) < need:
        raise InsufficientShares(
            f"{len(shares)} shares cannot fix a degree-{need - 1} polynomial"
        )
    fld = PrimeField(prime)
    return fld.interpolate_at_zero((s.x, s.value) for s in shares)


def required_share_count(kind: str, length: int) -> int:
    """Minimum server count for a query over words of ``length`` symbols.

    Matching one symbol multiplies two degree-1 shares, so a full-word
    match has degree ``2 * length``; selection-style queries multiply the
    match bit into a degree-1 payload share, adding one more.  Range
    queries track the sign-bit degree ``2 * bits``.

    kinds: ``count`` | ``select`` | ``fetch`` | ``join`` |
    ``range_count`` | ``range_select``.
    """
    if length < 1:
        raise SSSError("length must be positive")
    if kind == "count":
        return 2 * length + 1
    if kind in ("select", "fetch", "join"):
        return 2 * length + 2
    if kind == "range_count":
        return 2 * length + 1
    if kind == "range_select":
        return 2 * length + 2
    raise SSSError(f"unknown query kind {kind!r}")


def degree_after(op: str, d1: int, d2: int) -> int:
    """Tracked degree of a share expression: add keeps max, mul sums."""
    if op == "add":
        return max(d1, d2)
    if op == "mul":
        return d1 + d2
    raise SSSError(f"unknown share operation {op!r}")
