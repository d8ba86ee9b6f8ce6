"""Prime-field arithmetic and Lagrange interpolation at x = 0.

Field elements are plain Python ints in ``[0, P)``.  Vectorized helpers
operate on int64 numpy arrays; with the default 24-bit modulus every
intermediate product fits comfortably in 64 bits.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

#: Default deployment modulus.  Chosen so that a product of two reduced
#: elements fits in a single 64-bit widening multiply.
DEFAULT_PRIME = 15_000_017


class FieldError(ValueError):
    """Base class for field-arithmetic errors."""


class ZeroInverse(FieldError):
    """Raised when inverting the zero element."""


class DuplicateX(FieldError):
    """Raised when interpolation points share an x-coordinate."""


class NotPrime(FieldError):
    """Raised when a composite modulus is supplied."""


_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin primality test, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@lru_cache(maxsize=None)
def _weights_at_zero(xs: tuple[int, ...], prime: int) -> tuple[int, ...]:
    """Lagrange basis weights w_i with f(0) = sum(w_i * y_i) mod prime."""
    weights = []
    for i, xi in enumerate(xs):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if i == j:
                continue
            num = num * xj % prime
            den = den * (xj - xi) % prime
        weights.append(num * pow(den, prime - 2, prime) % prime)
    return tuple(weights)


class PrimeField:
    """Arithmetic modulo a public prime ``P``.

    All operations are pure; instances are safe to share across threads.
    """

    __slots__ = ("prime",)

    def __init__(self, prime: int = DEFAULT_PRIME):
        if not is_prime(prime):
            raise NotPrime(f"modulus {prime} is not prime")
        self.prime = prime

    def __repr__(self) -> str:
        return f"PrimeField({self.prime})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PrimeField) and other.prime == self.prime

    def __hash__(self) -> int:
        return hash(("PrimeField", self.prime))

    # -- scalar operations -------------------------------------------------

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.prime

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.prime

    def mul(self, a: int, b: int) -> int:
        return a * b % self.prime

    def neg(self, a: int) -> int:
        return -a % self.prime

    def inverse(self, a: int) -> int:
        a %= self.prime
        if a == 0:
            raise ZeroInverse("0 has no multiplicative inverse")
        return pow(a, self.prime - 2, self.prime)

    # -- vector operations --------------------------------------------------

    def vadd(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a + b) % self.prime

    def vsub(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a - b) % self.prime

    def vmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a * b % self.prime

    # -- interpolation -------------------------------------------------------

    def interpolate_at_zero(self, points: Iterable[tuple[int, int]]) -> int:
        """Constant term of the unique polynomial through ``points``.

        Raises DuplicateX if two points share an x-coordinate.
        """
        pts = list(points)
        if not pts:
            raise FieldError("interpolation needs at least one point")
        xs = tuple(x % self.prime for x, _ in pts)
        if len(set(xs)) != len(xs):
            raise DuplicateX("interpolation points must have distinct x")
        weights = _weights_at_zero(xs, self.prime)
        acc = 0
        for w, (_, y) in zip(weights, pts):
            acc = (acc + w * y) % self.prime
        return acc

    def interpolate_columns(self, xs: Sequence[int], ys: np.ndarray) -> np.ndarray:
        """Vectorized interpolation at 0: ``ys[i]`` is the value array at ``xs[i]``.

        Returns an array with the shape of one row of ``ys``.
        """
        xs = tuple(x % self.prime for x in xs)
        if len(set(xs)) != len(xs):
            raise DuplicateX("interpolation points must have distinct x")
        ys = np.asarray(ys, dtype=np.int64)
        if ys.shape[0] != len(xs):
            raise FieldError("one value row per x-coordinate required")
        weights = np.asarray(_weights_at_zero(xs, self.prime), dtype=np.int64)
        acc = np.zeros(ys.shape[1:], dtype=np.int64)
        for w, row in zip(weights, ys):
            acc = (acc + w * row) % self.prime
        return acc
