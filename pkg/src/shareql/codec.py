"""Cleartext <-> bit-vector translation for secret sharing.

Equality queries work on *unary* words: each symbol of a value becomes a
0/1 vector with a single 1 at the symbol's alphabet position, so two
symbols can be compared by an inner product.  Range queries work on
*binary* words: 2's-complement bit vectors, least-significant bit first.

All values of a column are padded to one fixed symbol count before
encoding, so every cell of the column turns into the same number of
shares; that uniformity is what keeps the servers' view independent of
the data.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from urllib.parse import quote, unquote

import numpy as np

from .field import DEFAULT_PRIME

# Digit positions follow the unary convention '1' -> slot 1, ..., '0' -> slot 10.
DIGITS10 = "1234567890"
LETTERS26 = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"

#: Fill symbol appended to uneven-length words in text columns.  Doubles as
#: the end-of-word marker, so "John" can never prefix-match "Johnson".
TERMINATOR = "\x00"

_CANONICAL_NUMERAL = re.compile(r"^(0|[1-9][0-9]*)$")


class CodecError(ValueError):
    """Base class for encoding errors."""


class TooWide(CodecError):
    """Value longer than the column width."""


class UnknownSymbol(CodecError):
    """Character not present in the column alphabet."""


class Overflow(CodecError):
    """Integer outside the representable binary range."""


@dataclass(frozen=True)
class Alphabet:
    """Ordered symbol set; positions are 1-based as in the unary layout."""

    kind: str
    chars: str

    @staticmethod
    def digits10() -> "Alphabet":
        return Alphabet("digits10", DIGITS10)

    @staticmethod
    def letters26() -> "Alphabet":
        return Alphabet("letters26", LETTERS26)

    @staticmethod
    def custom(chars: str) -> "Alphabet":
        if len(set(chars)) != len(chars):
            raise CodecError("alphabet characters must be distinct")
        if not chars:
            raise CodecError("alphabet must not be empty")
        return Alphabet("custom", chars)

    @property
    def size(self) -> int:
        return len(self.chars)

    def index(self, ch: str) -> int:
        pos = self.chars.find(ch)
        if pos < 0:
            raise UnknownSymbol(f"character {ch!r} not in {self.kind} alphabet")
        return pos + 1

    def char(self, pos: int) -> str:
        if not 1 <= pos <= self.size:
            raise CodecError(f"position {pos} outside alphabet of size {self.size}")
        return self.chars[pos - 1]

    # serialized form used in share-file headers
    def spec(self) -> str:
        if self.kind == "digits10":
            return "d10"
        if self.kind == "letters26":
            return "l26"
        return "c" + quote(self.chars, safe="")

    @staticmethod
    def parse(spec: str) -> "Alphabet":
        if spec == "d10":
            return Alphabet.digits10()
        if spec == "l26":
            return Alphabet.letters26()
        if spec.startswith("c"):
            return Alphabet.custom(unquote(spec[1:]))
        raise CodecError(f"bad alphabet spec {spec!r}")


def pad(value: str, width: int) -> str:
    """Left-pad a numeral with '0' to exactly ``width`` characters."""
    if len(value) > width:
        raise TooWide(f"{value!r} does not fit in width {width}")
    return value.rjust(width, "0")


def unary_encode(value: str, alphabet: Alphabet) -> list[list[int]]:
    """One one-hot vector of length ``alphabet.size`` per character."""
    out = []
    for ch in value:
        vec = [0] * alphabet.size
        vec[alphabet.index(ch) - 1] = 1
        out.append(vec)
    return out


def unary_decode(vectors, alphabet: Alphabet) -> str:
    """Inverse of unary_encode; insists on weight-exactly-1 vectors."""
    chars = []
    for vec in vectors:
        ones = [i for i, b in enumerate(vec) if b == 1]
        if len(ones) != 1 or any(b not in (0, 1) for b in vec):
            raise CodecError(f"not a one-hot symbol vector: {list(vec)}")
        chars.append(alphabet.char(ones[0] + 1))
    return "".join(chars)


def binary_encode(value: int, bits: int) -> list[int]:
    """2's-complement bit vector, least-significant bit first."""
    if not -(1 << (bits - 1)) <= value < (1 << (bits - 1)):
        raise Overflow(f"{value} does not fit in {bits}-bit 2's complement")
    return [(value >> i) & 1 for i in range(bits)]


def binary_decode(bits_lsb_first) -> int:
    bits = list(bits_lsb_first)
    raw = 0
    for i, b in enumerate(bits):
        if b not in (0, 1):
            raise CodecError(f"non-bit value {b} in binary word")
        raw |= b << i
    if bits and bits[-1]:
        raw -= 1 << len(bits)
    return raw


def hash_digest_map(value: str, digits: int, algorithm: str = "sha256") -> str:
    """Deterministic digest of ``value`` as a fixed-width decimal numeral.

    The digest integer is rendered in decimal and only the last ``digits``
    digits are kept (zero-filled), shrinking long text to a short numeral
    at a vanishing collision risk.
    """
    if digits < 1:
        raise CodecError("digest must keep at least one digit")
    h = hashlib.new(algorithm, value.encode("utf-8"))
    decimal = str(int.from_bytes(h.digest(), "big"))
    if digits >= len(decimal):
        return decimal
    return decimal[-digits:].rjust(digits, "0")


def packed_encode(word: str, alphabet: Alphabet) -> int:
    """Bijective base-``size`` integer of a fixed-width word.

    Digits are the 1-based symbol positions, so the result is strictly
    positive for every word and distinct words map to distinct integers.
    Used for the compact one-share-per-cell payload columns.
    """
    acc = 0
    for ch in word:
        acc = acc * alphabet.size + alphabet.index(ch)
    return acc


def packed_decode(value: int, width: int, alphabet: Alphabet) -> str:
    size = alphabet.size
    chars = []
    for _ in range(width):
        value, rem = divmod(value, size)
        if rem == 0:  # bijective numeration borrows from the next digit
            rem = size
            value -= 1
        chars.append(alphabet.char(rem))
    if value != 0:
        raise CodecError("packed value does not fit the declared width")
    return "".join(reversed(chars))


def packed_max(size: int, width: int) -> int:
    """Largest packed_encode output for the given alphabet size and width."""
    return size * (size**width - 1) // (size - 1) if size > 1 else width


PAD_LEFT_ZERO = "z"  # canonical numerals, left '0' pad
PAD_TERMINATOR = "t"  # text, right-filled with the terminator symbol
PAD_NONE = "n"  # all values already share one length

_PAD_MODES = (PAD_LEFT_ZERO, PAD_TERMINATOR, PAD_NONE)


@dataclass(frozen=True)
class ColumnCodec:
    """Everything needed to encode or decode one column's cells.

    width counts symbols after padding; compact marks columns whose whole
    padded word also fits one field element (packed form); range_bits > 0
    additionally stores a 2's-complement vector for range predicates.
    """

    alphabet: Alphabet
    width: int
    pad_mode: str = PAD_NONE
    hash_digits: int = 0
    compact: bool = False
    range_bits: int = 0

    def __post_init__(self):
        if self.width < 1:
            raise CodecError("column width must be positive")
        if self.pad_mode not in _PAD_MODES:
            raise CodecError(f"bad pad mode {self.pad_mode!r}")
        if self.pad_mode == PAD_TERMINATOR and TERMINATOR not in self.alphabet.chars:
            raise CodecError("terminator padding needs the terminator symbol")

    @property
    def coords(self) -> int:
        """Unary coordinates per cell."""
        return self.width * self.alphabet.size

    # -- cleartext normalization ------------------------------------------

    def normalize(self, value: str) -> str:
        """Padded fixed-width word actually encoded for this column."""
        if self.hash_digits:
            value = hash_digest_map(value, self.hash_digits)
        if len(value) > self.width:
            raise TooWide(f"{value!r} exceeds column width {self.width}")
        if self.pad_mode == PAD_LEFT_ZERO:
            return pad(value, self.width)
        if self.pad_mode == PAD_TERMINATOR:
            return value + TERMINATOR * (self.width - len(value))
        if len(value) != self.width:
            raise CodecError(f"{value!r} must have exactly {self.width} symbols")
        return value

    def denormalize(self, word: str) -> str:
        if self.pad_mode == PAD_LEFT_ZERO:
            return word.lstrip("0") or "0"
        if self.pad_mode == PAD_TERMINATOR:
            return word.rstrip(TERMINATOR)
        return word

    # -- unary form ----------------------------------------------------------

    def encode_unary(self, value: str) -> np.ndarray:
        word = self.normalize(value)
        flat = [b for vec in unary_encode(word, self.alphabet) for b in vec]
        return np.asarray(flat, dtype=np.int64)

    def decode_unary(self, coords) -> str:
        coords = list(coords)
        if len(coords) != self.coords:
            raise CodecError("coordinate count does not match column shape")
        size = self.alphabet.size
        vectors = [coords[i * size:(i + 1) * size] for i in range(self.width)]
        return self.denormalize(unary_decode(vectors, self.alphabet))

    # -- compact (packed) form -------------------------------------------

    def encode_compact(self, value: str) -> int:
        return packed_encode(self.normalize(value), self.alphabet)

    def decode_compact(self, value: int) -> str:
        return self.denormalize(packed_decode(value, self.width, self.alphabet))

    # -- binary form -------------------------------------------------------

    def encode_binary(self, value: str) -> np.ndarray:
        if not self.range_bits:
            raise CodecError("column has no binary representation")
        return np.asarray(binary_encode(int(value), self.range_bits), dtype=np.int64)

    # -- vectorized whole-column encoders ---------------------------------

    def _index_block(self, values) -> np.ndarray:
        """(rows, width) array of 1-based symbol positions."""
        words = [self.normalize(v) for v in values]
        try:
            raw = np.frombuffer("".join(words).encode("latin-1"),
                                dtype=np.uint8).reshape(len(words), self.width)
        except (UnicodeEncodeError, ValueError):
            return np.asarray(
                [[self.alphabet.index(ch) for ch in w] for w in words],
                dtype=np.int64,
            )
        table = np.zeros(256, dtype=np.int64)
        for pos, ch in enumerate(self.alphabet.chars, start=1):
            table[ord(ch)] = pos
        idx = table[raw]
        if not idx.all():
            bad = words[int(np.argwhere(idx == 0)[0][0])]
            raise UnknownSymbol(f"word {bad!r} uses symbols outside the alphabet")
        return idx

    def encode_unary_block(self, values) -> np.ndarray:
        """(rows, width * alphabet) 0/1 matrix for a whole column."""
        idx = self._index_block(values)
        rows = idx.shape[0]
        out = np.zeros((rows, self.width, self.alphabet.size), dtype=np.int64)
        r = np.repeat(np.arange(rows), self.width)
        w = np.tile(np.arange(self.width), rows)
        out[r, w, (idx - 1).ravel()] = 1
        return out.reshape(rows, self.coords)

    def encode_compact_block(self, values) -> np.ndarray:
        # only compact-flagged columns call this, so packed values stay
        # below the field modulus and int64 cannot overflow
        idx = self._index_block(values)
        acc = np.zeros(idx.shape[0], dtype=np.int64)
        for k in range(self.width):
            acc = acc * self.alphabet.size + idx[:, k]
        return acc

    def header_spec(self) -> str:
        return ":".join(
            (
                self.alphabet.spec(),
                str(self.width),
                self.pad_mode,
                str(self.hash_digits),
                "1" if self.compact else "0",
                str(self.range_bits),
            )
        )

    @staticmethod
    def parse(spec: str) -> "ColumnCodec":
        try:
            alpha, width, mode, digits, compact, bits = spec.split(":")
            return ColumnCodec(
                alphabet=Alphabet.parse(alpha),
                width=int(width),
                pad_mode=mode,
                hash_digits=int(digits),
                compact=compact == "1",
                range_bits=int(bits),
            )
        except (ValueError, TypeError) as exc:
            raise CodecError(f"bad column codec spec {spec!r}") from exc


def infer_codec(values, *, hash_digits: int = 0, range_enabled: bool = False,
                extra_values=(), prime: int = DEFAULT_PRIME,
                compact_allowed: bool = True) -> ColumnCodec:
    """Choose a codec for a column from the values it must hold.

    Canonical numerals get the paper-ordered 10-digit alphabet with left
    '0' padding; anything else gets the smallest alphabet covering the
    observed characters, with a terminator fill when lengths differ.
    ``extra_values`` widens the inference so two columns that will be
    joined can share one codec.
    """
    vals = [str(v) for v in values] + [str(v) for v in extra_values]
    if not vals:
        raise CodecError("cannot infer a codec from an empty column")
    if any(TERMINATOR in v for v in vals):
        raise CodecError("values must not contain the reserved terminator byte")

    if hash_digits:
        codec = ColumnCodec(Alphabet.digits10(), hash_digits, PAD_NONE,
                            hash_digits=hash_digits)
    else:
        width = max(len(v) for v in vals)
        uniform = all(len(v) == width for v in vals)
        if all(_CANONICAL_NUMERAL.match(v) for v in vals):
            codec = ColumnCodec(Alphabet.digits10(), width, PAD_LEFT_ZERO)
        else:
            chars = sorted(set("".join(vals)))
            if chars == sorted(LETTERS26) and uniform:
                alpha = Alphabet.letters26()
            elif not uniform:
                alpha = Alphabet.custom("".join(chars) + TERMINATOR)
            else:
                alpha = Alphabet.custom("".join(chars))
            codec = ColumnCodec(alpha, width,
                                PAD_NONE if uniform else PAD_TERMINATOR)

    if compact_allowed and packed_max(codec.alphabet.size, codec.width) < prime:
        codec = replace(codec, compact=True)

    if range_enabled:
        if not all(_CANONICAL_NUMERAL.match(v) for v in vals):
            raise CodecError("range queries need canonical numeral columns")
        bits = max(int(v) for v in vals).bit_length() + 1
        codec = replace(codec, range_bits=max(bits, 2))
    return codec
