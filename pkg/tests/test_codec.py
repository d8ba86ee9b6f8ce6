"""Unary/binary encoding, padding, packed payloads, digest mapping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shareql.codec import (
    Alphabet,
    ColumnCodec,
    CodecError,
    Overflow,
    TERMINATOR,
    TooWide,
    UnknownSymbol,
    binary_decode,
    binary_encode,
    hash_digest_map,
    infer_codec,
    pad,
    packed_decode,
    packed_encode,
    packed_max,
    unary_decode,
    unary_encode,
)


def test_pad_examples():
    assert pad("1", 7) == "0000001"
    assert pad("0000001", 7) == "0000001"
    assert pad("25", 2) == "25"
    with pytest.raises(TooWide):
        pad("123", 2)


def test_unary_digit_positions():
    digits = Alphabet.digits10()
    one = unary_encode("1", digits)[0]
    assert one == [1, 0, 0, 0, 0, 0, 0, 0, 0, 0]
    zero = unary_encode("0", digits)[0]
    assert zero == [0, 0, 0, 0, 0, 0, 0, 0, 0, 1]


def test_unary_letter_positions():
    letters = Alphabet.letters26()
    a = unary_encode("A", letters)[0]
    assert a[0] == 1 and sum(a) == 1
    j = unary_encode("J", letters)[0]
    assert j[9] == 1 and sum(j) == 1


def test_unary_weight_one_enforced():
    digits = Alphabet.digits10()
    with pytest.raises(CodecError):
        unary_decode([[1, 1, 0, 0, 0, 0, 0, 0, 0, 0]], digits)
    with pytest.raises(CodecError):
        unary_decode([[0] * 10], digits)


def test_unknown_symbol():
    with pytest.raises(UnknownSymbol):
        unary_encode("x", Alphabet.digits10())


def test_unary_roundtrip_random_numerals():
    rng = np.random.default_rng(3)
    digits = Alphabet.digits10()
    for _ in range(10_000):
        word = pad(str(rng.integers(0, 10**6)), 7)
        assert unary_decode(unary_encode(word, digits), digits) == word


def test_equality_oracle_all_digit_pairs():
    # inner product of two one-hot digit vectors is 1 iff digits agree
    digits = Alphabet.digits10()
    for a in "0123456789":
        va = unary_encode(a, digits)[0]
        for b in "0123456789":
            vb = unary_encode(b, digits)[0]
            dot = sum(x * y for x, y in zip(va, vb))
            assert dot == (1 if a == b else 0)


def test_binary_examples():
    assert binary_encode(0, 8) == [0] * 8
    assert binary_encode(-1, 4) == [1, 1, 1, 1]
    with pytest.raises(Overflow):
        binary_encode(128, 8)
    with pytest.raises(Overflow):
        binary_encode(-129, 8)


def test_binary_roundtrip_exhaustive_t8():
    for v in range(-128, 128):
        assert binary_decode(binary_encode(v, 8)) == v


def test_digest_deterministic_and_truncating():
    assert hash_digest_map("repeatable", 8) == hash_digest_map("repeatable", 8)
    full = hash_digest_map("value", 10_000)
    assert hash_digest_map("value", len(full) + 5) == full  # no-op truncation
    assert len(hash_digest_map("value", 8)) == 8


def test_digest_collision_census():
    # 360k distinct inputs folded to 8 decimal digits: collisions are
    # permitted but must stay near the birthday estimate, and are reported
    n = 360_000
    seen = {}
    collisions = 0
    for i in range(n):
        d = hash_digest_map(f"url-{i}", 8)
        if d in seen:
            collisions += 1
        else:
            seen[d] = i
    expected = n * n / (2 * 10**8)
    print(f"digest census: {collisions} collisions over {n} inputs "
          f"(birthday estimate {expected:.0f})")
    assert collisions < 4 * expected


def test_packed_biject_and_never_zero():
    digits = Alphabet.digits10()
    seen = set()
    for v in range(0, 1000):
        word = pad(str(v), 3)
        enc = packed_encode(word, digits)
        assert enc > 0
        assert packed_decode(enc, 3, digits) == word
        seen.add(enc)
    assert len(seen) == 1000
    assert max(seen) <= packed_max(10, 3)


def test_infer_codec_canonical_numerals():
    codec = infer_codec(["1", "25", "300"])
    assert codec.alphabet.kind == "digits10"
    assert codec.width == 3
    assert codec.pad_mode == "z"
    assert codec.compact
    assert codec.decode_unary(codec.encode_unary("25")) == "25"
    assert codec.decode_compact(codec.encode_compact("300")) == "300"


def test_infer_codec_leading_zero_numerals_use_custom_alphabet():
    codec = infer_codec(["007", "42"])
    assert codec.alphabet.kind == "custom"
    assert codec.decode_unary(codec.encode_unary("007")) == "007"
    assert codec.decode_unary(codec.encode_unary("42")) == "42"


def test_infer_codec_text_with_terminator():
    codec = infer_codec(["John", "Eve", "Adam"])
    assert codec.pad_mode == "t"
    assert TERMINATOR in codec.alphabet.chars
    for v in ("John", "Eve", "Adam"):
        assert codec.decode_unary(codec.encode_unary(v)) == v
        assert codec.decode_compact(codec.encode_compact(v)) == v


def test_terminator_blocks_prefix_match():
    codec = infer_codec(["John", "Johnson"])
    a = codec.encode_unary("John")
    b = codec.encode_unary("Johnson")
    width, size = codec.width, codec.alphabet.size
    dots = [
        int(np.dot(a[i * size:(i + 1) * size], b[i * size:(i + 1) * size]))
        for i in range(width)
    ]
    assert 0 in dots  # some symbol disagrees, so the word match is 0


def test_infer_codec_uppercase_words():
    codec = infer_codec(["ABC", "XYZ"])
    assert codec.alphabet.kind == "letters26"
    assert codec.decode_unary(codec.encode_unary("XYZ")) == "XYZ"


def test_infer_codec_hash_digits():
    codec = infer_codec(["anything at all", "x"], hash_digits=8)
    enc = codec.encode_unary("anything at all")
    assert enc.shape == (80,)
    digest = hash_digest_map("anything at all", 8)
    assert codec.decode_unary(enc) == digest


def test_infer_codec_range_bits():
    codec = infer_codec(["1", "25"], range_enabled=True)
    assert codec.range_bits == 6  # 25 needs 5 magnitude bits + sign
    assert list(codec.encode_binary("25")) == [1, 0, 0, 1, 1, 0]
    with pytest.raises(CodecError):
        infer_codec(["a1"], range_enabled=True)


def test_header_spec_roundtrip():
    for codec in (
        infer_codec(["1", "25", "300"], range_enabled=True),
        infer_codec(["John", "Eve"]),
        infer_codec(["a|b c", "d;e%f"]),
        infer_codec(["text"], hash_digits=6),
    ):
        assert ColumnCodec.parse(codec.header_spec()) == codec


def test_column_width_uniformity():
    # after padding, every value of a column encodes to one share count
    codec = infer_codec(["5", "123", "77"])
    sizes = {codec.encode_unary(v).size for v in ("5", "123", "77")}
    assert sizes == {30}


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="0123456789", min_size=1, max_size=7)
       .filter(lambda s: s == "0" or not s.startswith("0")))
def test_numeral_roundtrip_property(value):
    codec = infer_codec([value, "9" * 7])
    assert codec.decode_unary(codec.encode_unary(value)) == value
    assert codec.decode_compact(codec.encode_compact(value)) == value


@settings(max_examples=200, deadline=None)
@given(st.lists(st.text(st.characters(min_codepoint=33, max_codepoint=126),
                        min_size=1, max_size=6), min_size=1, max_size=8))
def test_inferred_codec_roundtrips_any_printable_column(values):
    codec = infer_codec(values)
    for v in values:
        assert codec.decode_unary(codec.encode_unary(v)) == v
