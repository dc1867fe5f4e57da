import itertools

import pytest
from hypothesis import given, strategies as st

from odris.codec import (Code, Mode, code_number, decode, encode, enumerate_codes, gray_decode,
                         gray_encode)
from odris.errors import DomainError, MalformedCodeError


def xor_shift_gray(n, k):
    # reference construction, written out bit by bit
    b = [(n >> (k - 1 - i)) & 1 for i in range(k)]
    return "".join(str(b[0] if i == 0 else b[i] ^ b[i - 1]) for i in range(k))


@pytest.mark.parametrize("n,k,word", [(0, 4, "0000"), (2, 4, "0011"), (5, 3, "111"), (3, 3, "010"),
                                      (15, 4, "1000"), (1, 1, "1")])
def test_gray_encode_known_words(n, k, word):
    assert gray_encode(n, k) == word
    assert gray_decode(word) == n


@pytest.mark.parametrize("k", range(1, 9))
def test_gray_exhaustive_roundtrip_and_adjacency(k):
    words = [gray_encode(n, k) for n in range(1 << k)]
    assert words == [xor_shift_gray(n, k) for n in range(1 << k)]
    assert [gray_decode(w) for w in words] == list(range(1 << k))
    for a, b in zip(words, words[1:]):
        assert sum(x != y for x, y in zip(a, b)) == 1


@pytest.mark.parametrize("n,k", [(-1, 3), (8, 3), (0, 0), (0, 17)])
def test_gray_encode_out_of_range(n, k):
    with pytest.raises(DomainError):
        gray_encode(n, k)


def test_encode_examples():
    c = encode(Mode.REFLECT, 0, 0, 4)
    assert len(c.bits) == 10 and c.bits.startswith("01")
    assert encode(Mode.OFF, 0, 0, 1).bits == "0000"
    assert encode(Mode.REFRACT, 5, 3, 3).bits == "10111010"


def test_encode_off_zeroes_payload():
    assert encode(Mode.OFF, 3, 2, 2).bits == "000000"


@pytest.mark.parametrize("kwargs,field", [
    (dict(mode=Mode.REFLECT, phase_ordinal=16, coeff_ordinal=0, k=4), "phase_ordinal"),
    (dict(mode=Mode.REFLECT, phase_ordinal=0, coeff_ordinal=-1, k=4), "coeff_ordinal"),
    (dict(mode=Mode.REFLECT, phase_ordinal=0, coeff_ordinal=0, k=17), "k"),
    (dict(mode=Mode.REFLECT, phase_ordinal=0, coeff_ordinal=0, k=0), "k"),
])
def test_encode_errors_name_the_field(kwargs, field):
    with pytest.raises(DomainError) as exc:
        encode(**kwargs)
    assert exc.value.field == field


def test_decode_fixture_code():
    c = decode("0100001000")
    assert c.mode is Mode.REFLECT and c.k == 4
    assert c.phase_index == "0000" and c.coeff_index == "1000"
    assert c.phase_ordinal == 0 and c.coeff_ordinal == 15


def test_decode_off():
    c = decode("0000")
    assert (c.mode, c.phase_ordinal, c.coeff_ordinal, c.k) == (Mode.OFF, 0, 0, 1)


@pytest.mark.parametrize("bits", ["000", "01", "", "0", "0100a01000", "0" * 35])
def test_decode_malformed(bits):
    with pytest.raises(MalformedCodeError):
        decode(bits)


def test_every_ten_bit_string_roundtrips():
    for t in itertools.product("01", repeat=10):
        bits = "".join(t)
        c = decode(bits)
        assert c.bits == bits
        if c.mode is not Mode.OFF or bits[2:] == "0" * 8:
            assert encode(c.mode, c.phase_ordinal, c.coeff_ordinal, c.k).bits == bits


@given(st.integers(1, 16).flatmap(lambda k: st.tuples(
    st.just(k), st.sampled_from([Mode.REFLECT, Mode.REFRACT, Mode.BOTH]),
    st.integers(0, (1 << k) - 1), st.integers(0, (1 << k) - 1))))
def test_length_law_and_inverse(args):
    k, mode, p, c = args
    code = encode(mode, p, c, k)
    assert len(code.bits) == 2 * (k + 1) == len(code)
    back = decode(code.bits)
    assert back == code
    assert (back.phase_ordinal, back.coeff_ordinal) == (p, c)


def test_mode_partition():
    prefixes = {m.bits: m for m in Mode}
    assert sorted(prefixes) == ["00", "01", "10", "11"]
    assert {m.label for m in Mode} == {"Off", "Reflect", "Refract", "Both"}
    assert Mode.from_label("reflect") is Mode.REFLECT
    assert Mode.from_label("11") is Mode.BOTH


def test_code_rejects_wrong_block_length():
    with pytest.raises(DomainError):
        Code(4, Mode.REFLECT, "000", "0000")


def test_enumerate_codes_k1():
    codes = enumerate_codes(1)
    assert len(codes) == 16
    assert len({c.bits for c in codes}) == 16
    assert codes[0].mode is Mode.REFLECT


@pytest.mark.parametrize("k", [1, 2, 3])
def test_enumerate_codes_order(k):
    codes = enumerate_codes(k)
    assert len(codes) == 4 * 4 ** k
    n = 1 << k
    expected = [(m, p, c) for m in (Mode.REFLECT, Mode.REFRACT, Mode.BOTH, Mode.OFF)
                for p in range(n) for c in range(n)]
    assert [(c.mode, c.phase_ordinal, c.coeff_ordinal) for c in codes] == expected


def test_enumerate_codes_rejects_large_k():
    with pytest.raises(DomainError):
        enumerate_codes(9)


def test_table_code_numbers():
    table = enumerate_codes(4, modes=[Mode.REFLECT], coeff_ordinal=15)
    assert len(table) == 16
    for pos, code in enumerate(table, start=1):
        assert code_number(code) == pos
    reflect = ["0100001000", "0100101000", "0110101000", "0110001000"]
    refract = ["1001111000", "1001011000", "1011011000", "1011111000"]
    assert sorted(code_number(decode(b)) for b in reflect) == [1, 4, 13, 16]
    assert sorted(code_number(decode(b)) for b in refract) == [6, 7, 10, 11]
