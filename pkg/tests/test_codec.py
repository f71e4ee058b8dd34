import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enroute.codec import (
    HEADER_BITS,
    CodedStream,
    ac_decode,
    ac_encode,
    dequantize,
    detail_bits,
    packet_payloads,
    payload_bits,
    quantize,
)
from enroute.errors import InvalidArgument, SymbolRangeError
from enroute.transform import RAW, Trace, detail, encode_epochs, smooth


def test_quantizer_examples():
    assert quantize([0.9], 2)[0] == 0 and dequantize([0], 2)[0] == 0
    assert quantize([3.5], 2)[0] == 1 and dequantize([1], 2)[0] == 3.0
    assert quantize([-5.0], 2)[0] == -2 and dequantize([-2], 2)[0] == -5.0
    with pytest.raises(InvalidArgument):
        quantize([1.0], 0)


def test_quantizer_error_and_monotone():
    v = np.linspace(-50, 50, 10001)
    q = quantize(v, 0.7)
    assert np.all(np.abs(v - dequantize(q, 0.7)) <= 0.7)
    assert np.all(np.diff(q) >= 0)


def test_constant_zeros_cheap():
    s = ac_encode([0] * 50)
    assert s.nbits < 50 + HEADER_BITS
    assert ac_decode(s) == [0] * 50


def test_uniform_rate_near_three_bits():
    sym = np.random.default_rng(0).integers(0, 8, 10_000)
    s = ac_encode(sym)
    assert ac_decode(s, 10_000) == sym.tolist()
    assert abs((s.nbits - HEADER_BITS) / 10_000 - 3.0) < 0.03 * 3.0


def test_symbol_range():
    with pytest.raises(SymbolRangeError):
        ac_encode([0, 40000])
    with pytest.raises(InvalidArgument):
        ac_encode([])


def test_decode_count_mismatch():
    with pytest.raises(InvalidArgument):
        ac_decode(ac_encode([1, 2, 3]), 4)


def test_bytes_big_endian():
    s = ac_encode([-1])
    assert s.data[:4] == b"\xff\xff\xff\xff"
    assert s.data[4:6] == b"\x00\x01"


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-32768, 32767), min_size=1, max_size=60))
def test_round_trip_property(symbols):
    assert ac_decode(ac_encode(symbols)) == symbols


def test_payload_bits():
    assert payload_bits(3, RAW).bits == 600
    assert payload_bits(3, smooth(1)).kind == "SmoothBits" and payload_bits(3, smooth(1)).bits == 600
    coded = ac_encode([0] * 50)
    assert payload_bits(3, detail(1), coded).bits < 600
    with pytest.raises(InvalidArgument):
        payload_bits(3, detail(1))


def test_detail_bits_cache():
    cache = {}
    v = np.arange(50.0)
    assert detail_bits(v, 1.0, cache) == ac_encode(quantize(v, 1.0)).nbits
    assert len(cache) == 1
    detail_bits(v + 0.2, 1.0, cache)
    assert len(cache) == 1


def test_packet_payloads_follow_classes():
    from conftest import path_network, setup
    from enroute.zoo import build_tdpcm_onehop

    net = path_network(2)
    sched, causal = setup(net)
    t = build_tdpcm_onehop(net, sched, causal)
    tr = Trace()
    encode_epochs(t, np.full((50, 2), 100.0), tr)
    pay = packet_payloads(tr, 1.0)
    assert [p.kind for p in pay[1]] == ["RawBits"]
    assert [p.kind for p in pay[0]] == ["RawBits", "DetailCoded"]
    assert pay[0][1].bits < 100
