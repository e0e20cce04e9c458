import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patternforge import Pattern, kernels
from patternforge.generators import generate_bag
from patternforge.romtools import (
    BadMagic,
    IndexOutOfRange,
    NonMonotonic,
    RomError,
    RomImage,
    TruncatedPayload,
    UnsupportedVersion,
    decode_rom,
    encode_rom,
    ep_vs_memory,
    memory_footprint,
    patterns_in_memory,
    read_archive,
    simulate_driver,
    word_width,
    write_archive,
)

BACKENDS = sorted(kernels.BACKENDS)


@pytest.mark.parametrize("k_s, k_grid, nbytes", [
    (100, 256, 100), (50, 1000, 100), (0, 1000, 0), (500, 20000, 1000), (10**4, 10**6, 3 * 10**4),
])
def test_memory_footprint(k_s, k_grid, nbytes):
    assert memory_footprint(k_s, k_grid) == nbytes


@pytest.mark.parametrize("k_grid, w", [(2, 1), (256, 1), (257, 2), (65536, 2), (65537, 3), (2**24, 3), (2**24 + 1, 4)])
def test_word_width_edges(k_grid, w):
    assert word_width(k_grid) == w


def test_patterns_in_memory():
    assert patterns_in_memory(1000, 50, 1000) == 10
    assert patterns_in_memory(99, 50, 1000) == 0


def test_encode_example():
    img = encode_rom(Pattern([3, 7], 1000))
    assert img.payload == bytes([0x00, 0x03, 0x00, 0x07])
    data = img.to_bytes()
    assert data[:16] == b"CRSP" + bytes([1, 2, 0, 0]) + struct.pack(">II", 1000, 2)
    assert len(data) == 16 + 4


def test_last_index_wraps_on_power_of_two_grid():
    p = Pattern([1, 255, 256], 256)
    img = encode_rom(p)
    assert img.width == 1 and img.payload == bytes([1, 255, 0])
    assert decode_rom(RomImage.from_bytes(img.to_bytes())) == p


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 70000).flatmap(lambda k: st.tuples(
    st.just(k), st.sets(st.integers(1, k), max_size=min(k, 200)))))
def test_roundtrip_property(case):
    k_grid, idx = case
    p = Pattern(sorted(idx), k_grid)
    img = RomImage.from_bytes(encode_rom(p).to_bytes())
    assert decode_rom(img) == p
    assert len(img.payload) == memory_footprint(len(p), k_grid)


def test_roundtrip_generated_patterns(exp1):
    bag = generate_bag("angie", exp1.with_sigma2(1.0), 1000, seed=1)
    for p in bag.patterns():
        assert decode_rom(RomImage.from_bytes(encode_rom(p).to_bytes()), p.t_grid) == p


def _rec(magic=b"CRSP", version=1, width=1, k_grid=10, count=2, payload=b"\x03\x07"):
    return struct.pack(">4sBBHII", magic, version, width, 0, k_grid, count) + payload


@pytest.mark.parametrize("data, err", [
    (_rec(magic=b"XXXX"), BadMagic),
    (_rec(version=2), UnsupportedVersion),
    (_rec(payload=b"\x03"), TruncatedPayload),
    (b"CRSP", TruncatedPayload),
    (_rec(width=2), RomError),
    (_rec(payload=b"\x03\x07\x08"), RomError),
])
def test_header_errors(data, err):
    with pytest.raises(err):
        RomImage.from_bytes(data)


@pytest.mark.parametrize("payload, err", [
    (b"\x07\x03", NonMonotonic),
    (b"\x03\x03", NonMonotonic),
    (b"\x03\x0b", IndexOutOfRange),
    (b"\x00\x03", IndexOutOfRange),
])
def test_payload_errors(payload, err):
    with pytest.raises(err):
        decode_rom(RomImage.from_bytes(_rec(payload=payload)))


def test_archive_roundtrip():
    pats = [Pattern([3, 7], 1000), Pattern([], 1000), Pattern([1, 999, 1000], 1000)]
    buf = io.BytesIO()
    write_archive(buf, [encode_rom(p) for p in pats])
    buf.seek(0)
    assert [decode_rom(i) for i in read_archive(buf)] == pats


def test_archive_truncated():
    buf = io.BytesIO()
    write_archive(buf, [encode_rom(Pattern([3, 7], 1000))])
    for cut in (2, 10):
        with pytest.raises(TruncatedPayload):
            read_archive(io.BytesIO(buf.getvalue()[:-cut]))


# -- driver -----------------------------------------------------------------


@pytest.mark.parametrize("backend", BACKENDS)
def test_driver_example(backend):
    tr = simulate_driver(encode_rom(Pattern([3, 7], 10)), clock_div=8, backend=backend)
    assert tr.events.tolist() == [24, 56]
    assert tr.gaps().tolist() == [32]


@pytest.mark.parametrize("backend", BACKENDS)
def test_driver_is_linear_in_indices(backend):
    rng = np.random.default_rng(2)
    for _ in range(20):
        k_grid = int(rng.integers(2, 3000))
        idx = np.sort(rng.choice(np.arange(1, k_grid + 1), size=min(k_grid, 30), replace=False))
        div = int(rng.integers(1, 17))
        tr = simulate_driver(encode_rom(Pattern(idx, k_grid)), clock_div=div, backend=backend)
        assert tr.events.tolist() == (idx * div).tolist()


def test_driver_backends_agree_on_wrapped_grid():
    img = encode_rom(Pattern([2, 128, 256], 256))
    traces = {b: simulate_driver(img, 4, b).events.tolist() for b in BACKENDS}
    assert all(t == [8, 512, 1024] for t in traces.values())


def test_angie_trigger_gaps_respect_min_spacing(exp1):
    bag = generate_bag("angie", exp1.with_sigma2(10.0), 200, seed=3)
    div = 8
    for p in bag.patterns():
        gaps = simulate_driver(encode_rom(p), div).gaps()
        assert gaps.min() >= div * bag.params.k_min


def test_driver_rejects_bad_divider():
    with pytest.raises(ValueError):
        simulate_driver(encode_rom(Pattern([1], 10)), clock_div=0)


def test_ep_shrinks_with_memory(exp1):
    bag = generate_bag("angie", exp1.with_sigma2(1.0), 4000, seed=1)
    per = memory_footprint(bag.params.k_req, bag.params.k_grid)
    rows = ep_vs_memory(bag, [0, per * 10, per * 100, per * 4000])
    assert rows[0] == (0, 0, None)
    eps = [r[2] for r in rows[1:]]
    assert [r[1] for r in rows[1:]] == [10, 100, 4000]
    assert eps[0] > eps[1] > eps[2]
