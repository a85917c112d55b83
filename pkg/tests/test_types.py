"""Canonical types: codec round trips, injectivity, golden values, thresholds."""

import os

import pytest
from hypothesis import given, settings, strategies as st

from dagmempool.netsim import build_committee
from dagmempool.types import (
    Batch,
    BlockHeader,
    Certificate,
    CodecError,
    Committee,
    Vote,
    WaveNumber,
    check_header_shape,
    genesis_header,
    wave_rounds,
)

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")

digests = st.binary(min_size=32, max_size=32)
pubkeys = st.binary(min_size=32, max_size=32)
signatures = st.binary(min_size=64, max_size=64)


@st.composite
def headers(draw):
    payload = tuple(
        (draw(digests), draw(st.integers(0, 7)))
        for _ in range(draw(st.integers(0, 4)))
    )
    parents = tuple(draw(st.lists(digests, max_size=5, unique=True)))
    return BlockHeader(
        author=draw(pubkeys),
        round=draw(st.integers(0, 2**40)),
        payload=payload,
        parents=parents,
        signature=draw(signatures),
    )


@settings(max_examples=200)
@given(headers())
def test_header_roundtrip(h):
    assert BlockHeader.decode(h.encode()) == h


@settings(max_examples=200)
@given(headers(), headers())
def test_header_encoding_injective(a, b):
    if a != b:
        assert a.encode() != b.encode()


def test_parent_change_changes_encoding():
    h = BlockHeader(b"\x01" * 32, 3, (), (b"\x02" * 32, b"\x03" * 32, b"\x04" * 32))
    flipped = BlockHeader(b"\x01" * 32, 3, (), (b"\x02" * 32, b"\x03" * 32, b"\x05" * 32))
    assert h.encode() != flipped.encode()
    assert h.digest() != flipped.digest()


@settings(max_examples=100)
@given(st.lists(st.binary(min_size=1, max_size=64), min_size=1, max_size=20), st.integers(0, 3))
def test_batch_roundtrip(txs, wid):
    b = Batch(tuple(txs), wid)
    decoded = Batch.decode(b.encode())
    assert decoded == b
    assert decoded.digest() == b.digest()


def test_batch_digest_avalanche():
    b = Batch((b"hello world", b"payload"), 0)
    mutated = Batch((b"hello worle", b"payload"), 0)
    assert b.digest() != mutated.digest()


def test_batch_rejects_empty():
    with pytest.raises(ValueError):
        Batch((), 0)
    with pytest.raises(ValueError):
        Batch((b"",), 0)


def test_vote_and_certificate_roundtrip():
    v = Vote(b"\xaa" * 32, 9, b"\xbb" * 32, b"\xcc" * 32, b"\xdd" * 64)
    assert Vote.decode(v.encode()) == v
    c = Certificate(b"\xaa" * 32, 9, b"\xbb" * 32, ((b"\xcc" * 32, b"\xdd" * 64),))
    assert Certificate.decode(c.encode()) == c


def test_truncated_encoding_rejected():
    h = BlockHeader(b"\x01" * 32, 1, (), (b"\x02" * 32,) * 3)
    with pytest.raises(CodecError):
        BlockHeader.decode(h.encode()[:-1])
    with pytest.raises(CodecError):
        BlockHeader.decode(h.encode() + b"\x00")


def test_golden_genesis_encoding():
    committee, keys = build_committee(0, 4)
    a0 = committee.authority(0)
    h = genesis_header(a0.public_key)
    signed = h.with_signature(keys[a0.public_key].sign(h.digest()))
    with open(os.path.join(GOLDEN, "genesis_header_seed0_ord0.bin"), "rb") as fh:
        assert signed.encode() == fh.read()
    with open(os.path.join(GOLDEN, "genesis_digest_seed0_ord0.hex")) as fh:
        assert signed.digest().hex() == fh.read().strip()


@pytest.mark.parametrize("n,f", [(4, 1), (7, 2), (10, 3), (13, 4)])
def test_quorum_arithmetic(n, f):
    committee, _ = build_committee(1, n)
    assert committee.faults == f
    assert committee.quorum == 2 * f + 1
    assert committee.validity == f + 1
    # Quorum intersection: any 2f+1 and any f+1 subsets overlap.
    assert committee.quorum + committee.validity > n


def test_committee_rejects_small():
    with pytest.raises(ValueError):
        build_committee(0, 3)


def test_committee_json_roundtrip():
    committee, _ = build_committee(3, 4, workers=2)
    parsed = Committee.from_json(committee.to_json())
    assert parsed.keys() == committee.keys()
    assert parsed.authority(2).worker_addrs == committee.authority(2).worker_addrs
    assert parsed.epoch == committee.epoch


def test_ordinals_follow_key_order():
    committee, _ = build_committee(7, 7)
    keys = committee.keys()
    assert keys == sorted(keys)
    for i, k in enumerate(keys):
        assert committee.ordinal_of(k) == i


def test_header_shape_checks():
    committee, keys = build_committee(0, 4)
    author = committee.authority(0).public_key
    ok = BlockHeader(author, 0, (), ())
    assert check_header_shape(ok, committee) is None
    assert check_header_shape(BlockHeader(author, 0, (), (b"\x01" * 32,)), committee)
    assert check_header_shape(BlockHeader(author, 2, (), (b"\x01" * 32,) * 2), committee)
    dup = BlockHeader(author, 2, (), (b"\x01" * 32, b"\x01" * 32, b"\x02" * 32))
    assert check_header_shape(dup, committee) == "duplicate parent digest"
    assert check_header_shape(BlockHeader(b"\x09" * 32, 0, (), ()), committee) == "unknown author"


def test_wave_arithmetic():
    assert wave_rounds(1) == (1, 2, 3)
    assert wave_rounds(2) == (3, 4, 5)
    for w in range(1, 50):
        assert WaveNumber(w).coin_round == WaveNumber(w + 1).proposal_round
    with pytest.raises(ValueError):
        WaveNumber(0)
