"""Block store: reads, writes, integrity, causal reads, persistence."""

import os
import random
import signal
import subprocess
import sys
import textwrap

import pytest

from dagmempool.netsim import build_committee
from dagmempool.store import BlockStore, DiskBackend, IntegrityError, MissingAncestors
from dagmempool.types import Batch, BlockHeader, Certificate, Vote

from oracle import closure_by_reachability, order_headers


def _certify(committee, keys, header):
    d = header.digest()
    votes = []
    for a in committee.authorities[: committee.quorum]:
        sig = keys[a.public_key].sign(Vote.signing_digest(d, header.round, header.author))
        votes.append((a.public_key, sig))
    return Certificate(d, header.round, header.author, tuple(votes))


def build_dag(committee, keys, rounds, parent_count=None):
    """A full DAG: every validator produces a certified header every round."""
    store = BlockStore(committee)
    by_round = {}
    for r in range(rounds + 1):
        layer = []
        for a in committee.authorities:
            if r == 0:
                parents = ()
            else:
                prev = by_round[r - 1]
                chosen = prev if parent_count is None else prev[:parent_count]
                parents = tuple(h.digest() for h in chosen)
            h = BlockHeader(a.public_key, r, (), parents)
            h = h.with_signature(keys[a.public_key].sign(h.digest()))
            store.write_header(h)
            store.write_certificate(_certify(committee, keys, h))
            layer.append(h)
        by_round[r] = layer
    return store, by_round


@pytest.fixture
def committee_keys():
    return build_committee(0, 4)


def test_read_your_write(committee_keys):
    committee, keys = committee_keys
    store = BlockStore(committee)
    h = BlockHeader(committee.authority(0).public_key, 0, (), ())
    d = store.write_header(h)
    assert store.read(d) == h
    b = Batch((b"tx1", b"tx2"), 0)
    bd = store.write_batch(b)
    assert store.read(bd) == b


def test_write_idempotent(committee_keys):
    committee, _ = committee_keys
    store = BlockStore(committee)
    b = Batch((b"tx",), 0)
    assert store.write_batch(b) == store.write_batch(b)
    assert len(store.all_batches()) == 1


def test_digest_mismatch_rejected(committee_keys):
    committee, _ = committee_keys
    store = BlockStore(committee)
    b = Batch((b"tx",), 0)
    with pytest.raises(IntegrityError):
        store.write_batch(b, expected=b"\x00" * 32)
    h = BlockHeader(committee.authority(0).public_key, 0, (), ())
    with pytest.raises(IntegrityError):
        store.write_header(h, expected=b"\x00" * 32)


def test_read_unknown_is_none(committee_keys):
    committee, _ = committee_keys
    store = BlockStore(committee)
    assert store.read(b"\x99" * 32) is None


def test_conflicting_certificate_flagged(committee_keys):
    committee, keys = committee_keys
    store = BlockStore(committee)
    author = committee.authority(0).public_key
    h1 = BlockHeader(author, 1, (), (b"\x01" * 32,) * 3)
    h2 = BlockHeader(author, 1, ((b"\x05" * 32, 0),), (b"\x01" * 32,) * 3)
    store.write_certificate(_certify(committee, keys, h1))
    with pytest.raises(IntegrityError):
        store.write_certificate(_certify(committee, keys, h2))


def test_read_causal_genesis(committee_keys):
    committee, keys = committee_keys
    store, by_round = build_dag(committee, keys, 0)
    g = by_round[0][0]
    assert store.read_causal(g.digest()) == [g]


def test_read_causal_full_dag_matches_brute_force(committee_keys):
    """Exact closure of a round-2 vertex, checked against independent reachability.

    With all 4 parents everywhere the closure is 1 + 4 + 4 = 9 headers; with
    exactly 3 parents it is whatever reachability says (computed, not assumed).
    """
    committee, keys = committee_keys
    for parent_count, expected_size in ((None, 9), (3, None)):
        store, by_round = build_dag(committee, keys, 2, parent_count)
        headers = store.all_headers()
        for start in by_round[2]:
            got = store.read_causal(start.digest())
            want = order_headers(committee, headers, closure_by_reachability(headers, start.digest()))
            assert [h.digest() for h in got] == want
            if expected_size is not None:
                assert len(got) == expected_size


def test_read_causal_order_is_round_then_ordinal(committee_keys):
    committee, keys = committee_keys
    store, by_round = build_dag(committee, keys, 3)
    out = store.read_causal(by_round[3][2].digest())
    key = [(h.round, committee.ordinal_of(h.author)) for h in out]
    assert key == sorted(key)


def test_read_causal_missing_ancestor_names_digests(committee_keys):
    committee, keys = committee_keys
    store, by_round = build_dag(committee, keys, 2)
    victim = by_round[1][1]
    # Rebuild without one round-1 header to simulate a sync gap.
    fresh = BlockStore(committee)
    for h in store.all_headers().values():
        if h.digest() != victim.digest():
            fresh.write_header(h)
    for c in store.all_certificates().values():
        fresh.write_certificate(c)
    with pytest.raises(MissingAncestors) as err:
        fresh.read_causal(by_round[2][0].digest())
    assert victim.digest() in err.value.missing


def test_read_causal_respects_watermark(committee_keys):
    committee, keys = committee_keys
    store, by_round = build_dag(committee, keys, 4)
    store.watermark = 2
    out = store.read_causal(by_round[4][0].digest())
    assert all(h.round > 2 for h in out)
    # The queried digest itself is always included, even at the watermark.
    store.watermark = 4
    assert store.read_causal(by_round[4][0].digest()) == [by_round[4][0]]


def test_containment_property(committee_keys):
    """Nested causal reads are subsets: 100 random (d, d') pairs."""
    committee, keys = committee_keys
    store, by_round = build_dag(committee, keys, 5, parent_count=3)
    rng = random.Random(7)
    tops = [h for r in range(1, 6) for h in by_round[r]]
    for _ in range(100):
        start = rng.choice(tops)
        outer = store.read_causal(start.digest())
        inner_seed = rng.choice(outer)
        inner = store.read_causal(inner_seed.digest())
        assert {h.digest() for h in inner} <= {h.digest() for h in outer}


def test_disk_backend_roundtrip(tmp_path, committee_keys):
    committee, keys = committee_keys
    store = BlockStore(committee, DiskBackend(str(tmp_path), durable=False))
    b = Batch((b"tx-on-disk",), 1)
    d = store.write_batch(b)
    h = BlockHeader(committee.authority(1).public_key, 0, (), ())
    hd = store.write_header(h)
    store.write_certificate(_certify(committee, keys, h))
    store.close()

    again = BlockStore(committee, DiskBackend(str(tmp_path), durable=False))
    assert again.batch(d) == b
    assert again.header(hd) == h
    assert again.certificate_at(0, 1) is not None


def test_disk_backend_survives_torn_tail(tmp_path, committee_keys):
    committee, _ = committee_keys
    store = BlockStore(committee, DiskBackend(str(tmp_path), durable=False))
    d = store.write_batch(Batch((b"alpha",), 0))
    store.close()
    with open(tmp_path / "batches.log", "ab") as fh:
        fh.write(b"\x40\x00\x00\x00partial-garbage")  # truncated record
    again = BlockStore(committee, DiskBackend(str(tmp_path), durable=False))
    assert again.batch(d) is not None
    assert again.write_batch(Batch((b"beta",), 0))  # appends still work


KILL_SCRIPT = textwrap.dedent(
    """
    import sys
    from dagmempool.netsim import build_committee
    from dagmempool.store import BlockStore, DiskBackend
    from dagmempool.types import Batch

    committee, _ = build_committee(0, 4)
    store = BlockStore(committee, DiskBackend(sys.argv[1], durable=True))
    store.write_batch(Batch((b"durable-payload",), 0))
    print("written", flush=True)
    import time
    time.sleep(30)
    """
)


def test_kill_and_restart_preserves_durable_write(tmp_path):
    """SIGKILL after a durable write; a fresh open must still read it."""
    proc = subprocess.Popen(
        [sys.executable, "-c", KILL_SCRIPT, str(tmp_path)],
        stdout=subprocess.PIPE,
    )
    assert proc.stdout.readline().strip() == b"written"
    os.kill(proc.pid, signal.SIGKILL)
    proc.wait()

    committee, _ = build_committee(0, 4)
    store = BlockStore(committee, DiskBackend(str(tmp_path), durable=True))
    b = Batch((b"durable-payload",), 0)
    assert store.batch(b.digest()) == b
