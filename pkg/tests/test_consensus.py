"""Wave interpretation, commit rule, recursive leader ordering, linearization."""

from dagmempool.consensus import Consensus
from dagmempool.crypto import CoinSource
from dagmempool.netsim import build_committee
from dagmempool.store import BlockStore
from dagmempool.types import BlockHeader, Certificate, Vote


class FixedCoin(CoinSource):
    """Test coin with scripted outcomes; unlisted waves fall back to ordinal 0."""

    def __init__(self, outcomes):
        self.outcomes = outcomes

    def leader(self, wave, committee):
        return self.outcomes.get(wave, 0)


class DagBuilder:
    """Hand-built certified DAGs with explicit parent choices."""

    def __init__(self, n=4, seed=0):
        self.committee, self.keys = build_committee(seed, n)
        self.store = BlockStore(self.committee)
        self.by_slot = {}
        self.certs = []

    def header(self, ordinal, round, parents):
        author = self.committee.authority(ordinal).public_key
        h = BlockHeader(author, round, (), tuple(p.digest() for p in parents))
        h = h.with_signature(self.keys[author].sign(h.digest()))
        d = h.digest()
        votes = []
        for a in self.committee.authorities[: self.committee.quorum]:
            sig = self.keys[a.public_key].sign(Vote.signing_digest(d, round, author))
            votes.append((a.public_key, sig))
        cert = Certificate(d, round, author, tuple(votes))
        self.store.write_header(h)
        self.store.write_certificate(cert)
        self.by_slot[(round, ordinal)] = h
        self.certs.append(cert)
        self.certs.sort(key=lambda c: c.round)
        return h

    def layer(self, round, parents, ordinals=range(4)):
        return [self.header(o, round, parents) for o in ordinals]

    def feed(self, consensus):
        events = []
        for cert in self.certs:
            actions = consensus.process_certificate(cert)
            assert not actions.needs_sync
            events.extend(actions.commits)
        return events


def test_two_wave_commit_rule_and_recursive_order():
    """Wave 1's leader has one supporter (ignored); wave 2's leader has f+1,
    commits, and the path back orders leader 1 before leader 2."""
    dag = DagBuilder()
    coin = FixedCoin({1: 0, 2: 1})
    consensus = Consensus(dag.committee, dag.store, coin, gc_depth=50)

    genesis = dag.layer(0, [])
    r1 = dag.layer(1, genesis[:3])
    leader1 = dag.by_slot[(1, 0)]
    others_r1 = [h for h in r1 if h is not leader1]

    # Round 2: only validator 3 links the wave-1 leader.
    supporter = dag.header(3, 2, [leader1] + others_r1[:2])
    non_supporters = [dag.header(o, 2, others_r1) for o in (0, 1, 2)]

    # Round 3: the wave-2 leader (ordinal 1) descends from the supporter,
    # which gives it a path back to leader 1.
    r2 = [supporter] + non_supporters
    leader2 = dag.header(1, 3, r2[:3])
    others_r3 = [dag.header(o, 3, r2[:3]) for o in (0, 2, 3)]

    # Round 4: exactly f+1 = 2 headers reference leader 2.
    r3 = [leader2] + others_r3
    with_l2 = [dag.header(o, 4, [leader2] + others_r3[:2]) for o in (0, 1)]
    without_l2 = [dag.header(o, 4, others_r3) for o in (2, 3)]

    dag.layer(5, with_l2 + without_l2[:1])

    events = dag.feed(consensus)
    assert [e.wave for e in events] == [1, 2]
    assert events[0].leader == leader1.digest()
    assert events[1].leader == leader2.digest()
    assert events[0].trigger_wave == 2 and events[1].trigger_wave == 2
    assert consensus.leader_sequence == [(1, leader1.digest()), (2, leader2.digest())]

    outcome1, outcome2 = consensus.outcomes[0], consensus.outcomes[1]
    assert outcome1.wave == 1 and outcome1.support == 1 and not outcome1.committed
    assert outcome2.wave == 2 and outcome2.support == 2 and outcome2.committed

    emitted_1 = {h.digest() for h in events[0].headers}
    emitted_2 = {h.digest() for h in events[1].headers}
    assert leader1.digest() in emitted_1
    assert leader2.digest() in emitted_2
    assert not emitted_1 & emitted_2  # the second commit emits only the delta


def test_saturated_dag_commits_every_wave():
    dag = DagBuilder()
    consensus = Consensus(dag.committee, dag.store, FixedCoin({1: 2, 2: 3, 3: 0}), gc_depth=50)
    layer = dag.layer(0, [])
    for r in range(1, 8):
        layer = dag.layer(r, layer)
    events = dag.feed(consensus)
    assert [e.wave for e in events] == [1, 2, 3]
    assert all(o.committed for o in consensus.outcomes)
    assert all(o.support == 4 for o in consensus.outcomes)


def test_absent_leader_is_skipped():
    dag = DagBuilder()
    consensus = Consensus(dag.committee, dag.store, FixedCoin({1: 0}), gc_depth=50)
    genesis = dag.layer(0, [])
    # Ordinal 0 produced nothing in round 1: its election must return absent.
    layer = dag.layer(1, genesis[:3], ordinals=(1, 2, 3))
    layer = dag.layer(2, layer[:3])
    dag.layer(3, layer[:3])
    events = dag.feed(consensus)
    assert events == []
    assert consensus.outcomes[0].leader_present is False
    assert consensus.outcomes[0].committed is False


def test_headers_emitted_exactly_once_and_ordered():
    dag = DagBuilder()
    consensus = Consensus(dag.committee, dag.store, FixedCoin({1: 0, 2: 1, 3: 2}), gc_depth=50)
    layer = dag.layer(0, [])
    for r in range(1, 8):
        layer = dag.layer(r, layer)
    events = dag.feed(consensus)
    seen = []
    for e in events:
        keys = [(h.round, dag.committee.ordinal_of(h.author)) for h in e.headers]
        assert keys == sorted(keys)
        seen.extend(h.digest() for h in e.headers)
    assert len(seen) == len(set(seen))


def test_parked_commit_waits_for_missing_ancestry():
    dag = DagBuilder()
    coin = FixedCoin({1: 0})
    consensus = Consensus(dag.committee, dag.store, coin, gc_depth=50)

    genesis = dag.layer(0, [])
    r1 = dag.layer(1, genesis[:3])
    r2 = dag.layer(2, r1[:3])
    dag.layer(3, r2[:3])

    # Withhold one genesis header the leader's history needs.
    victim = genesis[1]
    fresh_store = BlockStore(dag.committee)
    for h in dag.store.all_headers().values():
        if h.digest() != victim.digest():
            fresh_store.write_header(h)
    consensus = Consensus(dag.committee, fresh_store, coin, gc_depth=50)
    pending = []
    for cert in dag.certs:
        fresh_store.write_certificate(cert)
        actions = consensus.process_certificate(cert)
        pending.extend(actions.commits)
        if actions.needs_sync:
            assert victim.digest() in actions.needs_sync
    assert pending == []  # parked on the missing ancestor
    fresh_store.write_header(victim)
    actions = consensus.on_stored(victim.digest())
    assert [e.wave for e in actions.commits] == [1]


def test_gc_round_tracks_leader_round():
    dag = DagBuilder()
    consensus = Consensus(dag.committee, dag.store, FixedCoin({w: 0 for w in range(1, 30)}), gc_depth=4)
    layer = dag.layer(0, [])
    for r in range(1, 16):
        layer = dag.layer(r, layer)
    events = dag.feed(consensus)
    last = events[-1]
    assert last.gc_round == max(0, last.leader_round - 4)
    assert dag.store.watermark == consensus.gc_round
    # Below-watermark history is excluded from later linearizations.
    for e in events:
        for h in e.headers:
            assert h.round > e.gc_round - 1


def test_consensus_has_no_transport():
    """Zero-message consensus: the module cannot address the network at all."""
    dag = DagBuilder()
    consensus = Consensus(dag.committee, dag.store, FixedCoin({}), gc_depth=50)
    forbidden = ("env", "transport", "send", "broadcast", "channel")
    for name in forbidden:
        assert not hasattr(consensus, name)
