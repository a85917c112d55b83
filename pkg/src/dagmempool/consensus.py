"""Zero-message consensus over the certificate DAG.

The local DAG is interpreted in overlapping 3-round waves (proposal, vote,
coin). When the coin round of a wave accumulates a quorum of certificates,
the shared coin elects a leader in retrospect; the leader commits if at
least f+1 certified vote-round headers reference it as a parent. Committed
leaders are ordered by walking back to the last decided wave along parent
paths, then each leader's not-yet-emitted causal history is linearized in
(round, author ordinal) order.

This module deliberately has no way to send messages: it consumes
certificate-insertion events and produces commit events and sync demands,
nothing else. Ordering is free-riding on mempool traffic.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Set, Tuple

from .crypto import CoinSource
from .store import BlockStore, MissingAncestors
from .types import BlockHeader, Certificate, Committee, Digest, wave_of_coin_round

logger = logging.getLogger(__name__)

DEFAULT_GC_DEPTH = 50


@dataclass
class CommitEvent:
    """One leader's linearization: the ordered headers newly emitted under it."""

    wave: int  # wave whose leader this is
    trigger_wave: int  # wave whose direct commit caused this emission
    leader: Digest  # leader header digest
    leader_round: int
    headers: List[BlockHeader]
    commit_round: int  # coin round of the trigger wave
    gc_round: int  # consensus-agreed watermark after this commit

    def payload_digests(self) -> List[Tuple[Digest, int]]:
        out: List[Tuple[Digest, int]] = []
        for h in self.headers:
            out.extend(h.payload)
        return out


@dataclass
class WaveOutcome:
    """Per-wave record of the direct commit-rule evaluation."""

    wave: int
    leader_ordinal: int
    leader_present: bool
    support: int
    committed: bool


@dataclass
class ConsensusActions:
    """What the caller (the primary) must do after feeding the consensus."""

    commits: List[CommitEvent] = field(default_factory=list)
    needs_sync: List[Digest] = field(default_factory=list)


class Consensus:
    """Per-validator ordering state machine driven by certificate insertions."""

    def __init__(
        self,
        committee: Committee,
        store: BlockStore,
        coin: CoinSource,
        gc_depth: int = DEFAULT_GC_DEPTH,
    ) -> None:
        self.committee = committee
        self.store = store
        self.coin = coin
        self.gc_depth = gc_depth

        self.decided_wave = 0
        self.gc_round = -1  # consensus-agreed watermark; -1 until GC engages
        self.emitted: Set[Digest] = set()
        self.committed_payload: Set[Digest] = set()
        self.leader_sequence: List[Tuple[int, Digest]] = []  # (wave, leader header digest)
        self.outcomes: List[WaveOutcome] = []

        self._round_counts: Dict[int, int] = {}
        self._evaluated: Set[int] = set()
        # Direct commits waiting for their leader's causal history to be local.
        self._parked: Deque[Tuple[int, Certificate]] = deque()
        self._parked_missing: Set[Digest] = set()

    # -- feed --------------------------------------------------------------

    def process_certificate(self, cert: Certificate) -> ConsensusActions:
        """Counts the certificate toward its wave and evaluates ready waves.

        The certificate must already be stored and deduplicated by the
        caller: each (round, author) slot is counted once.
        """
        n = self._round_counts.get(cert.round, 0) + 1
        self._round_counts[cert.round] = n
        actions = ConsensusActions()
        wave = wave_of_coin_round(cert.round)
        if wave is not None and n == self.committee.quorum and wave not in self._evaluated:
            self._evaluate_wave(wave)
        self._drain(actions)
        return actions

    def on_stored(self, digest: Digest) -> ConsensusActions:
        """Retries parked commits after the synchronizer stored `digest`."""
        actions = ConsensusActions()
        if self._parked and (not self._parked_missing or digest in self._parked_missing):
            self._drain(actions)
        return actions

    # -- wave interpretation -------------------------------------------------

    def _evaluate_wave(self, wave: int) -> None:
        """One-shot commit-rule check at the moment the coin round completes."""
        self._evaluated.add(wave)
        leader_ord = self.coin.leader(wave, self.committee)
        proposal_round = 2 * wave - 1
        leader_cert = self.store.certificate_at(proposal_round, leader_ord)
        support = 0
        if leader_cert is not None:
            support = self._support(leader_cert.header_digest, 2 * wave)
        committed = leader_cert is not None and support >= self.committee.validity
        self.outcomes.append(
            WaveOutcome(wave, leader_ord, leader_cert is not None, support, committed)
        )
        if committed and wave > self.decided_wave:
            self._parked.append((wave, leader_cert))

    def _support(self, leader_digest: Digest, vote_round: int) -> int:
        """Certified vote-round headers with a direct parent edge to the leader."""
        count = 0
        for cert in self.store.certificates_in_round(vote_round):
            h = self.store.header(cert.header_digest)
            if h is not None and leader_digest in h.parents:
                count += 1
        return count

    # -- commit processing ---------------------------------------------------

    def _drain(self, actions: ConsensusActions) -> None:
        """Processes parked commits in order; stalls on missing ancestry.

        Commit processing is strictly sequential: a commit's linearization
        completes before the next wave's commit is looked at, so emission
        order is identical across validators.
        """
        while self._parked:
            wave, leader_cert = self._parked[0]
            if wave <= self.decided_wave:
                self._parked.popleft()
                continue
            missing = self._missing_ancestry(leader_cert.header_digest)
            if missing:
                self._parked_missing = set(missing)
                actions.needs_sync.extend(missing)
                return
            self._parked_missing = set()
            self._parked.popleft()
            actions.commits.extend(self._commit(wave, leader_cert))

    def _missing_ancestry(self, digest: Digest) -> List[Digest]:
        try:
            self.store.read_causal(digest)
        except MissingAncestors as exc:
            return list(exc.missing)
        return []

    def _commit(self, wave: int, leader_cert: Certificate) -> List[CommitEvent]:
        """Orders skipped leaders back to the decided wave, then linearizes.

        A prior wave's leader qualifies when its header is reachable from the
        current stack top via parent edges. Reachability implies the header
        was certified (parents only ever reference certified headers), so the
        test is a property of the DAG content, never of certificate arrival
        timing; that is what makes all honest validators agree on the same
        leader sequence.
        """
        stack: List[Tuple[int, Digest, int]] = [
            (wave, leader_cert.header_digest, leader_cert.round)
        ]
        top = leader_cert.header_digest
        for prior in range(wave - 1, self.decided_wave, -1):
            cand_ord = self.coin.leader(prior, self.committee)
            cand = self._reachable_leader(top, 2 * prior - 1, cand_ord)
            if cand is not None:
                stack.append((prior, cand, 2 * prior - 1))
                top = cand
        self.decided_wave = wave
        events: List[CommitEvent] = []
        for w, digest, rnd in reversed(stack):
            events.append(self._linearize(w, wave, digest, rnd))
        return events

    def _reachable_leader(self, frm: Digest, round: int, ordinal: int) -> Optional[Digest]:
        """The header of `ordinal` at `round` within frm's ancestry, if any."""
        author = self.committee.authority(ordinal).public_key
        seen: Set[Digest] = {frm}
        frontier = [frm]
        while frontier:
            nxt: List[Digest] = []
            for d in frontier:
                h = self.store.header(d)
                if h is None or h.round < round:
                    continue
                if h.round == round:
                    if h.author == author:
                        return d
                    continue
                for pd in h.parents:
                    if pd not in seen:
                        seen.add(pd)
                        nxt.append(pd)
            frontier = nxt
        return None

    def _linearize(
        self, wave: int, trigger_wave: int, leader_digest: Digest, leader_round: int
    ) -> CommitEvent:
        closure = self.store.read_causal(leader_digest)
        fresh = [
            h
            for h in closure
            if h.round > self.gc_round and h.digest() not in self.emitted
        ]
        for h in fresh:
            self.emitted.add(h.digest())
            for d, _wid in h.payload:
                self.committed_payload.add(d)
        self.gc_round = max(self.gc_round, max(0, leader_round - self.gc_depth))
        # The consensus-agreed watermark is what cuts causal reads from now on.
        self.store.watermark = self.gc_round
        self.leader_sequence.append((wave, leader_digest))
        return CommitEvent(
            wave=wave,
            trigger_wave=trigger_wave,
            leader=leader_digest,
            leader_round=leader_round,
            headers=fresh,
            commit_round=2 * trigger_wave + 1,
            gc_round=self.gc_round,
        )
