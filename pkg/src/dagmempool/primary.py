"""The per-validator primary: round advancement, proposals, votes, certificates,
pull-based synchronization, and garbage collection with payload re-injection.

The primary is a single logical state machine consuming an ordered inbox of
peer messages plus notifications from its own workers. All state mutations
happen on that single logical thread; network I/O and persistence interact
with it only through the environment object, which keeps simulation runs
bit-deterministic under a seeded scheduler.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from . import messages as msg
from .consensus import Consensus, ConsensusActions, CommitEvent
from .crypto import KeyPair, verify
from .store import BlockStore, IntegrityError
from .types import (
    BlockHeader,
    Certificate,
    Committee,
    Digest,
    PublicKey,
    Vote,
    check_certificate_shape,
    check_header_shape,
)

logger = logging.getLogger(__name__)

SYNC_TICK = "sync"


@dataclass
class PrimaryConfig:
    gc_depth: int = 50
    sync_timeout: float = 0.2  # per-request wait before rotating to the next signer
    sync_fanout: int = 1  # concurrent holders asked per missing digest


@dataclass
class SyncTask:
    digest: Digest
    round: int
    targets: List[PublicKey]  # rotation order; cycles on exhaustion
    next_target: int = 0
    deadline: float = 0.0


@dataclass
class EquivocationRecord:
    author_ordinal: int
    round: int
    first: Digest
    second: Digest


class Primary:
    """One validator's mempool state machine.

    The environment supplies time, timers, peer sends, and the local worker
    control channel; see `netsim.SimEnv` and `node.AsyncEnv` for the two
    implementations.
    """

    def __init__(
        self,
        keypair: KeyPair,
        committee: Committee,
        store: BlockStore,
        consensus: Consensus,
        env,
        config: Optional[PrimaryConfig] = None,
    ) -> None:
        self.keypair = keypair
        self.committee = committee
        self.store = store
        self.consensus = consensus
        self.env = env
        self.config = config or PrimaryConfig()
        self.name = keypair.public
        self.ordinal = committee.ordinal_of(self.name)

        self.round = 0
        self.gc_round = -1
        # Hot working sets, released as the watermark rises.
        self.certs_by_round: Dict[int, Dict[int, Certificate]] = {}
        self.votes_issued: Dict[Tuple[int, int], Digest] = {}
        self.my_headers: Dict[int, BlockHeader] = {}
        self.vote_aggregators: Dict[Digest, Dict[int, bytes]] = {}

        self.pending_payload: List[Tuple[Digest, int]] = []
        self._pending_payload_set: Set[Digest] = set()
        self.worker_confirmed: Set[Digest] = set()

        # Headers parked until their parents' certificates or payload arrive.
        self.future_headers: Dict[int, Dict[int, BlockHeader]] = {}
        self.waiting_parents: Dict[Digest, Tuple[BlockHeader, Set[Digest]]] = {}
        self._parent_waiters: Dict[Digest, Set[Digest]] = {}
        self.waiting_payload: Dict[Digest, Tuple[BlockHeader, Set[Digest]]] = {}
        self._payload_waiters: Dict[Digest, Set[Digest]] = {}

        self.sync_tasks: Dict[Digest, SyncTask] = {}
        self.equivocations: List[EquivocationRecord] = []
        self.started = False
        self.cert_hook = None  # harness callback on every accepted certificate

    # ------------------------------------------------------------------ util

    def _sign(self, digest: Digest) -> bytes:
        return self.keypair.sign(digest)

    def _notify_workers(self, status: msg.PrimaryStatus) -> None:
        for wid in range(self.env.worker_count):
            self.env.to_worker(wid, status)

    # ----------------------------------------------------------------- start

    def on_start(self) -> None:
        """Proposes the genesis header; round 0 needs no parent certificates."""
        self.started = True
        self.env.set_timer(self.config.sync_timeout, SYNC_TICK)
        self._propose(0)

    # -------------------------------------------------------------- proposal

    def _propose(self, round: int) -> None:
        if round in self.my_headers:
            return  # single-proposal rule: never sign twice for one round
        payload = tuple(self.pending_payload)
        self.pending_payload.clear()
        self._pending_payload_set.clear()
        if round == 0:
            parents: Tuple[Digest, ...] = ()
        else:
            prev = self.certs_by_round.get(round - 1, {})
            parents = tuple(prev[o].header_digest for o in sorted(prev))
            if len(parents) < self.committee.quorum:
                raise RuntimeError("proposal without a parent quorum")
        header = BlockHeader(self.name, round, payload, parents)
        header = header.with_signature(self._sign(header.digest()))
        self.my_headers[round] = header
        self.store.write_header(header)
        d = header.digest()
        # Self-acknowledgment counts toward the certificate quorum.
        self.vote_aggregators[d] = {
            self.ordinal: self._sign(Vote.signing_digest(d, round, self.name))
        }
        self.votes_issued[(round, self.ordinal)] = d
        self.env.broadcast(msg.HeaderMsg(header), cancel_round=round)
        if payload:
            self._notify_workers(
                msg.PrimaryStatus(round=round, carried=tuple(p[0] for p in payload), certified=())
            )
        self._maybe_certify(d)

    # ----------------------------------------------------------------- inbox

    def on_message(self, message: msg.Message, sender: PublicKey) -> None:
        if isinstance(message, msg.HeaderMsg):
            self._on_header(message.header)
        elif isinstance(message, msg.VoteMsg):
            self._on_vote(message.vote)
        elif isinstance(message, msg.CertificateMsg):
            self._on_certificate(message.certificate)
        elif isinstance(message, msg.SyncRequest):
            self._on_sync_request(message)
        elif isinstance(message, msg.SyncReply):
            self._on_sync_reply(message)
        elif isinstance(message, msg.BatchDigestReport):
            self._on_batch_report(message)
        elif isinstance(message, msg.BatchStored):
            self._on_batch_stored(message)
        else:
            logger.warning("primary %d: unexpected message %r", self.ordinal, message)

    def on_timer(self, tag: str) -> None:
        if tag == SYNC_TICK:
            self._sync_tick()
            self.env.set_timer(self.config.sync_timeout, SYNC_TICK)

    # ---------------------------------------------------------------- header

    def _on_header(self, header: BlockHeader) -> None:
        if header.author == self.name:
            return
        if check_header_shape(header, self.committee) is not None:
            return
        if not verify(header.author, header.digest(), header.signature):
            return
        if header.round <= self.gc_round or header.round < self.round:
            return  # stale; its author's certificate may still arrive via others
        if header.round > self.round:
            slot = self.future_headers.setdefault(header.round, {})
            ordinal = self.committee.ordinal_of(header.author)
            kept = slot.get(ordinal)
            if kept is None:
                slot[ordinal] = header
            elif kept.digest() != header.digest():
                self._flag_equivocation(header, kept.digest())
            return
        self._try_vote(header)

    def _try_vote(self, header: BlockHeader) -> None:
        """Validity conditions: author signature (already checked), exact local
        round, a certified parent quorum, first-from-author, and payload
        batches stored by own workers."""
        if header.round != self.round:
            return
        ordinal = self.committee.ordinal_of(header.author)
        d = header.digest()
        slot = (header.round, ordinal)
        issued = self.votes_issued.get(slot)
        if issued is not None:
            if issued != d:
                self._flag_equivocation(header, issued)
                return
            self._send_vote(header)  # duplicate delivery: re-send the same vote
            return

        if header.round > 0:
            missing, reason = self._check_parents(header)
            if reason is not None:
                return
            if missing:
                self.waiting_parents[d] = (header, set(missing))
                for pd in missing:
                    self._parent_waiters.setdefault(pd, set()).add(d)
                    self._request_sync(pd, header.round, [header.author])
                return

        absent = [
            (bd, wid) for bd, wid in header.payload if bd not in self.worker_confirmed
        ]
        if absent:
            self.waiting_payload[d] = (header, {bd for bd, _ in absent})
            signers = self._signers_for(header)
            for bd, wid in absent:
                self._payload_waiters.setdefault(bd, set()).add(d)
                self.env.to_worker(
                    wid,
                    msg.BatchPullCommand(bd, wid, header.author, signers, header.round),
                )
            return

        self.store.write_header(header)
        self.votes_issued[slot] = d
        self._send_vote(header)

    def _check_parents(self, header: BlockHeader) -> Tuple[List[Digest], Optional[str]]:
        """Returns (missing parent digests, hard-invalidity reason)."""
        missing: List[Digest] = []
        authors: Set[PublicKey] = set()
        for pd in header.parents:
            cert = self.store.certificate(pd)
            if cert is None:
                missing.append(pd)
                continue
            if cert.round != header.round - 1:
                return [], "parent from wrong round"
            authors.add(cert.author)
        if not missing and len(authors) < self.committee.quorum:
            return [], "parent authors not distinct"
        return missing, None

    def _send_vote(self, header: BlockHeader) -> None:
        d = header.digest()
        sig = self._sign(Vote.signing_digest(d, header.round, header.author))
        vote = Vote(d, header.round, header.author, self.name, sig)
        self.env.send(header.author, msg.VoteMsg(vote), cancel_round=header.round)

    def _flag_equivocation(self, header: BlockHeader, first: Digest) -> None:
        rec = EquivocationRecord(
            self.committee.ordinal_of(header.author), header.round, first, header.digest()
        )
        self.equivocations.append(rec)
        logger.warning(
            "primary %d: equivocation by %d at round %d",
            self.ordinal,
            rec.author_ordinal,
            rec.round,
        )

    def _signers_for(self, header: BlockHeader) -> Tuple[PublicKey, ...]:
        cert = self.store.certificate(header.digest())
        if cert is not None:
            return tuple(v for v, _ in cert.votes if v != self.name)
        return ()

    # ------------------------------------------------------------------ vote

    def _on_vote(self, vote: Vote) -> None:
        agg = self.vote_aggregators.get(vote.header_digest)
        if agg is None or not self.committee.is_member(vote.voter):
            return
        ordinal = self.committee.ordinal_of(vote.voter)
        if ordinal in agg:
            return
        if not verify(
            vote.voter, Vote.signing_digest(vote.header_digest, vote.round, vote.origin), vote.signature
        ):
            return  # corrupt vote discarded; a replacement may still arrive
        agg[ordinal] = vote.signature
        self._maybe_certify(vote.header_digest)

    def _maybe_certify(self, header_digest: Digest) -> None:
        agg = self.vote_aggregators.get(header_digest)
        if agg is None or len(agg) < self.committee.quorum:
            return
        header = self.store.header(header_digest)
        if header is None:
            return
        votes = tuple(
            (self.committee.authority(o).public_key, agg[o]) for o in sorted(agg)
        )
        cert = Certificate(header_digest, header.round, self.name, votes)
        del self.vote_aggregators[header_digest]
        try:
            self.store.write_certificate(cert)
        except IntegrityError:
            return
        self.env.broadcast(
            msg.CertificateMsg(cert), cancel_round=cert.round + self.config.gc_depth
        )
        if header.payload:
            self._notify_workers(
                msg.PrimaryStatus(
                    round=self.round, carried=(), certified=tuple(p[0] for p in header.payload)
                )
            )
        self._accept_certificate(cert)

    # ----------------------------------------------------------- certificate

    def _on_certificate(self, cert: Certificate) -> None:
        if cert.round <= self.gc_round:
            return  # below the watermark: safely ignored
        if self.certs_by_round.get(cert.round, {}).get(
            self.committee.ordinal_of(cert.author)
        ) is not None:
            existing = self.certs_by_round[cert.round][self.committee.ordinal_of(cert.author)]
            if existing.header_digest != cert.header_digest:
                logger.error(
                    "primary %d: conflicting certificates at (%d, %s)",
                    self.ordinal,
                    cert.round,
                    cert.author.hex()[:8],
                )
            return
        if not self._verify_certificate(cert):
            return
        try:
            self.store.write_certificate(cert)
        except IntegrityError:
            logger.error("primary %d: certificate slot conflict", self.ordinal)
            return
        self._accept_certificate(cert)

    def _verify_certificate(self, cert: Certificate) -> bool:
        if check_certificate_shape(cert, self.committee) is not None:
            return False
        signed = cert.signing_digest()
        good = 0
        for voter, sig in cert.votes:
            if verify(voter, signed, sig):
                good += 1
        return good >= self.committee.quorum

    def _accept_certificate(self, cert: Certificate) -> None:
        """Indexes a verified certificate, syncs its header if absent, feeds
        consensus, and advances the round when a quorum completes."""
        ordinal = self.committee.ordinal_of(cert.author)
        self.certs_by_round.setdefault(cert.round, {})[ordinal] = cert
        if self.cert_hook is not None:
            self.cert_hook(cert)
        if self.store.header(cert.header_digest) is None:
            self._request_sync(
                cert.header_digest,
                cert.round,
                [v for v, _ in cert.votes if v != self.name],
            )
        self._unblock_parent_waiters(cert.header_digest)
        self._apply_consensus(self.consensus.process_certificate(cert), cert)
        self._try_advance()

    def _apply_consensus(self, actions: ConsensusActions, origin: Optional[Certificate]) -> None:
        for d in actions.needs_sync:
            targets: List[PublicKey] = []
            cert = self.store.certificate(d)
            if cert is not None:
                targets = [v for v, _ in cert.votes if v != self.name]
            elif origin is not None:
                targets = [v for v, _ in origin.votes if v != self.name]
            self._request_sync(d, origin.round if origin is not None else self.round, targets)
        for event in actions.commits:
            self._on_commit(event)

    def _try_advance(self) -> None:
        advanced = False
        while len(self.certs_by_round.get(self.round, {})) >= self.committee.quorum:
            self.round += 1
            advanced = True
        if not advanced:
            return
        # After a multi-round catch-up only the newest round is proposed; a
        # header for an already-passed round could not gather votes anyway.
        self._propose(self.round)
        self._notify_workers(msg.PrimaryStatus(round=self.round, carried=(), certified=()))
        for r in [r for r in self.future_headers if r < self.round]:
            del self.future_headers[r]
        for h in list(self.future_headers.pop(self.round, {}).values()):
            self._try_vote(h)
        for d in [d for d, (h, _) in self.waiting_payload.items() if h.round < self.round]:
            self._drop_payload_wait(d)
        for d in [d for d, (h, _) in self.waiting_parents.items() if h.round < self.round]:
            self._drop_parent_wait(d)

    # ------------------------------------------------------------------ sync

    def _request_sync(self, digest: Digest, round: int, targets: Sequence[PublicKey]) -> None:
        if digest in self.sync_tasks or round <= self.gc_round:
            return
        if self.store.header(digest) is not None and self.store.certificate(digest) is not None:
            return
        # Preferred holders first (signers or the author), then everyone else,
        # so rotation eventually reaches an honest validator that stores it.
        order = [t for t in targets if t != self.name]
        seen = set(order)
        for a in self.committee.authorities:
            if a.public_key != self.name and a.public_key not in seen:
                order.append(a.public_key)
        task = SyncTask(digest, round, order)
        self.sync_tasks[digest] = task
        self._fire_sync(task)

    def _fire_sync(self, task: SyncTask) -> None:
        for _ in range(self.config.sync_fanout):
            target = task.targets[task.next_target % len(task.targets)]
            task.next_target += 1
            self.env.send(
                target,
                msg.SyncRequest((task.digest,), self.name),
                cancel_round=None,
            )
        task.deadline = self.env.now() + self.config.sync_timeout

    def _sync_tick(self) -> None:
        now = self.env.now()
        for task in list(self.sync_tasks.values()):
            if task.round <= self.gc_round or (
                self.store.header(task.digest) is not None
                and self.store.certificate(task.digest) is not None
            ):
                del self.sync_tasks[task.digest]
            elif now >= task.deadline:
                self._fire_sync(task)  # rotate to the next signer and retry

    def _on_sync_request(self, req: msg.SyncRequest) -> None:
        headers: List[BlockHeader] = []
        certs: List[Certificate] = []
        for d in req.digests:
            h = self.store.header(d)
            if h is not None:
                headers.append(h)
            c = self.store.certificate(d)
            if c is not None:
                certs.append(c)
        if headers or certs:
            self.env.send(
                req.requester,
                msg.SyncReply(tuple(headers), tuple(certs)),
                cancel_round=None,
            )

    def _on_sync_reply(self, reply: msg.SyncReply) -> None:
        for cert in reply.certificates:
            self._on_certificate(cert)
        for header in reply.headers:
            d = header.digest()
            if d in self.sync_tasks or d in self._parent_waiters or self.store.certificate(d) is not None:
                if check_header_shape(header, self.committee) is not None:
                    continue
                if not verify(header.author, d, header.signature):
                    continue
                self.store.write_header(header)
                self.sync_tasks.pop(d, None)
                self._apply_consensus(self.consensus.on_stored(d), None)
                self._unblock_parent_waiters(d)

    def _unblock_parent_waiters(self, parent_digest: Digest) -> None:
        # A parent becomes usable once its *certificate* is known; header
        # arrival matters for consensus but voting needs the certificate.
        # Sorted iteration keeps emission order independent of hash seeds.
        waiting = sorted(self._parent_waiters.pop(parent_digest, set()))
        for wd in waiting:
            entry = self.waiting_parents.get(wd)
            if entry is None:
                continue
            header, missing = entry
            missing.discard(parent_digest)
            if not missing:
                del self.waiting_parents[wd]
                self._try_vote(header)

    def _drop_parent_wait(self, digest: Digest) -> None:
        entry = self.waiting_parents.pop(digest, None)
        if entry is None:
            return
        _, missing = entry
        for pd in missing:
            waiters = self._parent_waiters.get(pd)
            if waiters is not None:
                waiters.discard(digest)
                if not waiters:
                    del self._parent_waiters[pd]

    def _drop_payload_wait(self, digest: Digest) -> None:
        entry = self.waiting_payload.pop(digest, None)
        if entry is None:
            return
        _, missing = entry
        for bd in missing:
            waiters = self._payload_waiters.get(bd)
            if waiters is not None:
                waiters.discard(digest)
                if not waiters:
                    del self._payload_waiters[bd]

    # --------------------------------------------------------------- workers

    def _on_batch_report(self, report: msg.BatchDigestReport) -> None:
        """Own worker sealed a batch and a quorum acknowledged it."""
        self.worker_confirmed.add(report.digest)
        if report.digest not in self._pending_payload_set:
            self._pending_payload_set.add(report.digest)
            self.pending_payload.append((report.digest, report.worker_id))
        self._on_batch_available(report.digest)

    def _on_batch_stored(self, stored: msg.BatchStored) -> None:
        self.worker_confirmed.add(stored.digest)
        self._on_batch_available(stored.digest)

    def _on_batch_available(self, digest: Digest) -> None:
        waiting = sorted(self._payload_waiters.pop(digest, set()))
        for wd in waiting:
            entry = self.waiting_payload.get(wd)
            if entry is None:
                continue
            header, missing = entry
            missing.discard(digest)
            if not missing:
                del self.waiting_payload[wd]
                self._try_vote(header)

    # -------------------------------------------------------------- commits

    def _on_commit(self, event: CommitEvent) -> None:
        self.env.emit_commit(event)
        self._garbage_collect(event.gc_round)

    def _garbage_collect(self, new_gc: int) -> None:
        """Raises the watermark, releases hot state, and re-injects payload
        from own headers that fell below the cut without being committed."""
        if new_gc <= self.gc_round:
            return
        self.gc_round = new_gc
        self.store.watermark = max(self.store.watermark, new_gc)
        for r in [r for r in self.certs_by_round if r <= new_gc]:
            del self.certs_by_round[r]
        for key in [k for k in self.votes_issued if k[0] <= new_gc]:
            del self.votes_issued[key]
        for r in [r for r in self.future_headers if r <= new_gc]:
            del self.future_headers[r]
        for d in [d for d, t in self.sync_tasks.items() if t.round <= new_gc]:
            del self.sync_tasks[d]
        for d in [d for d, (h, _) in self.waiting_parents.items() if h.round <= new_gc]:
            self._drop_parent_wait(d)
        for d in [d for d, (h, _) in self.waiting_payload.items() if h.round <= new_gc]:
            self._drop_payload_wait(d)
        for r in [r for r in self.my_headers if r <= new_gc]:
            header = self.my_headers.pop(r)
            d = header.digest()
            self.vote_aggregators.pop(d, None)
            if d in self.consensus.emitted:
                continue
            for bd, wid in header.payload:
                # Re-inject anything not committed by now; a batch stranded a
                # second time is picked up again at a later GC pass.
                if bd in self.consensus.committed_payload:
                    continue
                if bd not in self._pending_payload_set:
                    self._pending_payload_set.add(bd)
                    self.pending_payload.append((bd, wid))

    # ------------------------------------------------------------- inspection

    def hot_round_span(self) -> int:
        """Rounds with live working sets; bounded once GC engages."""
        return self.round - self.gc_round
