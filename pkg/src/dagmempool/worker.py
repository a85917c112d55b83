"""Scale-out transaction plane: batch client transactions, disseminate them
to same-index workers at other validators, report quorum-acknowledged batch
digests to the own primary, and serve batch pulls.

Workers never share mutable state with each other or with the primary;
coordination is message-only, so any number of workers per validator run
concurrently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Set

from . import messages as msg
from .crypto import KeyPair, verify
from .store import BlockStore
from .types import Batch, Committee, Digest, MAX_TRANSACTION_SIZE, PublicKey

logger = logging.getLogger(__name__)

SEAL_TICK = "seal"
RETX_TICK = "retx"


@dataclass
class WorkerConfig:
    batch_max_txs: int = 1000
    batch_max_bytes: int = 500 * 1024
    batch_interval: float = 0.1  # seal an under-filled batch after this long
    retransmit_interval: float = 0.5
    pull_timeout: float = 0.2
    max_tx_size: int = MAX_TRANSACTION_SIZE


@dataclass
class _Inflight:
    batch: Batch
    acked: Set[int]
    carried_round: Optional[int] = None
    reported: bool = False


@dataclass
class _Pull:
    digest: Digest
    targets: List[PublicKey]
    next_target: int
    trigger_round: int
    deadline: float


class Worker:
    """One worker state machine; `worker_id` pairs it with the same index at peers."""

    def __init__(
        self,
        keypair: KeyPair,
        worker_id: int,
        committee: Committee,
        store: BlockStore,
        env,
        config: Optional[WorkerConfig] = None,
    ) -> None:
        self.keypair = keypair
        self.worker_id = worker_id
        self.committee = committee
        self.store = store
        self.env = env
        self.config = config or WorkerConfig()
        self.name = keypair.public
        self.ordinal = committee.ordinal_of(self.name)

        self.buffer: List[bytes] = []
        self.buffer_bytes = 0
        self._seal_timer_at: Optional[float] = None
        self.inflight: Dict[Digest, _Inflight] = {}
        self.pulls: Dict[Digest, _Pull] = {}
        self.primary_round = 0
        self.sealed_batches = 0
        self.sealed_bytes = 0

    def on_start(self) -> None:
        self.env.set_timer(self.config.retransmit_interval, RETX_TICK)

    # ------------------------------------------------------------- ingestion

    def on_transaction(self, tx: bytes) -> bool:
        """Buffers a client transaction; False rejects it back to the client."""
        if not tx or len(tx) > self.config.max_tx_size:
            return False
        self.buffer.append(tx)
        self.buffer_bytes += len(tx)
        if (
            len(self.buffer) >= self.config.batch_max_txs
            or self.buffer_bytes >= self.config.batch_max_bytes
        ):
            self._seal()
        elif self._seal_timer_at is None:
            self._seal_timer_at = self.env.now() + self.config.batch_interval
            self.env.set_timer(self.config.batch_interval, SEAL_TICK)
        return True

    def _seal(self) -> None:
        if not self.buffer:
            return
        batch = Batch(tuple(self.buffer), self.worker_id)
        self.buffer = []
        self.buffer_bytes = 0
        self._seal_timer_at = None
        d = self.store.write_batch(batch)
        self.sealed_batches += 1
        self.sealed_bytes += batch.size_bytes()
        entry = _Inflight(batch, acked={self.ordinal})
        self.inflight[d] = entry
        for peer in self.committee.authorities:
            if peer.public_key != self.name:
                self.env.send_worker(peer.public_key, msg.BatchMsg(batch), cancel_round=None)
        self._maybe_report(d, entry)

    def _maybe_report(self, digest: Digest, entry: _Inflight) -> None:
        if not entry.reported and len(entry.acked) >= self.committee.quorum:
            entry.reported = True
            self.env.to_primary(
                msg.BatchDigestReport(digest, self.worker_id, entry.batch.size_bytes())
            )

    # ----------------------------------------------------------------- inbox

    def on_message(self, message: msg.Message, sender: PublicKey) -> None:
        if isinstance(message, msg.BatchMsg):
            self._on_batch(message.batch, sender)
        elif isinstance(message, msg.BatchAck):
            self._on_ack(message)
        elif isinstance(message, msg.BatchRequest):
            self._on_request(message)
        elif isinstance(message, msg.BatchReply):
            self._on_reply(message)
        elif isinstance(message, msg.BatchPullCommand):
            self._on_pull_command(message)
        elif isinstance(message, msg.PrimaryStatus):
            self._on_primary_status(message)
        elif isinstance(message, msg.TxSubmit):
            self.on_transaction(message.transaction)
        else:
            logger.warning("worker %d/%d: unexpected %r", self.ordinal, self.worker_id, message)

    def on_timer(self, tag: str) -> None:
        if tag == SEAL_TICK:
            if self._seal_timer_at is not None and self.env.now() >= self._seal_timer_at:
                self._seal()
        elif tag == RETX_TICK:
            self._retransmit()
            self._pull_tick()
            self.env.set_timer(self.config.retransmit_interval, RETX_TICK)

    # ------------------------------------------------------- dissemination

    def _on_batch(self, batch: Batch, sender: PublicKey) -> None:
        d = self.store.write_batch(batch)
        if self.committee.is_member(sender) and sender != self.name:
            sig = self.keypair.sign(d)
            self.env.send_worker(sender, msg.BatchAck(d, self.name, sig), cancel_round=None)
        self.env.to_primary(msg.BatchStored(d, self.worker_id))

    def _on_ack(self, ack: msg.BatchAck) -> None:
        entry = self.inflight.get(ack.digest)
        if entry is None or not self.committee.is_member(ack.voter):
            return
        if not verify(ack.voter, ack.digest, ack.signature):
            return
        entry.acked.add(self.committee.ordinal_of(ack.voter))
        self._maybe_report(ack.digest, entry)

    def _retransmit(self) -> None:
        """Re-sends unacked batches; stops once the carrying round has passed.

        The store keeps the batch either way, only the push effort is bounded.
        """
        done: List[Digest] = []
        for d, entry in self.inflight.items():
            if entry.carried_round is not None and self.primary_round > entry.carried_round:
                done.append(d)
                continue
            if len(entry.acked) == self.committee.size:
                done.append(d)
                continue
            for peer in self.committee.authorities:
                if peer.ordinal != self.ordinal and peer.ordinal not in entry.acked:
                    self.env.send_worker(peer.public_key, msg.BatchMsg(entry.batch), cancel_round=None)
        for d in done:
            del self.inflight[d]

    # ------------------------------------------------------------ batch pull

    def _on_request(self, req: msg.BatchRequest) -> None:
        if not self.committee.is_member(req.requester) or req.requester == self.name:
            return
        batch = self.store.batch(req.digest)
        self.env.send_worker(req.requester, msg.BatchReply(req.digest, batch), cancel_round=None)

    def _on_reply(self, reply: msg.BatchReply) -> None:
        pull = self.pulls.get(reply.digest)
        if reply.batch is None:
            if pull is not None:
                self._fire_pull(pull)  # rotate to the next holder right away
            return
        if reply.batch.digest() != reply.digest:
            return  # integrity check failed; rotation will retry elsewhere
        self.store.write_batch(reply.batch)
        self.pulls.pop(reply.digest, None)
        self.env.to_primary(msg.BatchStored(reply.digest, self.worker_id))

    def _on_pull_command(self, cmd: msg.BatchPullCommand) -> None:
        if self.store.batch(cmd.digest) is not None:
            self.env.to_primary(msg.BatchStored(cmd.digest, self.worker_id))
            return
        if cmd.digest in self.pulls:
            return
        targets = [cmd.author] + [k for k in cmd.fallbacks if k != self.name and k != cmd.author]
        for a in self.committee.authorities:
            if a.public_key != self.name and a.public_key not in targets:
                targets.append(a.public_key)
        pull = _Pull(cmd.digest, targets, 0, cmd.trigger_round, 0.0)
        self.pulls[cmd.digest] = pull
        self._fire_pull(pull)

    def _fire_pull(self, pull: _Pull) -> None:
        target = pull.targets[pull.next_target % len(pull.targets)]
        pull.next_target += 1
        pull.deadline = self.env.now() + self.config.pull_timeout
        self.env.send_worker(target, msg.BatchRequest(pull.digest, self.name), cancel_round=None)

    def _pull_tick(self) -> None:
        now = self.env.now()
        for d in list(self.pulls):
            pull = self.pulls[d]
            if self.primary_round > pull.trigger_round:
                # Abandoned with its round; re-triggered if a certificate
                # later demands the batch.
                del self.pulls[d]
            elif now >= pull.deadline:
                self._fire_pull(pull)

    # -------------------------------------------------------- primary status

    def _on_primary_status(self, status: msg.PrimaryStatus) -> None:
        self.primary_round = max(self.primary_round, status.round)
        for d in status.carried:
            entry = self.inflight.get(d)
            if entry is not None and entry.carried_round is None:
                entry.carried_round = status.round
        for d in status.certified:
            self.inflight.pop(d, None)
