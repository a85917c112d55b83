"""Cluster-mode wiring: one process per primary and per worker.

The state machines are the same objects the simulator drives; here an
asyncio runtime feeds them from a single inbox (preserving per-peer order),
timers are loop callbacks that enqueue into the same inbox, and sends go
through reconnecting peer channels. Commit events and wave outcomes are
appended to newline-delimited log files that the bench collector parses.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import signal
import time
from typing import Dict, Optional

from . import messages as msg
from .consensus import CommitEvent, Consensus
from .crypto import KeyPair, SeededCoin
from .primary import Primary, PrimaryConfig
from .store import BlockStore, DiskBackend, MemoryBackend
from .transport import PeerChannel, serve
from .types import Committee, PublicKey
from .worker import Worker, WorkerConfig

logger = logging.getLogger(__name__)

HOT_SAMPLE_TAG = "_hot_sample"


class AsyncEnv:
    """Environment contract implementation over asyncio + peer channels."""

    def __init__(self, runtime: "NodeRuntime", worker_id: Optional[int]) -> None:
        self.runtime = runtime
        self.worker_id = worker_id

    @property
    def worker_count(self) -> int:
        return len(self.runtime.my_authority.worker_addrs)

    def now(self) -> float:
        return time.time()

    def send(self, dest: PublicKey, message: msg.Message, cancel_round: Optional[int] = None) -> None:
        addr = self.runtime.committee_authority(dest).primary_addr
        self.runtime.channel(addr).send(message, cancel_round)

    def broadcast(self, message: msg.Message, cancel_round: Optional[int] = None) -> None:
        for a in self.runtime.committee.authorities:
            if a.public_key != self.runtime.keypair.public:
                self.runtime.channel(a.primary_addr).send(message, cancel_round)

    def send_worker(self, dest: PublicKey, message: msg.Message, cancel_round: Optional[int] = None) -> None:
        addr = self.runtime.committee_authority(dest).worker_addrs[self.worker_id]
        self.runtime.channel(addr).send(message, cancel_round)

    def to_worker(self, worker_id: int, message: msg.Message) -> None:
        addr = self.runtime.my_authority.worker_addrs[worker_id]
        self.runtime.channel(addr).send(message, None)

    def to_primary(self, message: msg.Message) -> None:
        self.runtime.channel(self.runtime.my_authority.primary_addr).send(message, None)

    def set_timer(self, delay: float, tag: str) -> None:
        loop = asyncio.get_event_loop()
        loop.call_later(delay, self.runtime.inbox.put_nowait, ("timer", tag, None))

    def emit_commit(self, event: CommitEvent) -> None:
        self.runtime.write_commit(event)


class NodeRuntime:
    """Shared plumbing for a primary or worker process."""

    def __init__(
        self,
        keypair: KeyPair,
        committee: Committee,
        out_dir: str,
        worker_id: Optional[int] = None,
    ) -> None:
        self.keypair = keypair
        self.committee = committee
        self.worker_id = worker_id
        self.out_dir = out_dir
        self.inbox: "asyncio.Queue" = asyncio.Queue()
        self._channels: Dict[str, PeerChannel] = {}
        self.my_authority = committee.authority(committee.ordinal_of(keypair.public))
        self._commit_log = None
        self._metrics_log = None
        self.machine = None  # set by run_primary / run_worker
        os.makedirs(out_dir, exist_ok=True)

    def committee_authority(self, key: PublicKey):
        return self.committee.authority(self.committee.ordinal_of(key))

    def channel(self, address: str) -> PeerChannel:
        ch = self._channels.get(address)
        if ch is None:
            ch = PeerChannel(address, self.keypair.public)
            self._channels[address] = ch
            ch.start()
        return ch

    def write_commit(self, event: CommitEvent) -> None:
        if self._commit_log is None:
            path = os.path.join(self.out_dir, f"commits-{self.my_authority.ordinal}.jsonl")
            self._commit_log = open(path, "a", encoding="utf-8")
        rec = {
            "t": time.time(),
            "wave": event.wave,
            "trigger": event.trigger_wave,
            "leader": event.leader.hex(),
            "commit_round": event.commit_round,
            "gc": event.gc_round,
            "headers": [h.digest().hex() for h in event.headers],
            "header_rounds": [h.round for h in event.headers],
            "payload": [d.hex() for h in event.headers for d, _w in h.payload],
        }
        self._commit_log.write(json.dumps(rec) + "\n")
        self._commit_log.flush()

    def write_metric(self, doc: dict) -> None:
        if self._metrics_log is None:
            suffix = "primary" if self.worker_id is None else f"worker{self.worker_id}"
            path = os.path.join(
                self.out_dir, f"metrics-{self.my_authority.ordinal}-{suffix}.jsonl"
            )
            self._metrics_log = open(path, "a", encoding="utf-8")
        self._metrics_log.write(json.dumps(doc) + "\n")
        self._metrics_log.flush()

    def on_inbound(self, peer: PublicKey, message: msg.Message) -> None:
        self.inbox.put_nowait(("msg", peer, message))

    async def pump(self) -> None:
        """The single logical protocol thread."""
        machine = self.machine
        is_primary = self.worker_id is None
        last_round = 0
        while True:
            kind, a, b = await self.inbox.get()
            if kind == "msg":
                machine.on_message(b, a)
            elif kind == "timer":
                if a == HOT_SAMPLE_TAG:
                    self.write_metric(
                        {
                            "type": "hot",
                            "t": time.time(),
                            "validator": self.my_authority.ordinal,
                            "hot_rounds": machine.hot_round_span(),
                            "round": machine.round,
                        }
                    )
                    asyncio.get_event_loop().call_later(
                        1.0, self.inbox.put_nowait, ("timer", HOT_SAMPLE_TAG, None)
                    )
                else:
                    machine.on_timer(a)
            if is_primary and machine.round != last_round:
                last_round = machine.round
                for ch in self._channels.values():
                    ch.evict_below(last_round)

    def dump_outcomes(self, consensus: Consensus) -> None:
        for out in consensus.outcomes:
            self.write_metric(
                {
                    "type": "wave",
                    "wave": out.wave,
                    "leader": out.leader_ordinal,
                    "leader_present": out.leader_present,
                    "support": out.support,
                    "committed": out.committed,
                }
            )


def _listen_addr(addr: str):
    host, port = addr.rsplit(":", 1)
    return host, int(port)


async def run_primary(
    keypair: KeyPair,
    committee: Committee,
    out_dir: str,
    coin_seed: bytes,
    gc_depth: int = 50,
    persist: bool = False,
) -> None:
    runtime = NodeRuntime(keypair, committee, out_dir)
    ordinal = committee.ordinal_of(keypair.public)
    if persist:
        backend = DiskBackend(os.path.join(out_dir, f"store-{ordinal}-primary"), durable=False)
    else:
        backend = MemoryBackend()
    store = BlockStore(committee, backend)
    consensus = Consensus(committee, store, SeededCoin(coin_seed), gc_depth=gc_depth)
    env = AsyncEnv(runtime, None)
    primary = Primary(keypair, committee, store, consensus, env, PrimaryConfig(gc_depth=gc_depth))
    runtime.machine = primary

    host, port = _listen_addr(committee.authority(ordinal).primary_addr)
    server = await serve(host, port, runtime.on_inbound)
    stop = asyncio.Event()
    loop = asyncio.get_event_loop()
    for sig in (signal.SIGTERM, signal.SIGINT):
        loop.add_signal_handler(sig, stop.set)
    primary.on_start()
    runtime.inbox.put_nowait(("timer", HOT_SAMPLE_TAG, None))
    pump = loop.create_task(runtime.pump())
    await stop.wait()
    pump.cancel()
    runtime.dump_outcomes(consensus)
    server.close()


async def run_worker(
    keypair: KeyPair,
    committee: Committee,
    out_dir: str,
    worker_id: int,
    persist: bool = True,
) -> None:
    runtime = NodeRuntime(keypair, committee, out_dir, worker_id=worker_id)
    ordinal = committee.ordinal_of(keypair.public)
    if persist:
        backend = DiskBackend(
            os.path.join(out_dir, f"store-{ordinal}-worker{worker_id}"), durable=False
        )
    else:
        backend = MemoryBackend()
    store = BlockStore(committee, backend)
    env = AsyncEnv(runtime, worker_id)
    worker = Worker(keypair, worker_id, committee, store, env, WorkerConfig())
    runtime.machine = worker

    host, port = _listen_addr(committee.authority(ordinal).worker_addrs[worker_id])
    server = await serve(host, port, runtime.on_inbound)
    stop = asyncio.Event()
    loop = asyncio.get_event_loop()
    for sig in (signal.SIGTERM, signal.SIGINT):
        loop.add_signal_handler(sig, stop.set)
    worker.on_start()
    pump = loop.create_task(runtime.pump())
    await stop.wait()
    pump.cancel()
    runtime.write_metric(
        {
            "type": "worker",
            "sealed_batches": worker.sealed_batches,
            "sealed_bytes": worker.sealed_bytes,
        }
    )
    server.close()
