"""Deterministic seeded network simulator with fault injection.

Implements the asynchronous eventually-reliable link contract: messages may
be delayed arbitrarily and dropped, but only a finite number of drops per
directed link is allowed (a configurable cap), after which delivery is
forced. Crashes, partitions, Byzantine behaviors, and adversarial delivery
schedulers are injected on top. A run is a pure function of its config:
identical seeds produce byte-identical reports.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import random
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Set, Tuple

from . import messages as msg
from .consensus import CommitEvent, Consensus, WaveOutcome
from .crypto import KeyPair, SeededCoin
from .primary import Primary, PrimaryConfig
from .store import BlockStore, MemoryBackend
from .types import BlockHeader, Certificate, Committee, Digest, PublicKey
from .worker import Worker, WorkerConfig

PRIMARY_ROLE = -1  # worker roles are their non-negative worker ids
LOCAL_DELAY = 0.0005  # primary <-> own worker control channel


@dataclass
class CrashSpec:
    ordinal: int
    time: float


@dataclass
class PartitionSpec:
    side_a: Tuple[int, ...]
    side_b: Tuple[int, ...]
    start: float
    end: float


@dataclass
class InjectSpec:
    """Fixed-rate client load, split evenly over each validator's workers."""

    rate: float  # transactions per second per validator
    tx_size: int = 512
    until: float = 0.0  # 0 means: keep injecting for the whole run
    track_every: int = 100


@dataclass
class SimConfig:
    seed: int
    n: int = 4
    workers: int = 1
    duration: float = 30.0
    delay: Tuple[str, float, float] = ("uniform", 0.02, 0.20)
    # uniform_jam model: validators independently enter slow windows, like a
    # WAN node falling behind; messages touching a jammed validator stretch.
    jam_window: float = 1.0
    jam_prob: float = 0.0
    jam_factor: Tuple[float, float] = (3.0, 6.0)
    drop_prob: float = 0.0
    drop_cap: int = 20  # finite-loss budget per directed link
    retx_backoff: float = 0.25  # re-send delay paid per lost transmission
    crashes: Tuple[CrashSpec, ...] = ()
    partitions: Tuple[PartitionSpec, ...] = ()
    byzantine: Tuple[Tuple[int, str], ...] = ()  # (ordinal, behavior)
    adversary: Optional[str] = None  # support_minimizer | leader_isolator | round_staller
    gc_depth: int = 50
    sync_timeout: float = 0.25
    inject: Optional[InjectSpec] = None
    bandwidth: Optional[float] = None  # egress bytes/sec per machine (role)
    batch_max_txs: int = 1000
    batch_max_bytes: int = 500 * 1024
    batch_interval: float = 0.1
    worker_retx: float = 0.5
    snapshot: bool = False

    def validate(self) -> None:
        if self.n < 4:
            raise ValueError("need at least 4 validators")
        f = (self.n - 1) // 3
        if len(self.crashes) > f:
            raise ValueError("crash schedule exceeds f")
        if self.drop_cap < 0 or not (0.0 <= self.drop_prob < 1.0):
            raise ValueError("bad drop model")


def build_committee(seed: int, n: int, workers: int = 1) -> Tuple[Committee, Dict[PublicKey, KeyPair]]:
    """Deterministic committee: keypairs derived from the seed, localhost ports."""
    pairs = [KeyPair.from_seed(f"{seed}:{i}".encode()) for i in range(n)]
    pairs.sort(key=lambda kp: kp.public)
    entries = []
    for i, kp in enumerate(pairs):
        base = 7000 + i * 100
        entries.append(
            (kp.public, f"127.0.0.1:{base}", [f"127.0.0.1:{base + 1 + w}" for w in range(workers)])
        )
    committee = Committee.from_entries(entries)
    return committee, {kp.public: kp for kp in pairs}


# ---------------------------------------------------------------------------
# Byzantine behaviors (test adversaries running inside a validator)
# ---------------------------------------------------------------------------


class EquivocatingPrimary(Primary):
    """Signs two headers per round (parents reordered) and shows each to half
    the peers; honest first-seen voting must keep either one from conflicting."""

    def _propose(self, round: int) -> None:
        if round in self.my_headers:
            return
        if round == 0:
            super()._propose(round)  # genesis has nothing to twist
            return
        from .types import Vote

        payload = tuple(self.pending_payload)
        self.pending_payload.clear()
        self._pending_payload_set.clear()
        prev = self.certs_by_round.get(round - 1, {})
        parents = tuple(prev[o].header_digest for o in sorted(prev))
        twins: List[BlockHeader] = []
        for variant in (parents, tuple(reversed(parents))):
            header = BlockHeader(self.name, round, payload, variant)
            twins.append(header.with_signature(self._sign(header.digest())))
        self.my_headers[round] = twins[0]
        for h in twins:
            self.store.write_header(h)
            self.vote_aggregators[h.digest()] = {
                self.ordinal: self._sign(Vote.signing_digest(h.digest(), round, self.name))
            }
        # Overlapping halves: the middle peer receives both twins, which is
        # what lets honest validators witness and flag the equivocation.
        peers = [a.public_key for a in self.committee.authorities if a.public_key != self.name]
        half = len(peers) // 2
        for peer in peers[: half + 1]:
            self.env.send(peer, msg.HeaderMsg(twins[0]), cancel_round=round)
        for peer in peers[half:]:
            self.env.send(peer, msg.HeaderMsg(twins[1]), cancel_round=round)


class MutePrimary(Primary):
    """Never proposes; still votes and relays certificates."""

    def _propose(self, round: int) -> None:
        return


class SelectiveVoterPrimary(Primary):
    """Votes only for authors in the lower half of the committee."""

    def _send_vote(self, header: BlockHeader) -> None:
        if self.committee.ordinal_of(header.author) >= self.committee.size // 2:
            return
        super()._send_vote(header)


BYZANTINE_KINDS = {
    "equivocator": EquivocatingPrimary,
    "mute": MutePrimary,
    "selective": SelectiveVoterPrimary,
}


# ---------------------------------------------------------------------------
# Adversarial delivery schedulers
# ---------------------------------------------------------------------------


class Adversary:
    """Reorders and delays deliveries within the eventual-reliability contract."""

    def __init__(self, committee: Committee, rng: random.Random) -> None:
        self.committee = committee
        self.rng = rng

    def hold(self, message: msg.Message, src: int, dst: int) -> Optional[int]:
        """Returns a round R to hold the message until dst passes R, or None."""
        return None

    def extra_delay(self, message: msg.Message, src: int, dst: int) -> float:
        return 0.0


class SupportMinimizer(Adversary):
    """Starves f rotating victims' proposal-round certificates of vote-round
    parent links, minimizing the number of leaders with f+1 support."""

    def victims(self, wave: int) -> Set[int]:
        f = self.committee.faults
        return {(wave + k) % self.committee.size for k in range(f)}

    def hold(self, message: msg.Message, src: int, dst: int) -> Optional[int]:
        if isinstance(message, msg.CertificateMsg):
            cert = message.certificate
            if cert.round >= 1 and cert.round % 2 == 1:  # a proposal round
                wave = (cert.round + 1) // 2
                if self.committee.ordinal_of(cert.author) in self.victims(wave):
                    return cert.round  # release once dst advanced past round
        return None


class LeaderIsolator(Adversary):
    """Delays one fixed validator's certificates, mostly past inclusion windows.

    The delay is bounded (eventual reliability), so occasionally a
    certificate still lands in time and drags the whole self-parent chain
    into a committed causal history.
    """

    TARGET = 0
    DELAY_PROB = 0.7

    def extra_delay(self, message: msg.Message, src: int, dst: int) -> float:
        if isinstance(message, msg.CertificateMsg):
            if self.committee.ordinal_of(message.certificate.author) == self.TARGET:
                if self.rng.random() < self.DELAY_PROB:
                    return self.rng.uniform(0.3, 0.9)
        return 0.0


class RoundStaller(Adversary):
    """Slows every message touching one validator; quorums exclude it anyway."""

    TARGET = 0

    def extra_delay(self, message: msg.Message, src: int, dst: int) -> float:
        if src == self.TARGET or dst == self.TARGET:
            return self.rng.uniform(0.2, 0.6)
        return 0.0


ADVERSARIES = {
    "support_minimizer": SupportMinimizer,
    "leader_isolator": LeaderIsolator,
    "round_staller": RoundStaller,
}


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class CommitRecord:
    time: float
    trigger_wave: int
    wave: int
    leader: Digest
    headers: Tuple[Digest, ...]
    header_rounds: Tuple[int, ...]
    payload: Tuple[Digest, ...]
    commit_round: int
    gc_round: int


@dataclass
class SimReport:
    config: SimConfig
    commit_logs: List[List[CommitRecord]]
    outcomes: List[List[WaveOutcome]]
    census: Counter
    census_bytes: Counter
    hot_samples: List[Tuple[float, int, int]]  # (time, ordinal, round span)
    submitted: List[Tuple[Tuple[int, int], float, bool]]  # (txid, time, probe)
    batch_txids: Dict[Digest, List[Tuple[int, int]]]
    batch_sizes: Dict[Digest, int]
    cert_availability: List[Tuple[Digest, int]]  # honest holders at formation
    equivocations: int
    final_rounds: List[int]
    snapshots: Optional[List[dict]] = None

    def longest_log(self) -> List[CommitRecord]:
        return max(self.commit_logs, key=len) if self.commit_logs else []

    def trace_hash(self) -> str:
        h = hashlib.sha256()
        for log in self.commit_logs:
            for rec in log:
                h.update(rec.leader)
                h.update(len(rec.headers).to_bytes(4, "little"))
                for d in rec.headers:
                    h.update(d)
        for tag in sorted(self.census):
            h.update(f"{tag}:{self.census[tag]}:{self.census_bytes[tag]}".encode())
        for t, o, s in self.hot_samples:
            h.update(f"{t:.3f}:{o}:{s}".encode())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# The simulator
# ---------------------------------------------------------------------------


class _EventLogStore(BlockStore):
    """Block store that logs header-store events for snapshot replays."""

    def __init__(self, committee: Committee, sim: "Simulation", ordinal: int) -> None:
        super().__init__(committee, MemoryBackend())
        self._sim = sim
        self._ordinal = ordinal

    def write_header(self, header: BlockHeader, expected=None) -> Digest:
        fresh = header.digest() not in self._headers
        d = super().write_header(header, expected)
        if fresh:
            self._sim._events[self._ordinal].append(("H", d))
        return d


class _SimEnv:
    """Environment handed to one state machine (a primary or one worker)."""

    __slots__ = ("sim", "ordinal", "role")

    def __init__(self, sim: "Simulation", ordinal: int, role: int) -> None:
        self.sim = sim
        self.ordinal = ordinal
        self.role = role

    @property
    def worker_count(self) -> int:
        return self.sim.config.workers

    def now(self) -> float:
        return self.sim.now

    def send(self, dest: PublicKey, message: msg.Message, cancel_round: Optional[int] = None) -> None:
        self.sim.transmit(self.ordinal, self.role, self.sim.ordinal_of(dest), PRIMARY_ROLE, message)

    def broadcast(self, message: msg.Message, cancel_round: Optional[int] = None) -> None:
        for a in self.sim.committee.authorities:
            if a.ordinal != self.ordinal:
                self.sim.transmit(self.ordinal, self.role, a.ordinal, PRIMARY_ROLE, message)

    def send_worker(self, dest: PublicKey, message: msg.Message, cancel_round: Optional[int] = None) -> None:
        self.sim.transmit(self.ordinal, self.role, self.sim.ordinal_of(dest), self.role, message)

    def to_worker(self, worker_id: int, message: msg.Message) -> None:
        self.sim.local(self.ordinal, worker_id, message)

    def to_primary(self, message: msg.Message) -> None:
        self.sim.local(self.ordinal, PRIMARY_ROLE, message)

    def set_timer(self, delay: float, tag: str) -> None:
        self.sim.schedule_timer(self.ordinal, self.role, delay, tag)

    def emit_commit(self, event: CommitEvent) -> None:
        self.sim.record_commit(self.ordinal, event)


class Simulation:
    """Single-threaded virtual-time event loop driving all validators."""

    def __init__(self, config: SimConfig) -> None:
        config.validate()
        self.config = config
        self.committee, self._keys = build_committee(config.seed, config.n, config.workers)
        self._ordinals: Dict[PublicKey, int] = {
            a.public_key: a.ordinal for a in self.committee.authorities
        }
        base = f"sim:{config.seed}"
        self._rng_delay = random.Random(_substream(base, "delay"))
        self._rng_drop = random.Random(_substream(base, "drop"))
        self._rng_tie = random.Random(_substream(base, "tie"))
        self._rng_inject = random.Random(_substream(base, "inject"))
        self._rng_adv = random.Random(_substream(base, "adv"))
        self.coin = SeededCoin(f"coin:{config.seed}".encode())

        self.now = 0.0
        self._queue: List[Tuple[float, float, int, Callable[[], None]]] = []
        self._seq = itertools.count()
        self.crashed: Set[int] = set()
        self._drops_used: Dict[Tuple[int, int], int] = {}
        self._busy_until: Dict[Tuple[int, int], float] = {}
        self._retx_backoff = config.retx_backoff

        byz = dict(config.byzantine)
        self.primaries: List[Primary] = []
        self.workers: List[List[Worker]] = []
        self.stores: List[BlockStore] = []
        self.consensuses: List[Consensus] = []
        self.honest: Set[int] = set()
        pcfg = PrimaryConfig(gc_depth=config.gc_depth, sync_timeout=config.sync_timeout)
        wcfg = WorkerConfig(
            batch_max_txs=config.batch_max_txs,
            batch_max_bytes=config.batch_max_bytes,
            batch_interval=config.batch_interval,
            retransmit_interval=config.worker_retx,
            pull_timeout=config.sync_timeout,
        )
        for a in self.committee.authorities:
            if config.snapshot:
                store = _EventLogStore(self.committee, self, a.ordinal)
            else:
                store = BlockStore(self.committee, MemoryBackend())
            consensus = Consensus(self.committee, store, self.coin, gc_depth=config.gc_depth)
            kind = byz.get(a.ordinal)
            cls = BYZANTINE_KINDS[kind] if kind else Primary
            primary = cls(
                self._keys[a.public_key],
                self.committee,
                store,
                consensus,
                _SimEnv(self, a.ordinal, PRIMARY_ROLE),
                pcfg,
            )
            primary.cert_hook = self._make_cert_hook(a.ordinal)
            if kind is None:
                self.honest.add(a.ordinal)
            self.stores.append(store)
            self.consensuses.append(consensus)
            self.primaries.append(primary)
            self.workers.append(
                [
                    Worker(
                        self._keys[a.public_key],
                        w,
                        self.committee,
                        store,
                        _SimEnv(self, a.ordinal, w),
                        wcfg,
                    )
                    for w in range(config.workers)
                ]
            )

        adv_cls = ADVERSARIES.get(config.adversary) if config.adversary else None
        self.adversary: Optional[Adversary] = (
            adv_cls(self.committee, self._rng_adv) if adv_cls else None
        )
        # Messages held by the adversary until the destination passes a round.
        self._held: Dict[int, List[Tuple[int, int, int, msg.Message]]] = {}

        # Recording
        self._commit_logs: List[List[CommitRecord]] = [[] for _ in range(config.n)]
        self._census: Counter = Counter()
        self._census_bytes: Counter = Counter()
        self._hot_samples: List[Tuple[float, int, int]] = []
        self._submitted: List[Tuple[Tuple[int, int], float, bool]] = []
        self._tx_seq = [0] * config.n
        self._batch_txids: Dict[Digest, List[Tuple[int, int]]] = {}
        self._batch_sizes: Dict[Digest, int] = {}
        self._cert_avail: List[Tuple[Digest, int]] = []
        # Interleaved header-store / certificate-accept events per validator;
        # the from-snapshot oracle replays these to rebuild evaluation-time views.
        self._events: List[List[Tuple[str, Digest]]] = [[] for _ in range(config.n)]

    # ------------------------------------------------------------- plumbing

    def ordinal_of(self, key: PublicKey) -> int:
        return self._ordinals[key]

    def _make_cert_hook(self, ordinal: int):
        def hook(cert: Certificate) -> None:
            if self.config.snapshot:
                self._events[ordinal].append(("C", cert.header_digest))
            if self.ordinal_of(cert.author) == ordinal:
                # Formation point: count honest validators already storing it.
                holders = sum(
                    1
                    for o in self.honest
                    if o not in self.crashed and self.stores[o].header(cert.header_digest) is not None
                )
                self._cert_avail.append((cert.header_digest, holders))

        return hook

    def _push(self, time: float, fn: Callable[[], None]) -> None:
        heapq.heappush(self._queue, (time, self._rng_tie.random(), next(self._seq), fn))

    def schedule_timer(self, ordinal: int, role: int, delay: float, tag: str) -> None:
        def fire() -> None:
            if ordinal in self.crashed:
                return
            self._machine(ordinal, role).on_timer(tag)

        self._push(self.now + delay, fire)

    def _machine(self, ordinal: int, role: int):
        return self.primaries[ordinal] if role == PRIMARY_ROLE else self.workers[ordinal][role]

    def _partitioned(self, a: int, b: int) -> Optional[float]:
        """End time of a partition currently separating a and b, else None."""
        for p in self.config.partitions:
            if p.start <= self.now < p.end:
                if (a in p.side_a and b in p.side_b) or (a in p.side_b and b in p.side_a):
                    return p.end
        return None

    def _jam(self, ordinal: int) -> float:
        """Slowdown multiplier for a validator in the current jam window."""
        window = int(self.now / self.config.jam_window)
        raw = hashlib.sha256(f"{self.config.seed}:jam:{ordinal}:{window}".encode()).digest()
        u = int.from_bytes(raw[:8], "little") / 2**64
        if u >= self.config.jam_prob:
            return 1.0
        lo, hi = self.config.jam_factor
        v = int.from_bytes(raw[8:16], "little") / 2**64
        return lo + (hi - lo) * v

    def _sample_delay(self, src: int, dst: int) -> float:
        kind, p1, p2 = self.config.delay
        if kind == "uniform":
            return self._rng_delay.uniform(p1, p2)
        if kind == "uniform_jam":
            base = self._rng_delay.uniform(p1, p2)
            return base * max(self._jam(src), self._jam(dst))
        if kind == "lognormal":
            return self._rng_delay.lognormvariate(p1, p2)
        if kind == "fixed":
            return p1
        raise ValueError(f"unknown delay model {kind}")

    def transmit(self, src: int, src_role: int, dst: int, dst_role: int, message: msg.Message) -> None:
        """Network send: census, bandwidth, partitions, drops, adversary."""
        if src in self.crashed:
            return
        self._census[message.tag] += 1
        self._census_bytes[message.tag] += message.wire_size
        link = (src * 1024 + (src_role + 1), dst * 1024 + (dst_role + 1))

        if self.adversary is not None:
            held_round = self.adversary.hold(message, src, dst)
            if held_round is not None and self.primaries[dst].round <= held_round:
                self._held.setdefault(dst, []).append((held_round, src, dst_role, message))
                return
            extra = self.adversary.extra_delay(message, src, dst)
        else:
            extra = 0.0

        depart = self.now
        if self.config.bandwidth:
            key = (src, src_role)
            start = max(self.now, self._busy_until.get(key, 0.0))
            depart = start + message.wire_size / self.config.bandwidth
            self._busy_until[key] = depart

        delay = self._sample_delay(src, dst) + extra
        arrive = depart + delay
        part_end = self._partitioned(src, dst)
        if part_end is not None:
            # Stream messages survive partitions: the transport reconnects and
            # re-sends anything still relevant once the link heals.
            arrive = part_end + delay
        while self.config.drop_prob > 0.0 and self._rng_drop.random() < self.config.drop_prob:
            used = self._drops_used.get(link, 0)
            if used >= self.config.drop_cap:
                break  # finite-loss budget spent: delivery is now guaranteed
            self._drops_used[link] = used + 1
            arrive += self._retx_backoff  # lost on the wire, re-sent after a timeout
        self._push(arrive, lambda: self._deliver(src, dst, dst_role, message))

    def local(self, ordinal: int, role: int, message: msg.Message) -> None:
        """Primary <-> own-worker control channel; not network traffic."""
        self._push(self.now + LOCAL_DELAY, lambda: self._deliver(ordinal, ordinal, role, message))

    def _deliver(self, src: int, dst: int, role: int, message: msg.Message) -> None:
        if dst in self.crashed:
            return
        sender = self.committee.authority(src).public_key
        self._machine(dst, role).on_message(message, sender)
        self._release_held(dst)

    def _release_held(self, dst: int) -> None:
        held = self._held.get(dst)
        if not held:
            return
        rnd = self.primaries[dst].round
        keep: List[Tuple[int, int, int, msg.Message]] = []
        for held_round, src, role, message in held:
            if rnd > held_round:
                self._push(
                    self.now + LOCAL_DELAY,
                    lambda m=message, s=src, r=role: self._deliver(s, dst, r, m),
                )
            else:
                keep.append((held_round, src, role, message))
        if keep:
            self._held[dst] = keep
        else:
            del self._held[dst]

    # ------------------------------------------------------------ recording

    def record_commit(self, ordinal: int, event: CommitEvent) -> None:
        payload: List[Digest] = []
        for h in event.headers:
            payload.extend(d for d, _ in h.payload)
        self._commit_logs[ordinal].append(
            CommitRecord(
                time=self.now,
                trigger_wave=event.trigger_wave,
                wave=event.wave,
                leader=event.leader,
                headers=tuple(h.digest() for h in event.headers),
                header_rounds=tuple(h.round for h in event.headers),
                payload=tuple(payload),
                commit_round=event.commit_round,
                gc_round=event.gc_round,
            )
        )

    # ------------------------------------------------------------- injection

    def _inject_chunk(self, ordinal: int, interval: float) -> None:
        spec = self.config.inject
        if spec is None or ordinal in self.crashed:
            return
        until = spec.until if spec.until > 0 else self.config.duration
        if self.now >= until:
            return
        count = spec.rate * interval
        whole = int(count)
        if self._rng_inject.random() < count - whole:
            whole += 1
        for _ in range(whole):
            seq = self._tx_seq[ordinal]
            self._tx_seq[ordinal] = seq + 1
            probe = spec.track_every > 0 and seq % spec.track_every == 0
            tx = make_transaction(ordinal, seq, self.now, probe, spec.tx_size)
            txid = (ordinal, seq)
            self._submitted.append((txid, self.now, probe))
            worker = self.workers[ordinal][seq % self.config.workers]
            worker.on_transaction(tx)
        self._push(self.now + interval, lambda: self._inject_chunk(ordinal, interval))

    def _sample(self, interval: float) -> None:
        for a in self.committee.authorities:
            if a.ordinal in self.crashed:
                continue
            self._hot_samples.append(
                (self.now, a.ordinal, self.primaries[a.ordinal].hot_round_span())
            )
        if self.now + interval <= self.config.duration:
            self._push(self.now + interval, lambda: self._sample(interval))

    # ------------------------------------------------------------------ run

    def run(self) -> SimReport:
        cfg = self.config
        for a in self.committee.authorities:
            ordinal = a.ordinal
            self._push(0.0, lambda o=ordinal: self._start_validator(o))
        for crash in cfg.crashes:
            self._push(crash.time, lambda o=crash.ordinal: self.crashed.add(o))
        if cfg.inject is not None:
            interval = 0.05
            for a in self.committee.authorities:
                self._push(0.0, lambda o=a.ordinal: self._inject_chunk(o, interval))
        self._push(1.0, lambda: self._sample(1.0))

        while self._queue:
            time, _, _, fn = heapq.heappop(self._queue)
            if time > cfg.duration:
                break
            self.now = time
            fn()

        return self._build_report()

    def _start_validator(self, ordinal: int) -> None:
        if ordinal in self.crashed:
            return
        self.primaries[ordinal].on_start()
        for w in self.workers[ordinal]:
            w.on_start()

    def _build_report(self) -> SimReport:
        for store in self.stores:
            for d, batch in store.all_batches().items():
                if d not in self._batch_txids:
                    self._batch_txids[d] = [tx_id(t) for t in batch.transactions]
                    self._batch_sizes[d] = batch.size_bytes()
        snapshots = None
        if self.config.snapshot:
            snapshots = []
            for a in self.committee.authorities:
                store = self.stores[a.ordinal]
                snapshots.append(
                    {
                        "certs": store.all_certificates(),
                        "headers": store.all_headers(),
                        "events": list(self._events[a.ordinal]),
                    }
                )
        return SimReport(
            config=self.config,
            commit_logs=self._commit_logs,
            outcomes=[c.outcomes for c in self.consensuses],
            census=self._census,
            census_bytes=self._census_bytes,
            hot_samples=self._hot_samples,
            submitted=self._submitted,
            batch_txids=self._batch_txids,
            batch_sizes=self._batch_sizes,
            cert_availability=self._cert_avail,
            equivocations=sum(len(p.equivocations) for p in self.primaries),
            final_rounds=[p.round for p in self.primaries],
            snapshots=snapshots,
        )


def _substream(base: str, label: str) -> int:
    return int.from_bytes(hashlib.sha256(f"{base}:{label}".encode()).digest()[:8], "little")


# ---------------------------------------------------------------------------
# Benchmark transaction layout (shared with the cluster bench client)
# ---------------------------------------------------------------------------

_TX_HEADER = 29  # 4 client + 8 seq + 8 timestamp(us) + 1 probe + 8 magic


def make_transaction(client: int, seq: int, submit_time: float, probe: bool, size: int) -> bytes:
    """(client id, sequence, timestamp, probe flag) padded to `size` bytes."""
    if size < _TX_HEADER:
        size = _TX_HEADER
    head = (
        client.to_bytes(4, "little")
        + seq.to_bytes(8, "little")
        + int(submit_time * 1e6).to_bytes(8, "little")
        + (b"\x01" if probe else b"\x00")
        + b"dagbench"
    )
    return head + b"\x00" * (size - len(head))


def tx_id(tx: bytes) -> Tuple[int, int]:
    return (
        int.from_bytes(tx[0:4], "little"),
        int.from_bytes(tx[4:12], "little"),
    )


def tx_fields(tx: bytes) -> Tuple[int, int, float, bool]:
    client, seq = tx_id(tx)
    ts = int.from_bytes(tx[12:20], "little") / 1e6
    probe = tx[20] == 1
    return client, seq, ts, probe


def run(config: SimConfig) -> SimReport:
    """Runs one simulation; bit-deterministic for a given config."""
    return Simulation(config).run()
