"""dagmempool: a round-based DAG mempool with availability certificates and
a zero-message asynchronous consensus layer that totally orders it.

Library layout:
    types       canonical domain types, codec, digests
    crypto      Ed25519 keys, signature verification, shared coin
    store       block store with causal reads and pluggable persistence
    primary     the per-validator mempool state machine
    worker      scale-out transaction plane
    consensus   wave interpretation, commit rule, linearization
    netsim      deterministic fault-injecting network simulator
    transport   real-socket transport for local clusters
    bench       benchmark harness, metrics CSVs, agreement checker
"""

from .types import (
    AuthorityId,
    Batch,
    BlockHeader,
    Certificate,
    Committee,
    Digest,
    Vote,
    WaveNumber,
    wave_rounds,
)
from .crypto import CoinSource, KeyPair, SeededCoin, verify
from .store import BlockStore, DiskBackend, IntegrityError, MemoryBackend, MissingAncestors
from .consensus import CommitEvent, Consensus, WaveOutcome
from .primary import Primary, PrimaryConfig
from .worker import Worker, WorkerConfig

__all__ = [
    "AuthorityId",
    "Batch",
    "BlockHeader",
    "Certificate",
    "CoinSource",
    "CommitEvent",
    "Committee",
    "Consensus",
    "Digest",
    "DiskBackend",
    "IntegrityError",
    "KeyPair",
    "MemoryBackend",
    "MissingAncestors",
    "BlockStore",
    "Primary",
    "PrimaryConfig",
    "SeededCoin",
    "Vote",
    "WaveNumber",
    "WaveOutcome",
    "Worker",
    "WorkerConfig",
    "verify",
    "wave_rounds",
]

__version__ = "0.1.0"
