"""Core domain types, canonical binary encoding, and digest computation.

Every value that crosses a validator boundary (headers, votes, certificates,
batches) has a canonical encoding: length-prefixed variable fields in
declaration order, fixed-width little-endian integers, raw bytes for
fixed-size cryptographic material. Digests are SHA-256 over that encoding,
so they are stable across platforms and in-memory layouts.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

DIGEST_SIZE = 32
PUBLIC_KEY_SIZE = 32
SIGNATURE_SIZE = 64

# Default transaction size cap (bytes); benchmark transactions are far smaller.
MAX_TRANSACTION_SIZE = 64 * 1024

Digest = bytes  # exactly DIGEST_SIZE bytes; equality is byte equality
PublicKey = bytes  # exactly PUBLIC_KEY_SIZE bytes


class CodecError(ValueError):
    """Raised when a byte string is not a valid canonical encoding."""


def digest_of_bytes(data: bytes) -> Digest:
    return hashlib.sha256(data).digest()


# ---------------------------------------------------------------------------
# Canonical codec primitives
# ---------------------------------------------------------------------------

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class Encoder:
    """Accumulates canonically encoded fields in declaration order."""

    __slots__ = ("_parts",)

    def __init__(self) -> None:
        self._parts: List[bytes] = []

    def u8(self, v: int) -> "Encoder":
        self._parts.append(bytes((v,)))
        return self

    def u32(self, v: int) -> "Encoder":
        self._parts.append(_U32.pack(v))
        return self

    def u64(self, v: int) -> "Encoder":
        self._parts.append(_U64.pack(v))
        return self

    def raw(self, b: bytes, size: int) -> "Encoder":
        if len(b) != size:
            raise CodecError(f"fixed field must be {size} bytes, got {len(b)}")
        self._parts.append(b)
        return self

    def var_bytes(self, b: bytes) -> "Encoder":
        self._parts.append(_U32.pack(len(b)))
        self._parts.append(b)
        return self

    def count(self, n: int) -> "Encoder":
        self._parts.append(_U32.pack(n))
        return self

    def finish(self) -> bytes:
        return b"".join(self._parts)


class Decoder:
    """Consumes canonically encoded fields; raises CodecError on malformed input."""

    __slots__ = ("_buf", "_pos")

    def __init__(self, buf: bytes) -> None:
        self._buf = buf
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._buf):
            raise CodecError("truncated encoding")
        out = self._buf[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def raw(self, size: int) -> bytes:
        return self._take(size)

    def var_bytes(self, limit: int = 1 << 30) -> bytes:
        n = self.u32()
        if n > limit:
            raise CodecError(f"field length {n} exceeds limit {limit}")
        return self._take(n)

    def count(self, limit: int = 1 << 24) -> int:
        n = self.u32()
        if n > limit:
            raise CodecError(f"count {n} exceeds limit {limit}")
        return n

    def finish(self) -> None:
        if self._pos != len(self._buf):
            raise CodecError(f"{len(self._buf) - self._pos} trailing bytes")


# ---------------------------------------------------------------------------
# Committee
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuthorityId:
    """One committee member: a public key plus its stable ordinal index."""

    public_key: PublicKey
    ordinal: int
    primary_addr: str = ""
    worker_addrs: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.public_key) != PUBLIC_KEY_SIZE:
            raise ValueError("public key must be 32 bytes")


class Committee:
    """Ordered validator set; ordinals follow lexicographic public-key order.

    Fault and quorum thresholds are always derived from n, never configured
    independently: f = (n - 1) // 3, quorum = 2f + 1, validity = f + 1.
    """

    def __init__(self, authorities: Sequence[AuthorityId], epoch: int = 0) -> None:
        if len(authorities) < 4:
            raise ValueError("committee needs at least 4 authorities")
        keys = [a.public_key for a in authorities]
        if sorted(keys) != keys:
            raise ValueError("authorities must be sorted by public key")
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate public key in committee")
        for i, a in enumerate(authorities):
            if a.ordinal != i:
                raise ValueError("ordinal must equal position in sorted order")
        self.epoch = epoch
        self.authorities: Tuple[AuthorityId, ...] = tuple(authorities)
        self._by_key: Dict[PublicKey, AuthorityId] = {a.public_key: a for a in authorities}

    @property
    def size(self) -> int:
        return len(self.authorities)

    @property
    def faults(self) -> int:
        return (self.size - 1) // 3

    @property
    def quorum(self) -> int:
        return 2 * self.faults + 1

    @property
    def validity(self) -> int:
        return self.faults + 1

    def ordinal_of(self, key: PublicKey) -> int:
        return self._by_key[key].ordinal

    def authority(self, ordinal: int) -> AuthorityId:
        return self.authorities[ordinal]

    def is_member(self, key: PublicKey) -> bool:
        return key in self._by_key

    def keys(self) -> List[PublicKey]:
        return [a.public_key for a in self.authorities]

    @staticmethod
    def from_entries(entries: Sequence[Tuple[bytes, str, Sequence[str]]], epoch: int = 0) -> "Committee":
        """Builds a committee from unsorted (public_key, primary_addr, worker_addrs)."""
        ordered = sorted(entries, key=lambda e: e[0])
        auths = [
            AuthorityId(k, i, addr, tuple(waddrs))
            for i, (k, addr, waddrs) in enumerate(ordered)
        ]
        return Committee(auths, epoch)

    def to_json(self) -> str:
        doc = {
            "epoch": self.epoch,
            "authorities": [
                {
                    "public_key": a.public_key.hex(),
                    "primary_addr": a.primary_addr,
                    "worker_addrs": list(a.worker_addrs),
                }
                for a in self.authorities
            ],
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "Committee":
        doc = json.loads(text)
        entries = [
            (bytes.fromhex(a["public_key"]), a["primary_addr"], a["worker_addrs"])
            for a in doc["authorities"]
        ]
        return Committee.from_entries(entries, epoch=doc.get("epoch", 0))


# ---------------------------------------------------------------------------
# Transactions and batches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Batch:
    """Worker-level list of raw transactions, referenced by digest from headers."""

    transactions: Tuple[bytes, ...]
    worker_id: int

    def __post_init__(self) -> None:
        if not self.transactions:
            raise ValueError("batch must contain at least one transaction")
        for tx in self.transactions:
            if not tx:
                raise ValueError("empty transaction")
            if len(tx) > MAX_TRANSACTION_SIZE:
                raise ValueError("oversize transaction")

    def encode(self) -> bytes:
        enc = Encoder().count(len(self.transactions))
        for tx in self.transactions:
            enc.var_bytes(tx)
        enc.u32(self.worker_id)
        return enc.finish()

    @staticmethod
    def decode(buf: bytes) -> "Batch":
        dec = Decoder(buf)
        txs = tuple(dec.var_bytes(MAX_TRANSACTION_SIZE) for _ in range(dec.count()))
        wid = dec.u32()
        dec.finish()
        return Batch(txs, wid)

    def digest(self) -> Digest:
        return digest_of_bytes(self.encode())

    def size_bytes(self) -> int:
        return sum(len(tx) for tx in self.transactions)


# ---------------------------------------------------------------------------
# Headers, votes, certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockHeader:
    """A validator's per-round DAG vertex.

    `payload` lists (batch digest, worker id) pairs; `parents` lists the
    digests of certified headers of the previous round. The author signature
    covers the header digest, which is computed over everything except the
    signature itself.
    """

    author: PublicKey
    round: int
    payload: Tuple[Tuple[Digest, int], ...]
    parents: Tuple[Digest, ...]
    signature: bytes = b"\x00" * SIGNATURE_SIZE

    def _encode_unsigned(self) -> bytes:
        enc = Encoder().raw(self.author, PUBLIC_KEY_SIZE).u64(self.round)
        enc.count(len(self.payload))
        for d, wid in self.payload:
            enc.raw(d, DIGEST_SIZE).u32(wid)
        enc.count(len(self.parents))
        for d in self.parents:
            enc.raw(d, DIGEST_SIZE)
        return enc.finish()

    def encode(self) -> bytes:
        return self._encode_unsigned() + self.signature

    @staticmethod
    def decode(buf: bytes) -> "BlockHeader":
        dec = Decoder(buf)
        author = dec.raw(PUBLIC_KEY_SIZE)
        rnd = dec.u64()
        payload = tuple((dec.raw(DIGEST_SIZE), dec.u32()) for _ in range(dec.count()))
        parents = tuple(dec.raw(DIGEST_SIZE) for _ in range(dec.count()))
        sig = dec.raw(SIGNATURE_SIZE)
        dec.finish()
        return BlockHeader(author, rnd, payload, parents, sig)

    def digest(self) -> Digest:
        # Headers are immutable, so the digest is computed once per instance.
        cached = self.__dict__.get("_digest")
        if cached is None:
            cached = digest_of_bytes(self._encode_unsigned())
            object.__setattr__(self, "_digest", cached)
        return cached

    def with_signature(self, sig: bytes) -> "BlockHeader":
        return BlockHeader(self.author, self.round, self.payload, self.parents, sig)


@dataclass(frozen=True)
class Vote:
    """A signed acknowledgment over (header digest, round, header author)."""

    header_digest: Digest
    round: int
    origin: PublicKey  # header author
    voter: PublicKey
    signature: bytes

    @staticmethod
    def signing_digest(header_digest: Digest, round: int, origin: PublicKey) -> Digest:
        enc = (
            Encoder()
            .raw(header_digest, DIGEST_SIZE)
            .u64(round)
            .raw(origin, PUBLIC_KEY_SIZE)
            .finish()
        )
        return digest_of_bytes(enc)

    def encode(self) -> bytes:
        return (
            Encoder()
            .raw(self.header_digest, DIGEST_SIZE)
            .u64(self.round)
            .raw(self.origin, PUBLIC_KEY_SIZE)
            .raw(self.voter, PUBLIC_KEY_SIZE)
            .raw(self.signature, SIGNATURE_SIZE)
            .finish()
        )

    @staticmethod
    def decode(buf: bytes) -> "Vote":
        dec = Decoder(buf)
        v = Vote(
            dec.raw(DIGEST_SIZE),
            dec.u64(),
            dec.raw(PUBLIC_KEY_SIZE),
            dec.raw(PUBLIC_KEY_SIZE),
            dec.raw(SIGNATURE_SIZE),
        )
        dec.finish()
        return v


@dataclass(frozen=True)
class Certificate:
    """2f+1 distinct signed votes over a header digest; the unit consensus orders.

    A certificate is identified by the header digest it certifies: past the
    vote check there is at most one certified header per (round, author).
    """

    header_digest: Digest
    round: int
    author: PublicKey
    votes: Tuple[Tuple[PublicKey, bytes], ...]

    def encode(self) -> bytes:
        enc = (
            Encoder()
            .raw(self.header_digest, DIGEST_SIZE)
            .u64(self.round)
            .raw(self.author, PUBLIC_KEY_SIZE)
            .count(len(self.votes))
        )
        for voter, sig in self.votes:
            enc.raw(voter, PUBLIC_KEY_SIZE).raw(sig, SIGNATURE_SIZE)
        return enc.finish()

    @staticmethod
    def decode(buf: bytes) -> "Certificate":
        dec = Decoder(buf)
        hd = dec.raw(DIGEST_SIZE)
        rnd = dec.u64()
        author = dec.raw(PUBLIC_KEY_SIZE)
        votes = tuple(
            (dec.raw(PUBLIC_KEY_SIZE), dec.raw(SIGNATURE_SIZE)) for _ in range(dec.count())
        )
        dec.finish()
        return Certificate(hd, rnd, author, votes)

    def signing_digest(self) -> Digest:
        return Vote.signing_digest(self.header_digest, self.round, self.author)


# ---------------------------------------------------------------------------
# Waves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaveNumber:
    """A 3-round consensus wave; consecutive waves overlap by one round."""

    value: int

    def __post_init__(self) -> None:
        if self.value < 1:
            raise ValueError("waves start at 1")

    @property
    def proposal_round(self) -> int:
        return 2 * self.value - 1

    @property
    def vote_round(self) -> int:
        return 2 * self.value

    @property
    def coin_round(self) -> int:
        return 2 * self.value + 1


def wave_rounds(w: int) -> Tuple[int, int, int]:
    """(proposal, vote, coin) rounds of wave w."""
    wn = WaveNumber(w)
    return wn.proposal_round, wn.vote_round, wn.coin_round


def wave_of_coin_round(rnd: int) -> Optional[int]:
    """The wave whose coin round is `rnd`, or None if `rnd` is not one."""
    if rnd >= 3 and rnd % 2 == 1:
        return (rnd - 1) // 2
    return None


# ---------------------------------------------------------------------------
# Structural validation helpers
# ---------------------------------------------------------------------------


def check_header_shape(header: BlockHeader, committee: Committee) -> Optional[str]:
    """Structural invariants that need no store access; returns a reason or None."""
    if not committee.is_member(header.author):
        return "unknown author"
    if header.round == 0:
        if header.parents:
            return "genesis header must have no parents"
        return None
    if len(header.parents) < committee.quorum:
        return f"need at least {committee.quorum} parents, got {len(header.parents)}"
    if len(set(header.parents)) != len(header.parents):
        return "duplicate parent digest"
    return None


def check_certificate_shape(cert: Certificate, committee: Committee) -> Optional[str]:
    """Vote-count and distinctness checks; signature checks live in crypto."""
    if not committee.is_member(cert.author):
        return "unknown author"
    voters = [v for v, _ in cert.votes]
    if len(set(voters)) != len(voters):
        return "duplicate voter"
    if any(not committee.is_member(v) for v in voters):
        return "non-member voter"
    if len(voters) < committee.quorum:
        return f"need {committee.quorum} votes, got {len(voters)}"
    return None


def genesis_header(author: PublicKey) -> BlockHeader:
    """The unsigned round-0 header template for an authority."""
    return BlockHeader(author=author, round=0, payload=(), parents=())
