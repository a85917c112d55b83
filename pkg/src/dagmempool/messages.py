"""Wire messages for the primary, worker, and client planes.

Each message is a tagged canonical encoding. The simulator passes the
objects directly (sizes come from the same encoding), the socket transport
frames `tag byte + body` with a 4-byte little-endian length prefix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .types import (
    Batch,
    BlockHeader,
    Certificate,
    CodecError,
    Decoder,
    DIGEST_SIZE,
    Digest,
    Encoder,
    PUBLIC_KEY_SIZE,
    PublicKey,
    SIGNATURE_SIZE,
    Vote,
)

# Primary-to-primary
TAG_HEADER = 1
TAG_VOTE = 2
TAG_CERTIFICATE = 3
TAG_SYNC_REQUEST = 4
TAG_SYNC_REPLY = 5
# Worker-to-worker
TAG_BATCH = 16
TAG_BATCH_ACK = 17
TAG_BATCH_REQUEST = 18
TAG_BATCH_REPLY = 19
# Client-to-worker
TAG_TX_SUBMIT = 32
# Validator-internal control channel (worker <-> own primary)
TAG_BATCH_REPORT = 48
TAG_BATCH_STORED = 49
TAG_BATCH_PULL = 50
TAG_PRIMARY_STATUS = 51


class Message:
    """Base wire message; subclasses define `tag` and body codecs."""

    tag: int = 0

    def encode_body(self) -> bytes:
        raise NotImplementedError

    def encode(self) -> bytes:
        cached = self.__dict__.get("_wire")
        if cached is None:
            cached = bytes((self.tag,)) + self.encode_body()
            self.__dict__["_wire"] = cached
        return cached

    @property
    def wire_size(self) -> int:
        return len(self.encode())


@dataclass(eq=False)
class HeaderMsg(Message):
    tag = TAG_HEADER
    header: BlockHeader

    def encode_body(self) -> bytes:
        return self.header.encode()


@dataclass(eq=False)
class VoteMsg(Message):
    tag = TAG_VOTE
    vote: Vote

    def encode_body(self) -> bytes:
        return self.vote.encode()


@dataclass(eq=False)
class CertificateMsg(Message):
    tag = TAG_CERTIFICATE
    certificate: Certificate

    def encode_body(self) -> bytes:
        return self.certificate.encode()


@dataclass(eq=False)
class SyncRequest(Message):
    tag = TAG_SYNC_REQUEST
    digests: Tuple[Digest, ...]
    requester: PublicKey

    def encode_body(self) -> bytes:
        enc = Encoder().count(len(self.digests))
        for d in self.digests:
            enc.raw(d, DIGEST_SIZE)
        enc.raw(self.requester, PUBLIC_KEY_SIZE)
        return enc.finish()


@dataclass(eq=False)
class SyncReply(Message):
    tag = TAG_SYNC_REPLY
    headers: Tuple[BlockHeader, ...]
    certificates: Tuple[Certificate, ...]

    def encode_body(self) -> bytes:
        enc = Encoder().count(len(self.headers))
        for h in self.headers:
            enc.var_bytes(h.encode())
        enc.count(len(self.certificates))
        for c in self.certificates:
            enc.var_bytes(c.encode())
        return enc.finish()


@dataclass(eq=False)
class BatchMsg(Message):
    tag = TAG_BATCH
    batch: Batch

    def encode_body(self) -> bytes:
        return self.batch.encode()


@dataclass(eq=False)
class BatchAck(Message):
    tag = TAG_BATCH_ACK
    digest: Digest
    voter: PublicKey
    signature: bytes

    def encode_body(self) -> bytes:
        return (
            Encoder()
            .raw(self.digest, DIGEST_SIZE)
            .raw(self.voter, PUBLIC_KEY_SIZE)
            .raw(self.signature, SIGNATURE_SIZE)
            .finish()
        )


@dataclass(eq=False)
class BatchRequest(Message):
    tag = TAG_BATCH_REQUEST
    digest: Digest
    requester: PublicKey

    def encode_body(self) -> bytes:
        return Encoder().raw(self.digest, DIGEST_SIZE).raw(self.requester, PUBLIC_KEY_SIZE).finish()


@dataclass(eq=False)
class BatchReply(Message):
    tag = TAG_BATCH_REPLY
    digest: Digest
    batch: Optional[Batch]

    def encode_body(self) -> bytes:
        enc = Encoder().raw(self.digest, DIGEST_SIZE)
        if self.batch is None:
            enc.u8(0)
        else:
            enc.u8(1)
            enc.var_bytes(self.batch.encode())
        return enc.finish()


@dataclass(eq=False)
class TxSubmit(Message):
    tag = TAG_TX_SUBMIT
    transaction: bytes

    def encode_body(self) -> bytes:
        return Encoder().var_bytes(self.transaction).finish()


@dataclass(eq=False)
class BatchDigestReport(Message):
    """Own worker sealed a batch and a quorum of workers acknowledged it."""

    tag = TAG_BATCH_REPORT
    digest: Digest
    worker_id: int
    size_bytes: int

    def encode_body(self) -> bytes:
        return Encoder().raw(self.digest, DIGEST_SIZE).u32(self.worker_id).u64(self.size_bytes).finish()


@dataclass(eq=False)
class BatchStored(Message):
    """Own worker stored a batch received from a peer or fetched by pull."""

    tag = TAG_BATCH_STORED
    digest: Digest
    worker_id: int

    def encode_body(self) -> bytes:
        return Encoder().raw(self.digest, DIGEST_SIZE).u32(self.worker_id).finish()


@dataclass(eq=False)
class BatchPullCommand(Message):
    """Primary asks its worker to fetch a missing batch for header validation."""

    tag = TAG_BATCH_PULL
    digest: Digest
    worker_id: int
    author: PublicKey
    fallbacks: Tuple[PublicKey, ...]  # certificate signers to rotate through
    trigger_round: int

    def encode_body(self) -> bytes:
        enc = Encoder().raw(self.digest, DIGEST_SIZE).u32(self.worker_id).raw(self.author, PUBLIC_KEY_SIZE)
        enc.count(len(self.fallbacks))
        for k in self.fallbacks:
            enc.raw(k, PUBLIC_KEY_SIZE)
        enc.u64(self.trigger_round)
        return enc.finish()


@dataclass(eq=False)
class PrimaryStatus(Message):
    """Round watermark plus payload lifecycle updates for the worker plane."""

    tag = TAG_PRIMARY_STATUS
    round: int
    carried: Tuple[Digest, ...]  # digests just included in a header at `round`
    certified: Tuple[Digest, ...]  # digests whose carrying header got certified

    def encode_body(self) -> bytes:
        enc = Encoder().u64(self.round).count(len(self.carried))
        for d in self.carried:
            enc.raw(d, DIGEST_SIZE)
        enc.count(len(self.certified))
        for d in self.certified:
            enc.raw(d, DIGEST_SIZE)
        return enc.finish()


def decode_message(frame: bytes) -> Message:
    """Parses a tagged frame back into a message; raises CodecError when malformed."""
    if not frame:
        raise CodecError("empty frame")
    tag, body = frame[0], frame[1:]
    if tag == TAG_HEADER:
        return HeaderMsg(BlockHeader.decode(body))
    if tag == TAG_VOTE:
        return VoteMsg(Vote.decode(body))
    if tag == TAG_CERTIFICATE:
        return CertificateMsg(Certificate.decode(body))
    if tag == TAG_SYNC_REQUEST:
        dec = Decoder(body)
        digests = tuple(dec.raw(DIGEST_SIZE) for _ in range(dec.count()))
        requester = dec.raw(PUBLIC_KEY_SIZE)
        dec.finish()
        return SyncRequest(digests, requester)
    if tag == TAG_SYNC_REPLY:
        dec = Decoder(body)
        headers = tuple(BlockHeader.decode(dec.var_bytes()) for _ in range(dec.count()))
        certs = tuple(Certificate.decode(dec.var_bytes()) for _ in range(dec.count()))
        dec.finish()
        return SyncReply(headers, certs)
    if tag == TAG_BATCH:
        return BatchMsg(Batch.decode(body))
    if tag == TAG_BATCH_ACK:
        dec = Decoder(body)
        msg = BatchAck(dec.raw(DIGEST_SIZE), dec.raw(PUBLIC_KEY_SIZE), dec.raw(SIGNATURE_SIZE))
        dec.finish()
        return msg
    if tag == TAG_BATCH_REQUEST:
        dec = Decoder(body)
        msg = BatchRequest(dec.raw(DIGEST_SIZE), dec.raw(PUBLIC_KEY_SIZE))
        dec.finish()
        return msg
    if tag == TAG_BATCH_REPLY:
        dec = Decoder(body)
        d = dec.raw(DIGEST_SIZE)
        batch = Batch.decode(dec.var_bytes()) if dec.u8() else None
        dec.finish()
        return BatchReply(d, batch)
    if tag == TAG_TX_SUBMIT:
        dec = Decoder(body)
        tx = dec.var_bytes()
        dec.finish()
        return TxSubmit(tx)
    if tag == TAG_BATCH_REPORT:
        dec = Decoder(body)
        msg = BatchDigestReport(dec.raw(DIGEST_SIZE), dec.u32(), dec.u64())
        dec.finish()
        return msg
    if tag == TAG_BATCH_STORED:
        dec = Decoder(body)
        msg = BatchStored(dec.raw(DIGEST_SIZE), dec.u32())
        dec.finish()
        return msg
    if tag == TAG_BATCH_PULL:
        dec = Decoder(body)
        d = dec.raw(DIGEST_SIZE)
        wid = dec.u32()
        author = dec.raw(PUBLIC_KEY_SIZE)
        fallbacks = tuple(dec.raw(PUBLIC_KEY_SIZE) for _ in range(dec.count()))
        trigger = dec.u64()
        dec.finish()
        return BatchPullCommand(d, wid, author, fallbacks, trigger)
    if tag == TAG_PRIMARY_STATUS:
        dec = Decoder(body)
        rnd = dec.u64()
        carried = tuple(dec.raw(DIGEST_SIZE) for _ in range(dec.count()))
        certified = tuple(dec.raw(DIGEST_SIZE) for _ in range(dec.count()))
        dec.finish()
        return PrimaryStatus(rnd, carried, certified)
    raise CodecError(f"unknown message tag {tag}")


MEMPOOL_TAGS = frozenset(
    {
        TAG_HEADER,
        TAG_VOTE,
        TAG_CERTIFICATE,
        TAG_SYNC_REQUEST,
        TAG_SYNC_REPLY,
        TAG_BATCH,
        TAG_BATCH_ACK,
        TAG_BATCH_REQUEST,
        TAG_BATCH_REPLY,
    }
)
