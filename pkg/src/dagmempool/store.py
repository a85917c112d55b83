"""Key-value block store: headers, batches, certificates, and causal reads.

The store is the availability half of the mempool: certified content is
written here and served to peers on pull. `read_causal` walks parent edges
down to the garbage-collection watermark and returns headers in the
committee-wide deterministic order (round ascending, author ordinal
ascending) that the consensus layer linearizes with.

Backends are pluggable: a dict-backed store for simulation, an append-log
store that survives crash-restart for cluster runs.
"""

from __future__ import annotations

import os
import struct
import threading
from collections import OrderedDict
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .types import Batch, BlockHeader, Certificate, Committee, Digest


class IntegrityError(ValueError):
    """Write rejected because the key does not match the value's digest."""


class MissingAncestors(LookupError):
    """Causal read failed; `missing` names the digests the synchronizer must pull."""

    def __init__(self, missing: Iterable[Digest]) -> None:
        self.missing: Tuple[Digest, ...] = tuple(missing)
        super().__init__(f"{len(self.missing)} ancestors missing")


class StoreBackend:
    """Minimal persistent-map contract: column family -> key -> value bytes."""

    def get(self, cf: str, key: bytes) -> Optional[bytes]:
        raise NotImplementedError

    def put(self, cf: str, key: bytes, value: bytes) -> None:
        raise NotImplementedError

    def keys(self, cf: str) -> Iterable[bytes]:
        raise NotImplementedError

    def close(self) -> None:
        pass


class MemoryBackend(StoreBackend):
    def __init__(self) -> None:
        self._cfs: Dict[str, Dict[bytes, bytes]] = {}

    def get(self, cf: str, key: bytes) -> Optional[bytes]:
        return self._cfs.get(cf, {}).get(key)

    def put(self, cf: str, key: bytes, value: bytes) -> None:
        self._cfs.setdefault(cf, {})[key] = value

    def keys(self, cf: str) -> Iterable[bytes]:
        return list(self._cfs.get(cf, {}).keys())


class DiskBackend(StoreBackend):
    """Append-only log per column family; an offset index is rebuilt on open.

    Record layout: u32 key length, key, u32 value length, value. A torn tail
    record (crash mid-write) is truncated away on open. Values stay on disk
    and are read back by offset, so memory use is per-key, not per-byte.
    With `durable` the log is flushed and fsynced before a write returns.
    """

    _LEN = struct.Struct("<I")

    def __init__(self, directory: str, durable: bool = True) -> None:
        os.makedirs(directory, exist_ok=True)
        self._dir = directory
        self._durable = durable
        self._lock = threading.Lock()
        self._append: Dict[str, object] = {}
        self._read: Dict[str, object] = {}
        self._index: Dict[str, Dict[bytes, Tuple[int, int]]] = {}  # key -> (offset, length)

    def _path(self, cf: str) -> str:
        return os.path.join(self._dir, f"{cf}.log")

    def _open_cf(self, cf: str) -> None:
        if cf in self._append:
            return
        path = self._path(cf)
        index: Dict[bytes, Tuple[int, int]] = {}
        valid_end = 0
        if os.path.exists(path):
            with open(path, "rb") as fh:
                raw = fh.read()
            pos = 0
            while pos + 4 <= len(raw):
                (klen,) = self._LEN.unpack_from(raw, pos)
                if pos + 4 + klen + 4 > len(raw):
                    break
                key = raw[pos + 4 : pos + 4 + klen]
                (vlen,) = self._LEN.unpack_from(raw, pos + 4 + klen)
                end = pos + 4 + klen + 4 + vlen
                if end > len(raw):
                    break
                index[key] = (pos + 4 + klen + 4, vlen)
                pos = end
            valid_end = pos
            if valid_end != len(raw):
                with open(path, "r+b") as fh:
                    fh.truncate(valid_end)
        self._index[cf] = index
        self._append[cf] = open(path, "ab")
        self._append[cf].seek(0, os.SEEK_END)
        self._read[cf] = open(path, "rb")

    def get(self, cf: str, key: bytes) -> Optional[bytes]:
        with self._lock:
            self._open_cf(cf)
            loc = self._index[cf].get(key)
            if loc is None:
                return None
            fh = self._read[cf]
            fh.seek(loc[0])
            return fh.read(loc[1])

    def put(self, cf: str, key: bytes, value: bytes) -> None:
        with self._lock:
            self._open_cf(cf)
            if key in self._index[cf]:
                return  # content-addressed: a rewrite is always identical
            fh = self._append[cf]
            offset = fh.tell() + 4 + len(key) + 4
            fh.write(self._LEN.pack(len(key)) + key + self._LEN.pack(len(value)) + value)
            if self._durable:
                fh.flush()
                os.fsync(fh.fileno())
            else:
                fh.flush()
            self._index[cf][key] = (offset, len(value))

    def keys(self, cf: str) -> Iterable[bytes]:
        with self._lock:
            self._open_cf(cf)
            return list(self._index[cf].keys())

    def close(self) -> None:
        with self._lock:
            for fh in list(self._append.values()) + list(self._read.values()):
                fh.close()
            self._append.clear()
            self._read.clear()


class BlockStore:
    """A validator's local view of the DAG, indexed every way the protocol reads it."""

    CF_HEADERS = "headers"
    CF_BATCHES = "batches"
    CF_CERTS = "certificates"
    CF_INDEX = "index"

    def __init__(self, committee: Committee, backend: Optional[StoreBackend] = None) -> None:
        self.committee = committee
        self._backend = backend or MemoryBackend()
        # Decoded caches: headers and certificates are small and hot, batches
        # are read through the backend so bulk data stays on disk.
        self._headers: Dict[Digest, BlockHeader] = {}
        self._batch_keys: Set[Digest] = set()
        self._batch_cache: "OrderedDict[Digest, Batch]" = OrderedDict()
        self._certs: Dict[Digest, Certificate] = {}  # keyed by certified header digest
        self._cert_by_slot: Dict[Tuple[int, int], Digest] = {}  # (round, ordinal) -> header digest
        self.watermark: int = -1  # last GC round; -1 before GC first engages
        self._recover()

    _BATCH_CACHE_SIZE = 128

    def _recover(self) -> None:
        for key in self._backend.keys(self.CF_HEADERS):
            raw = self._backend.get(self.CF_HEADERS, key)
            if raw is not None:
                self._headers[key] = BlockHeader.decode(raw)
        self._batch_keys = set(self._backend.keys(self.CF_BATCHES))
        for key in self._backend.keys(self.CF_CERTS):
            raw = self._backend.get(self.CF_CERTS, key)
            if raw is not None:
                cert = Certificate.decode(raw)
                self._certs[key] = cert
                ordinal = self.committee.ordinal_of(cert.author)
                self._cert_by_slot[(cert.round, ordinal)] = key

    # -- writes ------------------------------------------------------------

    def write_header(self, header: BlockHeader, expected: Optional[Digest] = None) -> Digest:
        d = header.digest()
        if expected is not None and expected != d:
            raise IntegrityError("header digest mismatch")
        if d not in self._headers:
            self._backend.put(self.CF_HEADERS, d, header.encode())
            self._headers[d] = header
        return d

    def write_batch(self, batch: Batch, expected: Optional[Digest] = None) -> Digest:
        d = batch.digest()
        if expected is not None and expected != d:
            raise IntegrityError("batch digest mismatch")
        if d not in self._batch_keys:
            self._backend.put(self.CF_BATCHES, d, batch.encode())
            self._batch_keys.add(d)
            self._cache_batch(d, batch)
        return d

    def _cache_batch(self, d: Digest, batch: Batch) -> None:
        self._batch_cache[d] = batch
        while len(self._batch_cache) > self._BATCH_CACHE_SIZE:
            self._batch_cache.popitem(last=False)

    def write_certificate(self, cert: Certificate) -> Digest:
        """Stores a certificate keyed by the header digest it certifies.

        Returns the header digest. A conflicting certificate for the same
        (round, author) slot is impossible with fewer than f+1 faulty
        voters; if observed it is surfaced as an IntegrityError so the
        harness can flag the run.
        """
        d = cert.header_digest
        ordinal = self.committee.ordinal_of(cert.author)
        slot = (cert.round, ordinal)
        existing = self._cert_by_slot.get(slot)
        if existing is not None and existing != d:
            raise IntegrityError(
                f"conflicting certificates for round {cert.round} author {ordinal}"
            )
        if d not in self._certs:
            self._backend.put(self.CF_CERTS, d, cert.encode())
            self._backend.put(
                self.CF_INDEX,
                struct.pack("<QI", cert.round, ordinal),
                d,
            )
            self._certs[d] = cert
            self._cert_by_slot[slot] = d
        return d

    # -- reads -------------------------------------------------------------

    def header(self, d: Digest) -> Optional[BlockHeader]:
        return self._headers.get(d)

    def batch(self, d: Digest) -> Optional[Batch]:
        cached = self._batch_cache.get(d)
        if cached is not None:
            return cached
        if d not in self._batch_keys:
            return None
        raw = self._backend.get(self.CF_BATCHES, d)
        if raw is None:
            return None
        batch = Batch.decode(raw)
        self._cache_batch(d, batch)
        return batch

    def has_batch(self, d: Digest) -> bool:
        return d in self._batch_keys

    def certificate(self, d: Digest) -> Optional[Certificate]:
        return self._certs.get(d)

    def certificate_at(self, round: int, ordinal: int) -> Optional[Certificate]:
        d = self._cert_by_slot.get((round, ordinal))
        return self._certs.get(d) if d is not None else None

    def certified_rounds(self) -> Set[int]:
        return {r for (r, _o) in self._cert_by_slot}

    def certificates_in_round(self, round: int) -> List[Certificate]:
        out = []
        for o in range(self.committee.size):
            c = self.certificate_at(round, o)
            if c is not None:
                out.append(c)
        return out

    def all_headers(self) -> Dict[Digest, BlockHeader]:
        return dict(self._headers)

    def all_batches(self) -> Dict[Digest, Batch]:
        out: Dict[Digest, Batch] = {}
        for d in self._batch_keys:
            batch = self.batch(d)
            if batch is not None:
                out[d] = batch
        return out

    def all_certificates(self) -> Dict[Digest, Certificate]:
        return dict(self._certs)

    def read(self, d: Digest):
        """Block lookup by digest: header or batch, None when absent."""
        h = self._headers.get(d)
        if h is not None:
            return h
        return self.batch(d)

    def read_causal(self, d: Digest) -> List[BlockHeader]:
        """Headers reachable from d via parent edges, rounds above the watermark.

        The queried header itself is always included. The result is ordered
        by (round, author ordinal) so that every honest validator linearizes
        identical histories. Raises MissingAncestors when the closure is not
        fully local; the caller escalates to the synchronizer.
        """
        start = self._headers.get(d)
        if start is None:
            raise MissingAncestors([d])
        missing: Set[Digest] = set()
        seen: Set[Digest] = {d}
        out: List[BlockHeader] = [start]
        frontier: List[BlockHeader] = [start]
        while frontier:
            nxt: List[BlockHeader] = []
            for h in frontier:
                if h.round - 1 <= self.watermark:
                    continue  # parents are at or below the GC cut
                for pd in h.parents:
                    if pd in seen:
                        continue
                    seen.add(pd)
                    ph = self._headers.get(pd)
                    if ph is None:
                        missing.add(pd)
                    else:
                        out.append(ph)
                        nxt.append(ph)
            frontier = nxt
        if missing:
            raise MissingAncestors(sorted(missing))
        out.sort(key=lambda h: (h.round, self.committee.ordinal_of(h.author)))
        return out

    def close(self) -> None:
        self._backend.close()
