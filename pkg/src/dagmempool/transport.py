"""Socket transport for local-cluster runs.

One persistent stream per peer with automatic reconnection (exponential
backoff with jitter). Outbound messages carry a cancellation round: once
the sender's protocol round passes it, undelivered copies are evicted, so
memory stays bounded no matter how long a peer is unreachable. Frames are
4-byte little-endian length prefixes followed by a tagged canonical
encoding; connections open with a HELLO frame naming the sender.
"""

from __future__ import annotations

import asyncio
import logging
import random
import struct
from collections import deque
from typing import Callable, Deque, Optional, Tuple

from . import messages as msg
from .types import CodecError, PUBLIC_KEY_SIZE, PublicKey

logger = logging.getLogger(__name__)

_LEN = struct.Struct("<I")
TAG_HELLO = 64
MAX_FRAME = 32 * 1024 * 1024

RECONNECT_BASE = 0.05
RECONNECT_CAP = 2.0
DEFAULT_QUEUE_MESSAGES = 10_000
DEFAULT_QUEUE_BYTES = 64 * 1024 * 1024


def frame(payload: bytes) -> bytes:
    return _LEN.pack(len(payload)) + payload


async def read_frame(reader: asyncio.StreamReader) -> Optional[bytes]:
    try:
        head = await reader.readexactly(4)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None
    (length,) = _LEN.unpack(head)
    if length > MAX_FRAME:
        return None
    try:
        return await reader.readexactly(length)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None


class PeerChannel:
    """Reliable-ish outbound stream to one peer with a bounded pending queue."""

    def __init__(
        self,
        address: str,
        identity: PublicKey,
        max_messages: int = DEFAULT_QUEUE_MESSAGES,
        max_bytes: int = DEFAULT_QUEUE_BYTES,
    ) -> None:
        self.address = address
        self.identity = identity
        self.max_messages = max_messages
        self.max_bytes = max_bytes
        self._queue: Deque[Tuple[Optional[int], bytes]] = deque()
        self._queued_bytes = 0
        self._current_round = 0
        self._wakeup = asyncio.Event()
        self._task: Optional[asyncio.Task] = None
        self._closed = False
        self.sent_messages = 0

    def start(self) -> None:
        if self._task is None:
            self._task = asyncio.get_event_loop().create_task(self._run())

    def send(self, message: msg.Message, cancel_round: Optional[int] = None) -> bool:
        """Queues a message; False means the queue was full of un-evictable data."""
        payload = message.encode()
        if not self._make_room(len(payload)):
            return False
        self._queue.append((cancel_round, payload))
        self._queued_bytes += len(payload)
        self._wakeup.set()
        return True

    def evict_below(self, current_round: int) -> None:
        """Drops pending messages whose cancellation round has passed."""
        self._current_round = max(self._current_round, current_round)
        if not self._queue:
            return
        kept: Deque[Tuple[Optional[int], bytes]] = deque()
        for cancel, payload in self._queue:
            if cancel is not None and cancel < self._current_round:
                self._queued_bytes -= len(payload)
            else:
                kept.append((cancel, payload))
        self._queue = kept

    def _make_room(self, incoming: int) -> bool:
        while len(self._queue) >= self.max_messages or self._queued_bytes + incoming > self.max_bytes:
            victim = None
            for i, (cancel, payload) in enumerate(self._queue):
                if cancel is not None:
                    victim = i
                    break
            if victim is None:
                return False  # nothing evictable: reject, caller treats as loss
            _, payload = self._queue[victim]
            del self._queue[victim]
            self._queued_bytes -= len(payload)
        return True

    @property
    def pending_messages(self) -> int:
        return len(self._queue)

    @property
    def pending_bytes(self) -> int:
        return self._queued_bytes

    async def _run(self) -> None:
        backoff = RECONNECT_BASE
        while not self._closed:
            try:
                host, port = self.address.rsplit(":", 1)
                reader, writer = await asyncio.open_connection(host, int(port))
            except OSError:
                await asyncio.sleep(backoff * (1.0 + random.random() * 0.3))
                backoff = min(backoff * 2, RECONNECT_CAP)
                continue
            backoff = RECONNECT_BASE
            try:
                writer.write(frame(bytes((TAG_HELLO,)) + self.identity))
                await writer.drain()
                while not self._closed:
                    while not self._queue:
                        self._wakeup.clear()
                        await self._wakeup.wait()
                    cancel, payload = self._queue[0]
                    if cancel is not None and cancel < self._current_round:
                        self._queue.popleft()
                        self._queued_bytes -= len(payload)
                        continue
                    writer.write(frame(payload))
                    await writer.drain()
                    self._queue.popleft()
                    self._queued_bytes -= len(payload)
                    self.sent_messages += 1
            except (ConnectionError, OSError):
                pass  # messages stay queued; reconnect and retry
            finally:
                writer.close()

    async def close(self) -> None:
        self._closed = True
        self._wakeup.set()
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except (asyncio.CancelledError, Exception):
                pass


InboundHandler = Callable[[PublicKey, msg.Message], None]


async def serve(host: str, port: int, handler: InboundHandler) -> asyncio.AbstractServer:
    """Listens for peers; each connection is identified by its HELLO frame.

    Per-connection frame order is preserved; decoding failures drop the
    frame, never the connection state machine.
    """

    async def on_connect(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer: Optional[PublicKey] = None
        first = await read_frame(reader)
        if first is None or len(first) != 1 + PUBLIC_KEY_SIZE or first[0] != TAG_HELLO:
            writer.close()
            return
        peer = first[1:]
        while True:
            payload = await read_frame(reader)
            if payload is None:
                break
            try:
                message = msg.decode_message(payload)
            except CodecError:
                continue
            handler(peer, message)
        writer.close()

    return await asyncio.start_server(on_connect, host, port)
