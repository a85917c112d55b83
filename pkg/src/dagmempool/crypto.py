"""Hashing, Ed25519 signing/verification, and the pluggable shared coin.

Verification is memoized: it is a pure function of (public key, digest,
signature), and in simulation the same vote is re-verified by every
validator, so the cache removes most of the crypto cost from hot loops.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .types import Committee, Digest, PublicKey, PUBLIC_KEY_SIZE, SIGNATURE_SIZE

_RAW = serialization.Encoding.Raw
_RAW_PUB = serialization.PublicFormat.Raw
_RAW_PRIV = serialization.PrivateFormat.Raw
_NOENC = serialization.NoEncryption()


class KeyPair:
    """An Ed25519 keypair; the public key doubles as the authority identity."""

    __slots__ = ("secret", "public", "_sk")

    def __init__(self, secret: bytes) -> None:
        if len(secret) != 32:
            raise ValueError("secret key must be 32 bytes")
        self.secret = secret
        self._sk = Ed25519PrivateKey.from_private_bytes(secret)
        self.public: PublicKey = self._sk.public_key().public_bytes(_RAW, _RAW_PUB)

    @staticmethod
    def generate() -> "KeyPair":
        sk = Ed25519PrivateKey.generate()
        return KeyPair(sk.private_bytes(_RAW, _RAW_PRIV, _NOENC))

    @staticmethod
    def from_seed(seed: bytes) -> "KeyPair":
        """Deterministic keypair for tests and reproducible committees."""
        return KeyPair(hashlib.sha256(b"keypair:" + seed).digest())

    def sign(self, digest: Digest) -> bytes:
        if len(digest) != 32:
            raise ValueError("signing input must be a 32-byte digest")
        return self._sk.sign(digest)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.secret.hex() + "\n")

    @staticmethod
    def load(path: str) -> "KeyPair":
        with open(path, "r", encoding="utf-8") as fh:
            return KeyPair(bytes.fromhex(fh.read().strip()))


@lru_cache(maxsize=1 << 16)
def _verify_cached(public: PublicKey, digest: Digest, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, digest)
        return True
    except (InvalidSignature, ValueError):
        return False


def verify(public: PublicKey, digest: Digest, signature: bytes) -> bool:
    """True iff `signature` is a valid signature over `digest` by `public`.

    Malformed inputs yield False, never an exception.
    """
    if len(public) != PUBLIC_KEY_SIZE or len(digest) != 32:
        return False
    if len(signature) != SIGNATURE_SIZE:
        return False
    return _verify_cached(public, digest, signature)


class CoinSource:
    """Leader-election oracle: a pure function of (coin state, wave, committee).

    The output must never depend on any validator's local DAG state. Real
    deployments would back this with a threshold-signature beacon; the
    bundled implementation derives leaders from a shared seed, which keeps
    every validator's election identical and uniformly distributed.
    """

    def leader(self, wave: int, committee: Committee) -> int:
        raise NotImplementedError


class SeededCoin(CoinSource):
    """Test coin: leader ordinal = SHA-256(seed || wave) mod n."""

    __slots__ = ("seed",)

    def __init__(self, seed: bytes) -> None:
        self.seed = seed

    def leader(self, wave: int, committee: Committee) -> int:
        if wave < 1:
            raise ValueError("waves start at 1")
        h = hashlib.sha256(self.seed + wave.to_bytes(8, "little")).digest()
        return int.from_bytes(h, "big") % committee.size
