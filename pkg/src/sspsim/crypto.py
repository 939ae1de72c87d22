"""Cryptographic functions used by the pairing state machine.

Key agreement runs on P-256.  The commitment (f1), the six-digit check value
(g), link-key derivation (f2) and the stage-2 check (f3) are HMAC/SHA-256
constructions local to this simulator; they share the shape of the Bluetooth
functions but not their bit layouts.

All integers are big-endian in hash inputs and device addresses are encoded
as 6 bytes.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass

from . import p256
from .p256 import Point

NONCE_SIZE = 16
ZERO_16 = bytes(16)

LINK_KEY_TAG = b"btlk"
CHECK_TAG = b"btck"


class InvalidPoint(ValueError):
    """A public key is not a valid non-identity point on P-256."""


@dataclass(frozen=True)
class KeyPair:
    private_scalar: int
    public_point: Point

    def __repr__(self) -> str:
        return f"KeyPair(public_point=({self.public_point.x:#x}, {self.public_point.y:#x}))"


def point_to_bytes(pt: Point) -> bytes:
    return pt.x.to_bytes(32, "big") + pt.y.to_bytes(32, "big")


def point_from_bytes(data: bytes) -> Point:
    if len(data) != 64:
        raise InvalidPoint(f"expected 64 bytes, got {len(data)}")
    return Point(int.from_bytes(data[:32], "big"), int.from_bytes(data[32:], "big"))


def x_bytes(pt: Point) -> bytes:
    return pt.x.to_bytes(32, "big")


def address_bytes(address: int) -> bytes:
    return address.to_bytes(6, "big")


def random_bytes(rng: random.Random, size: int = NONCE_SIZE) -> bytes:
    return rng.getrandbits(8 * size).to_bytes(size, "big")


def generate_keypair(rng: random.Random) -> KeyPair:
    """Draw a private scalar in [1, n-1] by rejection sampling."""
    while True:
        k = rng.getrandbits(256)
        if 1 <= k < p256.N:
            return KeyPair(k, p256.mult_base(k))


def validate_public_key(pt: Point) -> None:
    if pt is None or not p256.is_on_curve(pt):
        raise InvalidPoint("public key is not on P-256")


def derive_dh_key(private_scalar: int, peer_public: Point) -> bytes:
    """32-byte x-coordinate of ``private_scalar * peer_public``."""
    validate_public_key(peer_public)
    shared = p256.mult(private_scalar, peer_public)
    if shared is None:
        raise InvalidPoint("shared point is the identity")
    return shared.x.to_bytes(32, "big")


def _hmac128(key: bytes, message: bytes) -> bytes:
    return hmac.new(key, message, hashlib.sha256).digest()[:16]


def f1_commit(pk_a: Point, pk_b: Point, n: bytes, r: bytes) -> bytes:
    """Commitment to ``pk_a`` (and the session peer ``pk_b``) under nonce ``n``."""
    return _hmac128(n, x_bytes(pk_a) + x_bytes(pk_b) + r)


def g_verify_value(pk_a: Point, pk_b: Point, n_a: bytes, n_b: bytes) -> int:
    """The six-digit number shown to the user in Numeric Comparison."""
    digest = hashlib.sha256(x_bytes(pk_a) + x_bytes(pk_b) + n_a + n_b).digest()
    return int.from_bytes(digest[-4:], "big") % 1_000_000


def f2_link_key(dh: bytes, n_a: bytes, n_b: bytes, addr_a: int, addr_b: int) -> bytes:
    return _hmac128(dh, LINK_KEY_TAG + n_a + n_b + address_bytes(addr_a) + address_bytes(addr_b))


def f3_check_value(
    dh: bytes, n_a: bytes, n_b: bytes, r: bytes, io_caps: int, addr_a: int, addr_b: int
) -> bytes:
    message = (
        CHECK_TAG
        + n_a
        + n_b
        + r
        + bytes([io_caps & 0xFF])
        + address_bytes(addr_a)
        + address_bytes(addr_b)
    )
    return _hmac128(dh, message)


def passkey_to_r(passkey: int) -> bytes:
    return passkey.to_bytes(16, "big")


# Authenticated-encryption stub for post-pairing traffic.  SHA-256 counter
# keystream plus a truncated HMAC tag; enough to show who can read a frame.

SEAL_NONCE_SIZE = 8
SEAL_TAG_SIZE = 16


class UnsealFailure(Exception):
    pass


def _keystream(key: bytes, nonce: bytes, length: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < length:
        out += hashlib.sha256(key + nonce + counter.to_bytes(4, "big")).digest()
        counter += 1
    return bytes(out[:length])


def seal(key: bytes, plaintext: bytes, nonce: bytes) -> bytes:
    if len(nonce) != SEAL_NONCE_SIZE:
        raise ValueError("seal nonce must be 8 bytes")
    ct = bytes(p ^ k for p, k in zip(plaintext, _keystream(key, nonce, len(plaintext))))
    tag = hmac.new(key, b"tag" + nonce + ct, hashlib.sha256).digest()[:SEAL_TAG_SIZE]
    return nonce + ct + tag


def unseal(key: bytes, blob: bytes) -> bytes:
    if key is None or len(blob) < SEAL_NONCE_SIZE + SEAL_TAG_SIZE:
        raise UnsealFailure("no key or truncated frame")
    nonce = blob[:SEAL_NONCE_SIZE]
    ct = blob[SEAL_NONCE_SIZE:-SEAL_TAG_SIZE]
    tag = blob[-SEAL_TAG_SIZE:]
    expected = hmac.new(key, b"tag" + nonce + ct, hashlib.sha256).digest()[:SEAL_TAG_SIZE]
    if not hmac.compare_digest(tag, expected):
        raise UnsealFailure("authentication tag mismatch")
    return bytes(c ^ k for c, k in zip(ct, _keystream(key, nonce, len(ct))))
