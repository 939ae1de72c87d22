"""Reference computations that share no code with the package.

HMAC is written out from its definition over ``hashlib.sha256`` (no ``hmac``
module); curve points come from the ``cryptography`` library.
"""

import hashlib

from cryptography.hazmat.primitives.asymmetric import ec

BLOCK = 64


def hmac_sha256(key: bytes, message: bytes) -> bytes:
    if len(key) > BLOCK:
        key = hashlib.sha256(key).digest()
    key = key.ljust(BLOCK, b"\x00")
    inner = hashlib.sha256(bytes(k ^ 0x36 for k in key) + message).digest()
    return hashlib.sha256(bytes(k ^ 0x5C for k in key) + inner).digest()


def be(value: int, size: int) -> bytes:
    return value.to_bytes(size, "big")


def f1(pka_x: int, pkb_x: int, n: bytes, r: bytes) -> bytes:
    return hmac_sha256(n, be(pka_x, 32) + be(pkb_x, 32) + r)[:16]


def g(pka_x: int, pkb_x: int, na: bytes, nb: bytes) -> int:
    digest = hashlib.sha256(be(pka_x, 32) + be(pkb_x, 32) + na + nb).digest()
    return int.from_bytes(digest[28:32], "big") % 10**6


def f2(dh: bytes, na: bytes, nb: bytes, addr_a: int, addr_b: int) -> bytes:
    return hmac_sha256(dh, b"btlk" + na + nb + be(addr_a, 6) + be(addr_b, 6))[:16]


def f3(dh: bytes, na: bytes, nb: bytes, r: bytes, io: int, addr_a: int, addr_b: int) -> bytes:
    return hmac_sha256(dh, b"btck" + na + nb + r + bytes([io]) + be(addr_a, 6) + be(addr_b, 6))[:16]


def public_point(scalar: int) -> tuple:
    numbers = ec.derive_private_key(scalar, ec.SECP256R1()).public_key().public_numbers()
    return numbers.x, numbers.y


def ecdh(scalar: int, peer: tuple) -> bytes:
    priv = ec.derive_private_key(scalar, ec.SECP256R1())
    pub = ec.EllipticCurvePublicNumbers(peer[0], peer[1], ec.SECP256R1()).public_key()
    return priv.exchange(ec.ECDH(), pub)
