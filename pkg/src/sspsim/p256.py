"""NIST P-256 arithmetic in Jacobian coordinates.

Affine points are ``Point(x, y)`` tuples; the point at infinity is ``None``.
Nothing here is constant-time.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

P = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
A = P - 3
B = 0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B
N = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
GX = 0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296
GY = 0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5


class Point(NamedTuple):
    x: int
    y: int


G = Point(GX, GY)

try:  # optional speed-up; plain ints give identical results
    from gmpy2 import invert as _gmp_invert, mpz as _FP_TYPE

    def _invert(z):
        return _gmp_invert(z, _FP)

except ImportError:  # pragma: no cover
    _FP_TYPE = int

    def _invert(z):
        return pow(z, -1, P)


_FP = _FP_TYPE(P)

# Jacobian triple (X, Y, Z); Z == 0 encodes infinity.
_INF = (1, 1, 0)


def is_on_curve(pt: Optional[Point]) -> bool:
    if pt is None:
        return False
    x, y = pt
    if not (0 <= x < P and 0 <= y < P):
        return False
    return (y * y - (x * x * x - 3 * x + B)) % P == 0


def _double(p1):
    X1, Y1, Z1 = p1
    if Z1 == 0 or Y1 == 0:
        return _INF
    delta = Z1 * Z1 % _FP
    gamma = Y1 * Y1 % _FP
    beta = X1 * gamma % _FP
    alpha = 3 * (X1 - delta) * (X1 + delta) % _FP
    X3 = (alpha * alpha - 8 * beta) % _FP
    Z3 = ((Y1 + Z1) ** 2 - gamma - delta) % _FP
    Y3 = (alpha * (4 * beta - X3) - 8 * gamma * gamma) % _FP
    return (X3, Y3, Z3)


def _add(p1, p2):
    X1, Y1, Z1 = p1
    X2, Y2, Z2 = p2
    if Z1 == 0:
        return p2
    if Z2 == 0:
        return p1
    Z1Z1 = Z1 * Z1 % _FP
    Z2Z2 = Z2 * Z2 % _FP
    U1 = X1 * Z2Z2 % _FP
    U2 = X2 * Z1Z1 % _FP
    S1 = Y1 * Z2 * Z2Z2 % _FP
    S2 = Y2 * Z1 * Z1Z1 % _FP
    H = (U2 - U1) % _FP
    R = (S2 - S1) % _FP
    if H == 0:
        return _double(p1) if R == 0 else _INF
    HH = H * H % _FP
    HHH = H * HH % _FP
    V = U1 * HH % _FP
    X3 = (R * R - HHH - 2 * V) % _FP
    Y3 = (R * (V - X3) - S1 * HHH) % _FP
    Z3 = H * Z1 * Z2 % _FP
    return (X3, Y3, Z3)


def _add_affine(p1, x2: int, y2: int):
    """Mixed addition: Jacobian ``p1`` plus affine ``(x2, y2)``."""
    X1, Y1, Z1 = p1
    if Z1 == 0:
        return (x2, y2, 1)
    Z1Z1 = Z1 * Z1 % _FP
    U2 = x2 * Z1Z1 % _FP
    S2 = y2 * Z1 * Z1Z1 % _FP
    H = (U2 - X1) % _FP
    R = (S2 - Y1) % _FP
    if H == 0:
        return _double(p1) if R == 0 else _INF
    HH = H * H % _FP
    HHH = H * HH % _FP
    V = X1 * HH % _FP
    X3 = (R * R - HHH - 2 * V) % _FP
    Y3 = (R * (V - X3) - Y1 * HHH) % _FP
    Z3 = H * Z1 % _FP
    return (X3, Y3, Z3)


def _to_affine(p1) -> Optional[Point]:
    X, Y, Z = p1
    if Z == 0:
        return None
    zi = _invert(Z)
    zi2 = zi * zi % _FP
    return Point(int(X * zi2 % _FP), int(Y * zi2 * zi % _FP))


def _scalar_mult_jacobian(k: int, pt: Point):
    # 4-bit fixed window over a small table of multiples.
    x, y = _FP_TYPE(pt.x), _FP_TYPE(pt.y)
    table = [_INF, (x, y, 1)]
    for _ in range(14):
        table.append(_add_affine(table[-1], x, y))
    acc = _INF
    for shift in range((k.bit_length() + 3) // 4 * 4 - 4, -1, -4):
        acc = _double(_double(_double(_double(acc))))
        digit = (k >> shift) & 0xF
        if digit:
            acc = _add(acc, table[digit])
    return acc


_G_TABLE: list[list[tuple[int, int]]] = []


def _build_g_table() -> None:
    # _G_TABLE[i][d - 1] = d * 16**i * G, affine.
    base = (_FP_TYPE(GX), _FP_TYPE(GY), 1)
    for _ in range(64):
        row_jac = [base]
        for _ in range(14):
            row_jac.append(_add(row_jac[-1], base))
        _G_TABLE.append([tuple(map(_FP_TYPE, _to_affine(q))) for q in row_jac])
        base = row_jac[15 - 1]
        base = _add(base, row_jac[0])  # 16 * previous base


def mult_base(k: int) -> Optional[Point]:
    """Return ``k * G``."""
    k %= N
    if k == 0:
        return None
    if not _G_TABLE:
        _build_g_table()
    acc = _INF
    i = 0
    while k:
        digit = k & 0xF
        if digit:
            x, y = _G_TABLE[i][digit - 1]
            acc = _add_affine(acc, x, y)
        k >>= 4
        i += 1
    return _to_affine(acc)


def mult(k: int, pt: Point) -> Optional[Point]:
    """Return ``k * pt`` for an affine point already known to be on the curve."""
    k %= N
    if k == 0:
        return None
    return _to_affine(_scalar_mult_jacobian(k, pt))
