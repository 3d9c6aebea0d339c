"""Minimal secp256k1 arithmetic: deterministic ECDSA signing and public key recovery.

Not hardened against side channels; this backs a protocol simulator, not a wallet.
Scalar arithmetic runs over gmpy2.mpz when available, plain ints otherwise.
Nonces follow RFC 6979 (HMAC-SHA256) so signatures are reproducible run to run.
"""

from __future__ import annotations

import hashlib
import hmac

try:
    from gmpy2 import mpz
except ImportError:  # pragma: no cover
    def mpz(x):  # type: ignore[misc]
        return x

# curve parameters
P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

_P = mpz(P)
_N = mpz(N)
_G = (mpz(GX), mpz(GY), mpz(1))
_INF = (mpz(0), mpz(1), mpz(0))


def _inv(a, m):
    return pow(a, -1, m)


def _double(pt):
    x, y, z = pt
    if not z:
        return pt
    ysq = y * y % _P
    s = 4 * x * ysq % _P
    m = 3 * x * x % _P
    nx = (m * m - 2 * s) % _P
    ny = (m * (s - nx) - 8 * ysq * ysq) % _P
    nz = 2 * y * z % _P
    return (nx, ny, nz)


def _add(p1, p2):
    if not p1[2]:
        return p2
    if not p2[2]:
        return p1
    x1, y1, z1 = p1
    x2, y2, z2 = p2
    z1sq = z1 * z1 % _P
    z2sq = z2 * z2 % _P
    u1 = x1 * z2sq % _P
    u2 = x2 * z1sq % _P
    s1 = y1 * z2sq * z2 % _P
    s2 = y2 * z1sq * z1 % _P
    if u1 == u2:
        if s1 != s2:
            return _INF
        return _double(p1)
    h = (u2 - u1) % _P
    r = (s2 - s1) % _P
    hsq = h * h % _P
    hcu = hsq * h % _P
    v = u1 * hsq % _P
    nx = (r * r - hcu - 2 * v) % _P
    ny = (r * (v - nx) - s1 * hcu) % _P
    nz = h * z1 * z2 % _P
    return (nx, ny, nz)


def _mul(pt, k):
    k %= N
    result = _INF
    addend = pt
    while k:
        if k & 1:
            result = _add(result, addend)
        addend = _double(addend)
        k >>= 1
    return result


def _shamir(k1, pt1, k2, pt2):
    """k1*pt1 + k2*pt2 with interleaved doubling."""
    k1 %= N
    k2 %= N
    both = _add(pt1, pt2)
    result = _INF
    for i in range(max(k1.bit_length(), k2.bit_length()) - 1, -1, -1):
        result = _double(result)
        b1 = (k1 >> i) & 1
        b2 = (k2 >> i) & 1
        if b1 and b2:
            result = _add(result, both)
        elif b1:
            result = _add(result, pt1)
        elif b2:
            result = _add(result, pt2)
    return result


def _affine(pt):
    x, y, z = pt
    if not z:
        return None
    zi = _inv(z, _P)
    zi2 = zi * zi % _P
    return (int(x * zi2 % _P), int(y * zi2 * zi % _P))


def is_valid_scalar(k: int) -> bool:
    return 0 < k < N


def public_point(privkey: int) -> tuple[int, int]:
    """Affine public key for a private scalar."""
    if not is_valid_scalar(privkey):
        raise ValueError("private key out of range")
    pt = _affine(_mul(_G, mpz(privkey)))
    assert pt is not None
    return pt


def _rfc6979_nonce(z: int, privkey: int) -> int:
    """Deterministic nonce per RFC 6979 with HMAC-SHA256, qlen = 256."""
    h1 = (z % N).to_bytes(32, "big")
    x = privkey.to_bytes(32, "big")
    k = b"\x00" * 32
    v = b"\x01" * 32
    k = hmac.new(k, v + b"\x00" + x + h1, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    k = hmac.new(k, v + b"\x01" + x + h1, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    while True:
        v = hmac.new(k, v, hashlib.sha256).digest()
        candidate = int.from_bytes(v, "big")
        if 0 < candidate < N:
            return candidate
        k = hmac.new(k, v + b"\x00", hashlib.sha256).digest()
        v = hmac.new(k, v, hashlib.sha256).digest()


def sign_raw(z: int, privkey: int) -> tuple[int, int, int]:
    """ECDSA over a 256-bit message integer; returns (recovery_bit, r, s).

    recovery_bit is 0/1 (parity of the nonce point's y); s is NOT low-s
    normalized here, callers apply their own malleability policy.
    """
    if not is_valid_scalar(privkey):
        raise ValueError("private key out of range")
    k = _rfc6979_nonce(z, privkey)
    while True:
        pt = _affine(_mul(_G, mpz(k)))
        assert pt is not None
        rx, ry = pt
        r = rx % N
        if r == 0 or rx >= N:
            # negligible probability; re-derive a fresh nonce deterministically
            k = _rfc6979_nonce(k, privkey)
            continue
        s = _inv(mpz(k), N) * (z + r * privkey) % N
        s = int(s)
        if s == 0:
            k = _rfc6979_nonce(k, privkey)
            continue
        return (ry & 1, r, s)


def recover_raw(z: int, recovery_bit: int, r: int, s: int) -> tuple[int, int] | None:
    """Recover the signer's affine public key, or None if the signature is invalid.

    Applies no low-s policy; accepts any s in [1, N-1].
    """
    if recovery_bit not in (0, 1):
        return None
    if not (0 < r < N and 0 < s < N):
        return None
    x = r
    if x >= P:
        return None
    ysq = (pow(mpz(x), 3, _P) + 7) % _P
    y = pow(ysq, (P + 1) // 4, _P)
    if y * y % _P != ysq:
        return None
    if (y & 1) != recovery_bit:
        y = _P - y
    big_r = (mpz(x), y, mpz(1))
    r_inv = _inv(mpz(r), _N)
    u1 = (-mpz(z) * r_inv) % N
    u2 = (mpz(s) * r_inv) % N
    q = _shamir(u1, _G, u2, big_r)
    return _affine(q)
