"""Keccak-256 (the pre-FIPS padding variant used by Ethereum).

The permutation runs as a numba-compiled kernel over the 25 uint64 lanes;
without numba the same sponge falls back to a plain-int implementation.
Both paths produce identical digests and are cross-checked in the tests.
"""

from __future__ import annotations

import numpy as np

_RATE = 136  # bytes absorbed per permutation at 256-bit capacity

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# rho rotation offsets, generated from the t-walk in the permutation definition
_rho = [[0] * 5 for _ in range(5)]  # indexed [x][y]
_x, _y = 1, 0
for _t in range(24):
    _rho[_x][_y] = ((_t + 1) * (_t + 2) // 2) % 64
    _x, _y = _y, (2 * _x + 3 * _y) % 5

# combined rho+pi as a flat-lane gather: dest lane d reads _SRC[d] rotated by _ROT[d]
_SRC = [0] * 25
_ROT = [0] * 25
for _xx in range(5):
    for _yy in range(5):
        _d = _xx + 5 * _yy
        _sx, _sy = (_xx + 3 * _yy) % 5, _xx
        _SRC[_d] = _sx + 5 * _sy
        _ROT[_d] = _rho[_sx][_sy]

_RC_ARR = np.array(_ROUND_CONSTANTS, dtype=np.uint64)
_SRC_ARR = np.array(_SRC, dtype=np.int64)
_ROT_ARR = np.array(_ROT, dtype=np.uint64)


def _permute_py(lanes: list[int]) -> None:
    """Reference permutation over plain ints, used when numba is unavailable."""
    mask = (1 << 64) - 1
    for rc in _ROUND_CONSTANTS:
        bc = [lanes[x] ^ lanes[x + 5] ^ lanes[x + 10] ^ lanes[x + 15] ^ lanes[x + 20]
              for x in range(5)]
        for x in range(5):
            c = bc[(x + 1) % 5]
            t = bc[(x + 4) % 5] ^ (((c << 1) | (c >> 63)) & mask)
            for y in range(0, 25, 5):
                lanes[y + x] ^= t
        tmp = [0] * 25
        for i in range(25):
            v = lanes[_SRC[i]]
            r = _ROT[i]
            tmp[i] = ((v << r) | (v >> (64 - r))) & mask if r else v
        for y in range(0, 25, 5):
            for x in range(5):
                lanes[y + x] = tmp[y + x] ^ ((~tmp[y + (x + 1) % 5]) & tmp[y + (x + 2) % 5])
        lanes[0] = (lanes[0] ^ rc) & mask


try:
    from numba import njit, uint64 as _u64

    @njit(cache=True)
    def _permute_nb(st):  # pragma: no cover - exercised via keccak256
        bc = np.empty(5, dtype=np.uint64)
        tmp = np.empty(25, dtype=np.uint64)
        for rnd in range(24):
            for x in range(5):
                bc[x] = st[x] ^ st[x + 5] ^ st[x + 10] ^ st[x + 15] ^ st[x + 20]
            for x in range(5):
                c = bc[(x + 1) % 5]
                t = bc[(x + 4) % 5] ^ ((c << _u64(1)) | (c >> _u64(63)))
                for y in range(0, 25, 5):
                    st[y + x] ^= t
            for i in range(25):
                v = st[_SRC_ARR[i]]
                r = _ROT_ARR[i]
                tmp[i] = v if r == _u64(0) else ((v << r) | (v >> (_u64(64) - r)))
            for y in range(0, 25, 5):
                for x in range(5):
                    st[y + x] = tmp[y + x] ^ ((~tmp[y + (x + 1) % 5]) & tmp[y + (x + 2) % 5])
            st[0] ^= _RC_ARR[rnd]

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _keccak256_nb(data: bytes) -> bytes:
    st = np.zeros(25, dtype=np.uint64)
    padded = bytearray(data)
    padded.append(0x01)
    padded.extend(b"\x00" * (-len(padded) % _RATE))
    padded[-1] ^= 0x80
    buf = bytes(padded)
    for off in range(0, len(buf), _RATE):
        st[:17] ^= np.frombuffer(buf, dtype=np.uint64, count=17, offset=off)
        _permute_nb(st)
    return st[:4].tobytes()


def _keccak256_py(data: bytes) -> bytes:
    lanes = [0] * 25
    padded = bytearray(data)
    padded.append(0x01)
    padded.extend(b"\x00" * (-len(padded) % _RATE))
    padded[-1] ^= 0x80
    for off in range(0, len(padded), _RATE):
        for i in range(17):
            lanes[i] ^= int.from_bytes(padded[off + 8 * i:off + 8 * i + 8], "little")
        _permute_py(lanes)
    return b"".join(lanes[i].to_bytes(8, "little") for i in range(4))


if _HAVE_NUMBA:
    keccak256 = _keccak256_nb
else:  # pragma: no cover
    keccak256 = _keccak256_py

keccak256.__doc__ = "Return the 32-byte keccak-256 digest of the input bytes."
