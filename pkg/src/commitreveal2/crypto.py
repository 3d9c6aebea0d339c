"""Protocol cryptography: commitment chains, EIP-712 message digests, and
recoverable ECDSA signatures with the low-s malleability rule.

All values are raw bytes: 32-byte digests and secrets, 20-byte addresses.
Digests compare as unsigned 256-bit big-endian integers where ordering matters.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import secp256k1
from .keccak import keccak256

# largest accepted s value: half the curve order, rejecting the mirrored twin
LOW_S_BOUND = 0x7FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF5D576E7357A4501DDFE92F46681B20A0

DEFAULT_DOMAIN_NAME = "Commit Reveal2"
DEFAULT_DOMAIN_VERSION = "1"

_DOMAIN_TYPEHASH = keccak256(
    b"EIP712Domain(string name,string version,uint256 chainId,address verifyingContract)"
)
# the nonce field is hashed under the wire name "trialNum"
_MESSAGE_TYPEHASH = keccak256(b"Message(uint256 round,uint256 trialNum,bytes32 cv)")


class CryptoError(Exception):
    """Base class for crypto failures."""


class InvalidSecretLength(CryptoError):
    pass


class InvalidKey(CryptoError):
    pass


class InvalidSignature(CryptoError):
    pass


class MalleableSignature(InvalidSignature):
    """Signature uses the high-s twin and must be rejected."""


@dataclass(frozen=True)
class CommitmentChain:
    """One operator's secret and its two commitment layers."""

    secret: bytes
    inner: bytes  # keccak256(secret)
    outer: bytes  # keccak256(inner)


@dataclass(frozen=True)
class RecoverableSignature:
    v: int  # 27 or 28
    r: int
    s: int

    def to_rsv_bytes(self) -> bytes:
        return self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big") + bytes([self.v])

    @classmethod
    def from_rsv_bytes(cls, blob: bytes) -> "RecoverableSignature":
        if len(blob) != 65:
            raise InvalidSignature("expected 65-byte r||s||v encoding")
        return cls(v=blob[64], r=int.from_bytes(blob[:32], "big"), s=int.from_bytes(blob[32:64], "big"))


@dataclass(frozen=True)
class TypedMessage:
    """The signed commit tuple binding a commitment to its execution context."""

    chain_id: int
    ver_contract: bytes  # 20-byte verifying contract address
    round: int
    attempt_id: int
    cv: bytes  # 32-byte outer commitment


def digest_as_int(digest: bytes) -> int:
    return int.from_bytes(digest, "big")


def derive_chain(secret: bytes) -> CommitmentChain:
    """Build the two-layer commitment chain for a 32-byte secret."""
    if len(secret) != 32:
        raise InvalidSecretLength(f"secret must be 32 bytes, got {len(secret)}")
    inner = keccak256(secret)
    return CommitmentChain(secret=secret, inner=inner, outer=keccak256(inner))


def address_from_public_point(point: tuple[int, int]) -> bytes:
    """Low 20 bytes of the keccak of the uncompressed public key (no prefix byte)."""
    x, y = point
    return keccak256(x.to_bytes(32, "big") + y.to_bytes(32, "big"))[12:]


def address_from_private_key(privkey: int) -> bytes:
    if not secp256k1.is_valid_scalar(privkey):
        raise InvalidKey("private key must be a valid curve scalar")
    return address_from_public_point(secp256k1.public_point(privkey))


def _word(value: int) -> bytes:
    return value.to_bytes(32, "big")


def domain_separator(chain_id: int, ver_contract: bytes,
                     name: str = DEFAULT_DOMAIN_NAME,
                     version: str = DEFAULT_DOMAIN_VERSION) -> bytes:
    return keccak256(
        _DOMAIN_TYPEHASH
        + keccak256(name.encode())
        + keccak256(version.encode())
        + _word(chain_id)
        + ver_contract.rjust(32, b"\x00")
    )


def typed_digest(msg: TypedMessage,
                 domain_name: str = DEFAULT_DOMAIN_NAME,
                 domain_version: str = DEFAULT_DOMAIN_VERSION) -> bytes:
    """EIP-712 digest of the commit message: keccak(0x1901 || domain || struct)."""
    struct_hash = keccak256(
        _MESSAGE_TYPEHASH + _word(msg.round) + _word(msg.attempt_id) + msg.cv
    )
    return keccak256(
        b"\x19\x01"
        + domain_separator(msg.chain_id, msg.ver_contract, domain_name, domain_version)
        + struct_hash
    )


def sign(digest: bytes, privkey: int) -> RecoverableSignature:
    """Sign a 32-byte digest; the result is always low-s normalized."""
    if not secp256k1.is_valid_scalar(privkey):
        raise InvalidKey("private key must be a valid curve scalar")
    z = int.from_bytes(digest, "big")
    parity, r, s = secp256k1.sign_raw(z, privkey)
    if s > LOW_S_BOUND:
        s = secp256k1.N - s
        parity ^= 1
    return RecoverableSignature(v=27 + parity, r=r, s=s)


def recover(digest: bytes, sig: RecoverableSignature) -> bytes:
    """Recover the signer address; rejects high-s and malformed signatures."""
    if sig.v not in (27, 28):
        raise InvalidSignature(f"recovery id must be 27 or 28, got {sig.v}")
    if not (0 < sig.r < secp256k1.N) or not (0 < sig.s < secp256k1.N):
        raise InvalidSignature("signature scalars out of range")
    if sig.s > LOW_S_BOUND:
        raise MalleableSignature("high-s signature rejected")
    z = int.from_bytes(digest, "big")
    point = secp256k1.recover_raw(z, sig.v - 27, sig.r, sig.s)
    if point is None:
        raise InvalidSignature("signature does not recover to a curve point")
    return address_from_public_point(point)
