"""Round arithmetic: the intermediate value, per-operator order keys, the
descending reveal order, and the final output.

Every sequence argument is in operator activation order. The reveal order
only decides who discloses when; the final output always concatenates secrets
in activation order, so it is invariant under reveal timing.
"""

from __future__ import annotations

from dataclasses import dataclass

from .keccak import keccak256


class TooFewParticipants(Exception):
    pass


class AmbiguousOrder(Exception):
    """Two order keys collided; sorting has no strict descending answer."""


@dataclass(frozen=True)
class RevealOrder:
    """Activation indices sorted by their order keys, largest key first."""

    permutation: tuple[int, ...]
    keys: tuple[bytes, ...]  # aligned with permutation, strictly decreasing


def _require_min(values, what: str) -> None:
    if len(values) < 2:
        raise TooFewParticipants(f"need at least 2 {what}, got {len(values)}")


def omega_v(inners: list[bytes]) -> bytes:
    """Hash of all inner commitments concatenated in activation order."""
    _require_min(inners, "inner commitments")
    return keccak256(b"".join(inners))


def order_keys(omega_v_value: bytes, outers: list[bytes]) -> list[bytes]:
    """Per-operator order key: keccak(omega_v || outer_i), in activation order."""
    _require_min(outers, "outer commitments")
    return [keccak256(omega_v_value + cv) for cv in outers]


def reveal_order(keys: list[bytes]) -> RevealOrder:
    """Sort activation indices by key, descending as 256-bit unsigned integers."""
    _require_min(keys, "order keys")
    if len(set(keys)) != len(keys):
        raise AmbiguousOrder("duplicate order keys")
    permutation = sorted(range(len(keys)), key=lambda i: keys[i], reverse=True)
    return RevealOrder(
        permutation=tuple(permutation),
        keys=tuple(keys[i] for i in permutation),
    )


def verify_order(order: RevealOrder) -> bool:
    """True iff keys strictly decrease and the permutation is a bijection."""
    n = len(order.permutation)
    if len(order.keys) != n or sorted(order.permutation) != list(range(n)):
        return False
    return all(order.keys[i - 1] > order.keys[i] for i in range(1, n))


def omega_o(secrets: list[bytes]) -> bytes:
    """Final output: hash of all secrets concatenated in activation order."""
    _require_min(secrets, "secrets")
    return keccak256(b"".join(secrets))


@dataclass(frozen=True)
class HonestRound:
    """Full trace of one honest round's arithmetic."""

    secrets: tuple[bytes, ...]
    inners: tuple[bytes, ...]
    outers: tuple[bytes, ...]
    omega_v: bytes
    keys: tuple[bytes, ...]
    order: RevealOrder
    omega_o: bytes


def run_round(secrets: list[bytes]) -> HonestRound:
    """Evaluate the whole pipeline for a set of activation-ordered secrets."""
    _require_min(secrets, "secrets")
    inners = [keccak256(s) for s in secrets]
    outers = [keccak256(c) for c in inners]
    ov = omega_v(inners)
    keys = order_keys(ov, outers)
    return HonestRound(
        secrets=tuple(secrets),
        inners=tuple(inners),
        outers=tuple(outers),
        omega_v=ov,
        keys=tuple(keys),
        order=reveal_order(keys),
        omega_o=omega_o(secrets),
    )
