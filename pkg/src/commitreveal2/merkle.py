"""Merkle root over outer commitments, in the verifying contract's iterative form.

The builder keeps one queue of pending values: unconsumed leaves first, then
previously emitted hashes, pairing two at a time for exactly len(leaves) - 1
steps. For power-of-two leaf counts this equals the complete binary tree; for
other counts it matches the contract loop, not a padded tree. Leaves must be
ordered by operator activation order or verification will fail.
"""

from __future__ import annotations

from .keccak import keccak256


class TooFewLeaves(Exception):
    """Roots are defined for two or more leaves; the protocol minimum is two operators."""


def merkle_root(leaves: list[bytes]) -> bytes:
    """Fold the leaf list into its root digest."""
    n = len(leaves)
    if n < 2:
        raise TooFewLeaves(f"need at least 2 leaves, got {n}")
    hashes: list[bytes] = []
    leaf_pos = 0
    hash_pos = 0
    for _ in range(n - 1):
        if leaf_pos < n:
            first = leaves[leaf_pos]
            leaf_pos += 1
        else:
            first = hashes[hash_pos]
            hash_pos += 1
        if leaf_pos < n:
            second = leaves[leaf_pos]
            leaf_pos += 1
        else:
            second = hashes[hash_pos]
            hash_pos += 1
        hashes.append(keccak256(first + second))
    return hashes[-1]


def verify_set(leaves: list[bytes], committed_root: bytes) -> bool:
    """True iff the activation-ordered leaf set reconstructs the committed root."""
    return merkle_root(leaves) == committed_root
