"""Golden-vector verification: re-derive every frozen crypto and merkle vector
and report any drift. The file format is flat tab-separated text so other
implementations can consume the same vectors bit-exactly.
"""

from __future__ import annotations

from importlib import resources

from . import crypto, merkle
from .keccak import keccak256

VECTORS_RESOURCE = "golden_vectors.txt"


def load_vector_lines() -> list[list[str]]:
    text = resources.files("commitreveal2").joinpath("data", VECTORS_RESOURCE).read_text()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append(line.split("\t"))
    return rows


def _unhex(field: str) -> bytes:
    return b"" if field == "-" else bytes.fromhex(field)


def verify_vectors() -> list[str]:
    """Re-derive all vectors; returns a list of failure descriptions (empty = pass)."""
    failures = []
    for row in load_vector_lines():
        kind = row[0]
        try:
            if kind == "keccak":
                data, expected = _unhex(row[1]), _unhex(row[2])
                if keccak256(data) != expected:
                    failures.append(f"keccak({row[1]})")
            elif kind == "chain":
                secret, inner, outer = map(_unhex, row[1:4])
                chain = crypto.derive_chain(secret)
                if chain.inner != inner or chain.outer != outer:
                    failures.append(f"chain({row[1]})")
            elif kind == "typed":
                chain_id, contract, round_id, attempt = int(row[1]), _unhex(row[2]), int(row[3]), int(row[4])
                cv, name, version, expected = _unhex(row[5]), row[6], row[7], _unhex(row[8])
                msg = crypto.TypedMessage(chain_id, contract, round_id, attempt, cv)
                if crypto.typed_digest(msg, name, version) != expected:
                    failures.append(f"typed(chainId={row[1]},round={row[3]},attempt={row[4]})")
            elif kind == "merkle":
                leaves = [bytes.fromhex(h) for h in row[1].split(",")]
                if merkle.merkle_root(leaves) != _unhex(row[2]):
                    failures.append(f"merkle(n={len(leaves)})")
            else:
                failures.append(f"unknown vector kind {kind!r}")
        except Exception as exc:  # a malformed row is a failure, not a crash
            failures.append(f"{kind}: {exc}")
    return failures
