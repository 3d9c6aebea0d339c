"""Shared fixtures: a pool of precomputed operator keys and a ledger harness
for driving hybrid rounds by hand without the actor layer.
"""

from __future__ import annotations

import random

import pytest
from hypothesis import settings

from commitreveal2 import crypto, merkle, secp256k1
from commitreveal2.ledger import Ledger, LedgerConfig, Mode

settings.register_profile("suite", max_examples=50, deadline=None)
settings.load_profile("suite")

_KEY_RNG = random.Random(0xC2C2)
KEY_POOL = [_KEY_RNG.randrange(1, secp256k1.N) for _ in range(40)]
ADDR_POOL = [crypto.address_from_private_key(k) for k in KEY_POOL]

CONSUMER = b"\xc0\xff\xee" + b"\x00" * 17


@pytest.fixture(scope="session")
def key_pool():
    return KEY_POOL


@pytest.fixture(scope="session")
def addr_pool():
    return ADDR_POOL


class Harness:
    """A funded hybrid ledger plus helpers to craft round payloads by hand."""

    def __init__(self, n: int, mode: Mode = Mode.HYBRID, **config_overrides):
        self.n = n
        self.privs = KEY_POOL[:n]
        self.addrs = ADDR_POOL[:n]
        self.leader = self.addrs[0]
        self.config = LedgerConfig(leader=self.leader, mode=mode, **config_overrides)
        self.ledger = Ledger(self.config)
        for addr in self.addrs:
            self.ledger.deposit_and_activate(addr, self.config.minimum_deposit)
        self.rng = random.Random(1234)

    def fresh_secrets(self, count: int | None = None) -> list[bytes]:
        return [self.rng.getrandbits(256).to_bytes(32, "big")
                for _ in range(count if count is not None else self.n)]

    def chains(self, secrets: list[bytes]) -> list[crypto.CommitmentChain]:
        return [crypto.derive_chain(s) for s in secrets]

    def root(self, chains) -> bytes:
        return merkle.merkle_root([c.outer for c in chains])

    def sign_commit(self, index: int, round_id: int, attempt: int, cv: bytes,
                    chain_id: int | None = None):
        msg = crypto.TypedMessage(
            chain_id=self.config.chain_id if chain_id is None else chain_id,
            ver_contract=self.config.ver_contract,
            round=round_id, attempt_id=attempt, cv=cv,
        )
        return crypto.sign(crypto.typed_digest(msg), self.privs[index])

    def signatures(self, round_id: int, attempt: int, chains) -> list:
        return [self.sign_commit(i, round_id, attempt, chains[i].outer)
                for i in range(len(chains))]

    def run_honest_hybrid_round(self, fee: int = 100) -> tuple[int, bytes, list[bytes]]:
        """Request, root, generate; returns (round_id, output, secrets)."""
        rid = self.ledger.request_random_number(CONSUMER, fee)
        rnd = self.ledger.rounds[rid]
        secrets = self.fresh_secrets(len(rnd.participants))
        chains = self.chains(secrets)
        self.ledger.set_time(self.ledger.now + 1)
        self.ledger.submit_merkle_root(self.leader, rid, self.root(chains))
        sigs = [self.sign_commit(self.addrs.index(rnd.participants[i]), rid,
                                 rnd.attempt, chains[i].outer)
                for i in range(len(chains))]
        self.ledger.set_time(self.ledger.now + 1)
        output = self.ledger.generate_random_number(self.leader, rid, secrets, sigs)
        return rid, output, secrets


@pytest.fixture
def harness():
    return Harness


def make_harness(n: int, mode: Mode = Mode.HYBRID, **overrides) -> Harness:
    return Harness(n, mode, **overrides)
