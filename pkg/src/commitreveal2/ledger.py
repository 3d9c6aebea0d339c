"""The verifying contract as a deterministic state machine.

Operator registry and deposits, the round lifecycle for both deployment modes,
the dispute/fallback branch with slashing and redistribution, halt/resume,
consumer refunds, replay protection, and an abstract cost meter standing in
for gas. All timing is in logical ticks supplied by the caller; every public
method behaves transactionally (validate, then mutate) and appends one call
event to the transcript whether it succeeds or not.

Slashed deposits are redistributed through a pull-style per-operator
accumulator so a slash costs O(1) meter work regardless of the operator count;
indivisible remainders accrue to a dust pool. For participant slashing the
leader receives extra shares as escalation-cost compensation; a slashed leader
gets no bonus and the split is equal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import beacon_math, crypto, merkle
from .beacon_math import RevealOrder
from .crypto import RecoverableSignature
from .keccak import keccak256
from .transcript import Transcript


class Mode(enum.Enum):
    ON_CHAIN = "OnChain"
    HYBRID = "Hybrid"


class Phase(enum.Enum):
    AWAITING_REQUEST = "AwaitingRequest"   # requested, queued behind an earlier round
    OFF_CHAIN = "OffChainInProgress"
    ROOT_SUBMITTED = "MerkleRootSubmitted"
    CV_WINDOW = "OnChainCvWindow"
    CO_WINDOW = "OnChainCoWindow"
    S_WINDOW = "OnChainSWindow"
    FINALIZED = "Finalized"
    HALTED = "Halted"
    REFUNDED = "Refunded"


class LedgerError(Exception):
    """Base class for rejected calls; the class name is the transcript result."""


class InsufficientDeposit(LedgerError):
    pass


class AlreadyActive(LedgerError):
    pass


class ServiceHalted(LedgerError):
    pass


class NotEnoughOperators(LedgerError):
    pass


class NotLeader(LedgerError):
    pass


class PhaseViolation(LedgerError):
    pass


class RootMismatch(LedgerError):
    pass


class SignatureInvalid(LedgerError):
    pass


class SignatureRequired(LedgerError):
    pass


class MalleableSignature(LedgerError):
    pass


class Replayed(LedgerError):
    pass


class WindowClosed(LedgerError):
    pass


class CommitmentMismatch(LedgerError):
    pass


class NotYourTurn(LedgerError):
    pass


class OrderInvalid(LedgerError):
    pass


class TooEarly(LedgerError):
    pass


class NotHalted(LedgerError):
    pass


class NotYourRequest(LedgerError):
    pass


class AlreadyProcessed(LedgerError):
    pass


class AlreadyRefunded(LedgerError):
    pass


class InvalidCall(LedgerError):
    pass


@dataclass
class LedgerConfig:
    leader: bytes  # designated at genesis; the single recovery authority
    mode: Mode = Mode.HYBRID
    chain_id: int = 1
    ver_contract: bytes = bytes.fromhex("00000000000000000000000000000000000000c2")
    domain_name: str = crypto.DEFAULT_DOMAIN_NAME
    domain_version: str = crypto.DEFAULT_DOMAIN_VERSION
    minimum_deposit: int = 1_000
    min_operators: int = 2
    # window lengths in ticks
    off_chain_phase_timeout: int = 10
    merkle_root_submission_period: int = 10
    on_chain_submission_period: int = 10
    request_or_generate_period: int = 10
    # extra shares of a participant-slash awarded to the leader
    leader_bonus_shares: int = 1
    # fee fraction paid to the final reveal-order position on finalization
    last_revealer_reward_num: int = 0
    last_revealer_reward_den: int = 1
    check_conservation: bool = True


@dataclass
class OperatorRecord:
    address: bytes
    deposit: int
    active: bool
    activation_index: int
    reward_debt: int  # accumulator snapshot; accrual runs only while active


@dataclass
class Round:
    round_id: int
    consumer: bytes
    fee: int
    attempt: int = 0
    phase: Phase = Phase.AWAITING_REQUEST
    participants: list[bytes] = field(default_factory=list)
    started_at: int = 0
    phase_entered: int = 0
    off_chain_deadline: int = 0   # earliest escalation gate for the commit phase
    leader_deadline: int = 0      # root/dispute/generate duty expiry
    window_deadline: int = 0      # on-chain submission window expiry
    merkle_root: bytes | None = None
    cv: list[bytes | None] = field(default_factory=list)
    co: list[bytes | None] = field(default_factory=list)
    s: list[bytes | None] = field(default_factory=list)
    order: RevealOrder | None = None
    dispute_kind: str | None = None  # "cv" | "co" | "s" while a window is open
    accused: frozenset[int] = frozenset()
    output: bytes | None = None

    def index_of(self, addr: bytes) -> int | None:
        try:
            return self.participants.index(addr)
        except ValueError:
            return None


COUNTERS = (
    "transactions",
    "signatureVerifications",
    "keccakInvocations",
    "storageWrites",
    "merkleLeavesHashed",
)


class CostMeter:
    """Monotone counters of abstract on-chain work."""

    def __init__(self) -> None:
        self.totals = {name: 0 for name in COUNTERS}

    def bump(self, name: str, amount: int = 1) -> None:
        assert amount >= 0
        self.totals[name] += amount

    def snapshot(self) -> dict[str, int]:
        return dict(self.totals)

    def delta_since(self, snapshot: dict[str, int]) -> dict[str, int]:
        return {k: v - snapshot[k] for k, v in self.totals.items() if v != snapshot[k]}


def _hex(b: bytes) -> str:
    return "0x" + b.hex()


class Ledger:
    """Single-owner state machine; all mutation goes through the call methods."""

    def __init__(self, config: LedgerConfig, transcript: Transcript | None = None) -> None:
        self.config = config
        self.transcript = transcript if transcript is not None else Transcript()
        self.now = 0
        self.meter = CostMeter()
        self.operators: dict[bytes, OperatorRecord] = {}
        self._next_activation = 0
        self.balances: dict[bytes, int] = {}
        self.escrow: dict[int, int] = {}
        self.acc_per_operator = 0
        self.dust_pool = 0
        self.halted = False
        self.rounds: dict[int, Round] = {}
        self._queue: list[int] = []
        self.current_round_id: int | None = None
        self._next_round_id = 0
        self.seen: set[tuple[bytes, int, int, str]] = set()
        self.external_in = 0
        self.external_out = 0
        self._notes: list[tuple[str, dict]] = []
        self._domain_sep = crypto.domain_separator(
            config.chain_id, config.ver_contract, config.domain_name, config.domain_version
        )

    # ------------------------------------------------------------------ helpers

    def set_time(self, tick: int) -> None:
        assert tick >= self.now, "logical time is monotone"
        self.now = tick

    def active_count(self) -> int:
        return sum(1 for op in self.operators.values() if op.active)

    def active_operators(self) -> list[bytes]:
        """Active operator addresses in activation order."""
        ops = [op for op in self.operators.values() if op.active]
        ops.sort(key=lambda op: op.activation_index)
        return [op.address for op in ops]

    def round(self, round_id: int) -> Round:
        if round_id not in self.rounds:
            raise InvalidCall(f"unknown round {round_id}")
        return self.rounds[round_id]

    def internal_funds(self) -> int:
        total = self.dust_pool + sum(self.escrow.values()) + sum(self.balances.values())
        for op in self.operators.values():
            total += op.deposit
            if op.active:
                total += self.acc_per_operator - op.reward_debt
        return total

    def _keccak(self, data: bytes) -> bytes:
        self.meter.bump("keccakInvocations")
        return keccak256(data)

    def _typed_digest(self, round_id: int, attempt: int, cv: bytes) -> bytes:
        # domain separator is fixed at deployment; struct hash + final hash are per call
        self.meter.bump("keccakInvocations", 2)
        msg = crypto.TypedMessage(
            chain_id=self.config.chain_id,
            ver_contract=self.config.ver_contract,
            round=round_id,
            attempt_id=attempt,
            cv=cv,
        )
        return crypto.typed_digest(msg, self.config.domain_name, self.config.domain_version)

    def _verify_signature(self, digest: bytes, sig: RecoverableSignature | None,
                          expected: bytes, error_cls: type[LedgerError]) -> None:
        if sig is None:
            raise error_cls("signature required for data not yet on chain")
        self.meter.bump("signatureVerifications")
        try:
            recovered = crypto.recover(digest, sig)
        except crypto.MalleableSignature as exc:
            raise MalleableSignature(str(exc)) from exc
        except crypto.InvalidSignature as exc:
            raise error_cls(str(exc)) from exc
        if recovered != expected:
            raise error_cls("signature does not recover to the expected operator")

    def _check_root(self, leaves: list[bytes], committed: bytes) -> bool:
        self.meter.bump("merkleLeavesHashed", len(leaves))
        self.meter.bump("keccakInvocations", len(leaves) - 1)
        return merkle.verify_set(leaves, committed)

    def _write(self, slots: int = 1) -> None:
        self.meter.bump("storageWrites", slots)

    def _mark_seen(self, addr: bytes, round_id: int, attempt: int, kind: str) -> None:
        key = (addr, round_id, attempt, kind)
        if key in self.seen:
            raise Replayed(f"{kind} already accepted for this (address, round, attempt)")
        self.seen.add(key)
        self._write()

    def _note(self, name: str, **info) -> None:
        self._notes.append((name, info))

    def _call(self, name: str, caller: bytes | None, round_id: int | None,
              fn, info: dict | None = None, attempt: int | None = None):
        """Run one guarded call: log the event with result and meter delta."""
        snapshot = self.meter.snapshot()
        self.meter.bump("transactions")
        if attempt is None:
            attempt = self.rounds[round_id].attempt if round_id in self.rounds else None
        try:
            result = fn()
        except LedgerError as exc:
            self.transcript.append(
                self.now, "call", name,
                caller=_hex(caller) if caller else None,
                round=round_id, attempt=attempt,
                result=type(exc).__name__,
                meter=self.meter.delta_since(snapshot) or None,
            )
            self._notes.clear()
            raise
        extra = dict(info or {})
        if isinstance(result, dict):
            extra.update(result)
            result = extra.pop("__return__", None)
        self.transcript.append(
            self.now, "call", name,
            caller=_hex(caller) if caller else None,
            round=round_id, attempt=attempt,
            result="ok",
            meter=self.meter.delta_since(snapshot) or None,
            info=extra or None,
        )
        for note_name, note_info in self._notes:
            self.transcript.append(self.now, "note", note_name, **note_info)
        self._notes.clear()
        if self.config.check_conservation:
            assert self.internal_funds() == self.external_in - self.external_out, \
                "internal funds drifted from net external flows"
        return result

    # --------------------------------------------------------- reward accounting

    def _settle(self, addr: bytes) -> None:
        op = self.operators[addr]
        if op.active:
            pending = self.acc_per_operator - op.reward_debt
            if pending:
                self.balances[addr] = self.balances.get(addr, 0) + pending
                self._write()
            op.reward_debt = self.acc_per_operator

    def _deactivate(self, addr: bytes) -> None:
        self._settle(addr)
        self.operators[addr].active = False
        self._write()

    def _redistribute(self, amount: int, leader_bonus: bool) -> None:
        """Spread a slashed amount over the currently active operators, O(1) work."""
        recipients = self.active_count()
        leader_active = (self.config.leader in self.operators
                         and self.operators[self.config.leader].active)
        bonus = self.config.leader_bonus_shares if (leader_bonus and leader_active) else 0
        if recipients == 0:
            self.dust_pool += amount
            self._write()
            return
        per_share = amount // (recipients + bonus)
        self.acc_per_operator += per_share
        if bonus:
            leader_cut = bonus * per_share
            self.balances[self.config.leader] = self.balances.get(self.config.leader, 0) + leader_cut
            self._write()
        # the indivisible remainder always lands in the pool slot; metering it
        # unconditionally keeps slash cost independent of divisibility
        self.dust_pool += amount - (recipients + bonus) * per_share
        self._write(2)  # accumulator and pool slots

    def _slash(self, addrs: list[bytes], leader_bonus: bool) -> int:
        total = 0
        for addr in addrs:
            op = self.operators[addr]
            amount = op.deposit
            total += amount
            op.deposit = 0
            self._deactivate(addr)
            self._write()
            self._note("slashed", caller=_hex(addr), info={"amount": amount})
        self._redistribute(total, leader_bonus=leader_bonus)
        return total

    # ----------------------------------------------------------- round lifecycle

    def _start_attempt(self, rnd: Round, attempt: int) -> None:
        rnd.attempt = attempt
        rnd.participants = self.active_operators()
        assert len(rnd.participants) >= self.config.min_operators
        n = len(rnd.participants)
        rnd.started_at = rnd.phase_entered = self.now
        rnd.merkle_root = None
        rnd.cv = [None] * n
        rnd.co = [None] * n
        rnd.s = [None] * n
        rnd.order = None
        rnd.dispute_kind = None
        rnd.accused = frozenset()
        if self.config.mode is Mode.HYBRID:
            rnd.phase = Phase.OFF_CHAIN
            rnd.off_chain_deadline = self.now + self.config.off_chain_phase_timeout
            rnd.leader_deadline = (self.now + self.config.off_chain_phase_timeout
                                   + self.config.merkle_root_submission_period)
        else:
            rnd.phase = Phase.CV_WINDOW
            rnd.window_deadline = self.now + self.config.on_chain_submission_period
        self._write(3)
        self._note("attemptStarted", round=rnd.round_id, attempt=attempt,
                   info={"participants": [_hex(a) for a in rnd.participants]})

    def _promote_next(self) -> None:
        if self.current_round_id is not None or self.halted:
            return
        while self._queue:
            rid = self._queue[0]
            rnd = self.rounds[rid]
            if rnd.phase is Phase.REFUNDED:
                self._queue.pop(0)
                continue
            if self.active_count() < self.config.min_operators:
                return
            self._queue.pop(0)
            self.current_round_id = rid
            self._start_attempt(rnd, rnd.attempt)
            return

    def _current(self, round_id: int) -> Round:
        rnd = self.round(round_id)
        if self.current_round_id != round_id:
            raise PhaseViolation(f"round {round_id} is not in service")
        return rnd

    def _halt(self, rnd: Round) -> None:
        self.halted = True
        rnd.phase = Phase.HALTED
        rnd.dispute_kind = None
        rnd.accused = frozenset()
        self._write(2)
        self._note("halted", round=rnd.round_id, attempt=rnd.attempt)

    def _finalize(self, rnd: Round) -> dict:
        secrets = [value for value in rnd.s]
        assert all(value is not None for value in secrets)
        output = self._keccak(b"".join(secrets))  # type: ignore[arg-type]
        rnd.output = output
        rnd.phase = Phase.FINALIZED
        self._write(2)
        fee = self.escrow.pop(rnd.round_id, 0)
        if fee:
            reward = fee * self.config.last_revealer_reward_num // self.config.last_revealer_reward_den
            if reward and rnd.order is not None:
                last = rnd.participants[rnd.order.permutation[-1]]
                self.balances[last] = self.balances.get(last, 0) + reward
                self._write()
                fee -= reward
            self.balances[self.config.leader] = self.balances.get(self.config.leader, 0) + fee
            self._write()
        self.current_round_id = None
        self._promote_next()
        return {"output": output.hex(), "consumer": _hex(rnd.consumer), "phase": "Finalized"}

    # ------------------------------------------------------------- public calls

    def deposit_and_activate(self, caller: bytes, amount: int) -> int:
        def op() -> dict:
            if amount < self.config.minimum_deposit:
                raise InsufficientDeposit(
                    f"deposit {amount} below minimum {self.config.minimum_deposit}")
            record = self.operators.get(caller)
            if record is not None and record.active:
                raise AlreadyActive("operator is already active")
            self.external_in += amount
            index = self._next_activation
            self._next_activation += 1
            self.operators[caller] = OperatorRecord(
                address=caller, deposit=amount, active=True,
                activation_index=index, reward_debt=self.acc_per_operator,
            )
            self._write(3)
            return {"__return__": index, "activationIndex": index, "externalIn": amount}
        return self._call("depositAndActivate", caller, None, op)

    def request_random_number(self, consumer: bytes, fee: int) -> int:
        rid = self._next_round_id  # id the request will take if accepted

        def op() -> dict:
            if self.halted:
                raise ServiceHalted("no requests while halted")
            if self.active_count() < self.config.min_operators:
                raise NotEnoughOperators(
                    f"need {self.config.min_operators} active operators")
            if fee < 0:
                raise InvalidCall("fee must be non-negative")
            self._next_round_id += 1
            self.rounds[rid] = Round(round_id=rid, consumer=consumer, fee=fee)
            self.escrow[rid] = fee
            self.external_in += fee
            self._queue.append(rid)
            self._write(2)
            self._promote_next()
            return {"__return__": rid, "externalIn": fee}
        return self._call("requestRandomNumber", consumer, rid, op, attempt=0)

    def submit_merkle_root(self, caller: bytes, round_id: int, root: bytes) -> None:
        def op() -> None:
            if self.config.mode is not Mode.HYBRID:
                raise PhaseViolation("root submission exists only in hybrid mode")
            if caller != self.config.leader:
                raise NotLeader("only the leader submits the root")
            rnd = self._current(round_id)
            if rnd.phase is not Phase.OFF_CHAIN:
                raise PhaseViolation(f"cannot submit root in phase {rnd.phase.value}")
            if len(root) != 32:
                raise InvalidCall("root must be 32 bytes")
            rnd.merkle_root = root
            rnd.phase = Phase.ROOT_SUBMITTED
            rnd.phase_entered = self.now
            # generation duty budgets one tick per reveal slot on top of the windows
            rnd.leader_deadline = (self.now + self.config.off_chain_phase_timeout
                                   + self.config.request_or_generate_period
                                   + len(rnd.participants))
            self._write(3)
        return self._call("submitMerkleRoot", caller, round_id, op)

    def generate_random_number(self, caller: bytes, round_id: int,
                               secrets: list[bytes],
                               signatures: list[RecoverableSignature | None]) -> bytes:
        def op() -> dict:
            if caller != self.config.leader:
                raise NotLeader("only the leader finalizes the hybrid round")
            rnd = self._current(round_id)
            if rnd.phase is not Phase.ROOT_SUBMITTED:
                raise PhaseViolation(f"cannot generate in phase {rnd.phase.value}")
            n = len(rnd.participants)
            if len(secrets) != n or len(signatures) != n:
                raise RootMismatch("submission arity does not match the participant set")
            inners = []
            outers = []
            for value in secrets:
                if len(value) != 32:
                    raise CommitmentMismatch("secrets must be 32 bytes")
                inner = self._keccak(value)
                inners.append(inner)
                outers.append(self._keccak(inner))
            for i, outer in enumerate(outers):
                if rnd.cv[i] is not None and rnd.cv[i] != outer:
                    raise CommitmentMismatch(
                        f"secret {i} contradicts its on-chain commitment")
            assert rnd.merkle_root is not None
            if not self._check_root(outers, rnd.merkle_root):
                raise RootMismatch("commitment set does not reconstruct the stored root")
            for i, outer in enumerate(outers):
                if rnd.cv[i] is None:
                    digest = self._typed_digest(round_id, rnd.attempt, outer)
                    self._verify_signature(digest, signatures[i],
                                           rnd.participants[i], SignatureInvalid)
            for i, addr in enumerate(rnd.participants):
                self._mark_seen(addr, round_id, rnd.attempt, "s")
                rnd.s[i] = secrets[i]
            self._write(n)
            if self.config.last_revealer_reward_num:
                omega_v = self._keccak(b"".join(inners))
                self.meter.bump("keccakInvocations", n)
                keys = beacon_math.order_keys(omega_v, outers)
                rnd.order = beacon_math.reveal_order(keys)
            info = self._finalize(rnd)
            info["__return__"] = rnd.output
            return info
        return self._call("generateRandomNumber", caller, round_id, op)

    # ------------------------------------------------------- on-chain submissions

    def _require_window(self, rnd: Round, phase: Phase, dispute: str | None) -> None:
        if rnd.phase is not phase:
            raise PhaseViolation(f"phase is {rnd.phase.value}, not {phase.value}")
        if self.config.mode is Mode.HYBRID and rnd.dispute_kind != dispute:
            raise PhaseViolation("no matching dispute window is open")
        if self.now > rnd.window_deadline:
            raise WindowClosed("submission window has expired")

    def _participant_index(self, rnd: Round, caller: bytes) -> int:
        index = rnd.index_of(caller)
        if index is None:
            raise NotYourTurn("caller is not a participant of this round")
        if self.config.mode is Mode.HYBRID and index not in rnd.accused:
            raise NotYourTurn("caller is not named in the pending request")
        return index

    def submit_cv(self, caller: bytes, round_id: int, value: bytes) -> None:
        def op() -> None:
            rnd = self._current(round_id)
            self._require_window(rnd, Phase.CV_WINDOW, "cv")
            index = self._participant_index(rnd, caller)
            if len(value) != 32:
                raise InvalidCall("commitment must be 32 bytes")
            if rnd.cv[index] is not None:
                raise Replayed("commitment already submitted")
            self._mark_seen(caller, round_id, rnd.attempt, "cv")
            rnd.cv[index] = value
            self._write()
            if all(v is not None for v in rnd.cv):
                if self.config.mode is Mode.ON_CHAIN:
                    rnd.phase = Phase.CO_WINDOW
                    rnd.window_deadline = self.now + self.config.on_chain_submission_period
                else:
                    # dispute satisfied; the leader may now build and submit the root
                    rnd.phase = Phase.OFF_CHAIN
                    rnd.dispute_kind = None
                    rnd.accused = frozenset()
                    rnd.leader_deadline = self.now + self.config.merkle_root_submission_period
                rnd.phase_entered = self.now
                self._write()
                self._note("phaseAdvanced", round=round_id, attempt=rnd.attempt,
                           info={"phase": rnd.phase.value})
        return self._call("submitCv", caller, round_id, op)

    def submit_co(self, caller: bytes, round_id: int, value: bytes) -> None:
        def op() -> None:
            rnd = self._current(round_id)
            self._require_window(rnd, Phase.CO_WINDOW, "co")
            index = self._participant_index(rnd, caller)
            if rnd.co[index] is not None:
                raise Replayed("inner commitment already submitted")
            anchored = rnd.cv[index]
            assert anchored is not None
            if self._keccak(value) != anchored:
                raise CommitmentMismatch("hash of value does not match the commitment")
            self._mark_seen(caller, round_id, rnd.attempt, "co")
            rnd.co[index] = value
            self._write()
            if all(v is not None for v in rnd.co):
                if self.config.mode is Mode.ON_CHAIN:
                    rnd.phase = Phase.S_WINDOW
                    # budget one tick per ordered reveal slot
                    rnd.window_deadline = (self.now + self.config.on_chain_submission_period
                                           + len(rnd.participants))
                else:
                    rnd.phase = Phase.ROOT_SUBMITTED
                    rnd.dispute_kind = None
                    rnd.accused = frozenset()
                    rnd.leader_deadline = (self.now + self.config.off_chain_phase_timeout
                                           + self.config.request_or_generate_period
                                           + len(rnd.participants))
                rnd.phase_entered = self.now
                self._write()
                self._note("phaseAdvanced", round=round_id, attempt=rnd.attempt,
                           info={"phase": rnd.phase.value})
        return self._call("submitCo", caller, round_id, op)

    def submit_reveal_order(self, caller: bytes, round_id: int, order: RevealOrder) -> None:
        def op() -> None:
            if self.config.mode is not Mode.ON_CHAIN:
                raise PhaseViolation("order submission exists only in on-chain mode")
            rnd = self._current(round_id)
            if rnd.phase is not Phase.S_WINDOW:
                raise PhaseViolation(f"phase is {rnd.phase.value}")
            if rnd.order is not None:
                raise Replayed("reveal order already stored")
            if self.now > rnd.window_deadline:
                raise WindowClosed("submission window has expired")
            if rnd.index_of(caller) is None:
                raise NotYourTurn("caller is not a participant of this round")
            self._validate_order(rnd, order)
            rnd.order = order
            self._write()
        return self._call("submitRevealOrder", caller, round_id, op)

    def _validate_order(self, rnd: Round, order: RevealOrder) -> None:
        n = len(rnd.participants)
        inners = [v for v in rnd.co]
        assert all(v is not None for v in inners)
        omega_v = self._keccak(b"".join(inners))  # type: ignore[arg-type]
        self.meter.bump("keccakInvocations", n)
        keys = beacon_math.order_keys(omega_v, [v for v in rnd.cv])  # type: ignore[list-item]
        if (not beacon_math.verify_order(order)
                or len(order.permutation) != n
                or any(order.keys[j] != keys[order.permutation[j]] for j in range(n))):
            raise OrderInvalid("order is not the descending-key order for this round")

    def submit_s(self, caller: bytes, round_id: int, value: bytes) -> None:
        def op() -> dict | None:
            rnd = self._current(round_id)
            self._require_window(rnd, Phase.S_WINDOW, "s")
            index = self._participant_index(rnd, caller)
            if self.config.mode is Mode.ON_CHAIN:
                if rnd.order is None:
                    raise PhaseViolation("reveal order must be stored first")
                position = rnd.order.permutation.index(index)
                earlier = rnd.order.permutation[:position]
                if any(rnd.s[j] is None for j in earlier):
                    raise NotYourTurn("an earlier position has not revealed yet")
            if rnd.s[index] is not None:
                raise Replayed("secret already submitted")
            anchored = rnd.co[index]
            assert anchored is not None
            if self._keccak(value) != anchored:
                raise CommitmentMismatch("hash of value does not match the inner commitment")
            self._mark_seen(caller, round_id, rnd.attempt, "s")
            rnd.s[index] = value
            self._write()
            if all(v is not None for v in rnd.s):
                return self._finalize(rnd)
            return None
        return self._call("submitS", caller, round_id, op)

    # ------------------------------------------------------------ dispute entry

    def request_to_submit_cv(self, caller: bytes, round_id: int,
                             accused: list[int],
                             known_cvs: dict[int, bytes],
                             signatures: dict[int, RecoverableSignature]) -> None:
        def op() -> None:
            if self.config.mode is not Mode.HYBRID:
                raise PhaseViolation("disputes exist only in hybrid mode")
            if caller != self.config.leader:
                raise NotLeader("only the leader opens disputes")
            rnd = self._current(round_id)
            if rnd.phase is not Phase.OFF_CHAIN:
                raise PhaseViolation(f"phase is {rnd.phase.value}")
            if self.now <= rnd.off_chain_deadline:
                raise TooEarly("the off-chain phase has not timed out yet")
            n = len(rnd.participants)
            accused_set = frozenset(accused)
            if not accused_set or any(i < 0 or i >= n for i in accused_set):
                raise InvalidCall("accused indices invalid")
            if accused_set & set(known_cvs):
                raise InvalidCall("an index cannot be both accused and supplied")
            if accused_set | set(known_cvs) != set(range(n)):
                raise SignatureRequired("every participant needs signed data or an accusation")
            for i, value in sorted(known_cvs.items()):
                if rnd.cv[i] is not None:
                    if rnd.cv[i] != value:
                        raise SignatureRequired("supplied value contradicts anchored data")
                    continue
                digest = self._typed_digest(round_id, rnd.attempt, value)
                self._verify_signature(digest, signatures.get(i),
                                       rnd.participants[i], SignatureRequired)
            for i, value in sorted(known_cvs.items()):
                if rnd.cv[i] is None:
                    self._mark_seen(rnd.participants[i], round_id, rnd.attempt, "cv")
                    rnd.cv[i] = value
                    self._write()
            rnd.phase = Phase.CV_WINDOW
            rnd.phase_entered = self.now
            rnd.dispute_kind = "cv"
            rnd.accused = accused_set
            rnd.window_deadline = self.now + self.config.on_chain_submission_period
            self._write(2)
        return self._call("requestToSubmitCv", caller, round_id, op)

    def request_to_submit_co(self, caller: bytes, round_id: int,
                             known_cos: dict[int, bytes],
                             accused_cvs: dict[int, bytes],
                             signatures: dict[int, RecoverableSignature]) -> None:
        def op() -> None:
            if self.config.mode is not Mode.HYBRID:
                raise PhaseViolation("disputes exist only in hybrid mode")
            if caller != self.config.leader:
                raise NotLeader("only the leader opens disputes")
            rnd = self._current(round_id)
            if rnd.phase is not Phase.ROOT_SUBMITTED:
                raise PhaseViolation(f"phase is {rnd.phase.value}")
            if self.now <= rnd.phase_entered + self.config.off_chain_phase_timeout:
                raise TooEarly("the off-chain reveal phase has not timed out yet")
            n = len(rnd.participants)
            accused_set = frozenset(accused_cvs)
            if not accused_set:
                raise InvalidCall("no participant is accused")
            if accused_set & set(known_cos):
                raise InvalidCall("an index cannot be both accused and supplied")
            if accused_set | set(known_cos) != set(range(n)):
                raise SignatureRequired("every participant needs data or an accusation")
            outers: list[bytes] = [b""] * n
            for i, inner in known_cos.items():
                outers[i] = self._keccak(inner)
            for i, cv in accused_cvs.items():
                outers[i] = cv
            assert rnd.merkle_root is not None
            if not self._check_root(outers, rnd.merkle_root):
                raise RootMismatch("commitment set does not reconstruct the stored root")
            for i in range(n):
                if rnd.cv[i] is None:
                    digest = self._typed_digest(round_id, rnd.attempt, outers[i])
                    self._verify_signature(digest, signatures.get(i),
                                           rnd.participants[i], SignatureRequired)
            for i in range(n):
                if rnd.cv[i] is None:
                    self._mark_seen(rnd.participants[i], round_id, rnd.attempt, "cv")
                    rnd.cv[i] = outers[i]
                    self._write()
            for i, inner in sorted(known_cos.items()):
                if rnd.co[i] is None:
                    self._mark_seen(rnd.participants[i], round_id, rnd.attempt, "co")
                    rnd.co[i] = inner
                    self._write()
            rnd.phase = Phase.CO_WINDOW
            rnd.phase_entered = self.now
            rnd.dispute_kind = "co"
            rnd.accused = accused_set
            rnd.window_deadline = self.now + self.config.on_chain_submission_period
            self._write(2)
        return self._call("requestToSubmitCo", caller, round_id, op)

    def request_to_submit_s(self, caller: bytes, round_id: int,
                            inners: list[bytes],
                            known_secrets: dict[int, bytes],
                            signatures: list[RecoverableSignature | None],
                            order: RevealOrder) -> None:
        def op() -> None:
            if self.config.mode is not Mode.HYBRID:
                raise PhaseViolation("disputes exist only in hybrid mode")
            if caller != self.config.leader:
                raise NotLeader("only the leader opens disputes")
            rnd = self._current(round_id)
            if rnd.phase is not Phase.ROOT_SUBMITTED:
                raise PhaseViolation(f"phase is {rnd.phase.value}")
            if self.now <= rnd.phase_entered + self.config.off_chain_phase_timeout:
                raise TooEarly("the off-chain reveal phase has not timed out yet")
            n = len(rnd.participants)
            if len(inners) != n or len(signatures) != n:
                raise RootMismatch("submission arity does not match the participant set")
            outers = [self._keccak(inner) for inner in inners]
            for i, outer in enumerate(outers):
                if rnd.cv[i] is not None and rnd.cv[i] != outer:
                    raise CommitmentMismatch(
                        f"inner commitment {i} contradicts anchored data")
            assert rnd.merkle_root is not None
            if not self._check_root(outers, rnd.merkle_root):
                raise RootMismatch("commitment set does not reconstruct the stored root")
            for i, outer in enumerate(outers):
                if rnd.cv[i] is None:
                    digest = self._typed_digest(round_id, rnd.attempt, outer)
                    self._verify_signature(digest, signatures[i],
                                           rnd.participants[i], SignatureRequired)
            self._validate_reqs_order(inners, outers, order)
            for i, secret in sorted(known_secrets.items()):
                if i < 0 or i >= n:
                    raise InvalidCall("secret index out of range")
                if self._keccak(secret) != inners[i]:
                    raise CommitmentMismatch(f"secret {i} does not open its commitment")
            accused_set = frozenset(range(n)) - frozenset(known_secrets)
            if not accused_set:
                raise InvalidCall("all secrets supplied; generate instead of requesting")
            for i in range(n):
                if rnd.cv[i] is None:
                    self._mark_seen(rnd.participants[i], round_id, rnd.attempt, "cv")
                    rnd.cv[i] = outers[i]
                    self._write()
                if rnd.co[i] is None:
                    self._mark_seen(rnd.participants[i], round_id, rnd.attempt, "co")
                    rnd.co[i] = inners[i]
                    self._write()
            for i, secret in sorted(known_secrets.items()):
                self._mark_seen(rnd.participants[i], round_id, rnd.attempt, "s")
                rnd.s[i] = secret
                self._write()
            rnd.order = order
            rnd.phase = Phase.S_WINDOW
            rnd.phase_entered = self.now
            rnd.dispute_kind = "s"
            rnd.accused = accused_set
            rnd.window_deadline = self.now + self.config.on_chain_submission_period
            self._write(3)
        return self._call("requestToSubmitS", caller, round_id, op)

    def _validate_reqs_order(self, inners: list[bytes], outers: list[bytes],
                             order: RevealOrder) -> None:
        n = len(inners)
        omega_v = self._keccak(b"".join(inners))
        self.meter.bump("keccakInvocations", n)
        keys = beacon_math.order_keys(omega_v, outers)
        if (not beacon_math.verify_order(order)
                or len(order.permutation) != n
                or any(order.keys[j] != keys[order.permutation[j]] for j in range(n))):
            raise OrderInvalid("order is not the descending-key order for this round")

    # ------------------------------------------------------------ failure paths

    def _require_active_caller(self, caller: bytes) -> None:
        record = self.operators.get(caller)
        if record is None or not record.active:
            raise InvalidCall("caller must be an active operator")

    def _fail_window(self, name: str, caller: bytes, round_id: int,
                     phase: Phase, dispute: str, values_of) -> None:
        def op() -> None:
            self._require_active_caller(caller)
            rnd = self._current(round_id)
            if rnd.phase is not phase:
                raise PhaseViolation(f"phase is {rnd.phase.value}, not {phase.value}")
            if self.config.mode is Mode.HYBRID and rnd.dispute_kind != dispute:
                raise PhaseViolation("no matching dispute window is open")
            if self.now <= rnd.window_deadline:
                raise TooEarly("the submission window has not expired yet")
            values = values_of(rnd)
            if self.config.mode is Mode.HYBRID:
                silent = [i for i in sorted(rnd.accused) if values[i] is None]
            else:
                silent = [i for i in range(len(rnd.participants)) if values[i] is None]
            if not silent:
                raise InvalidCall("nothing is missing; the window was satisfied")
            slashed = [rnd.participants[i] for i in silent]
            self._slash(slashed, leader_bonus=True)
            rnd.dispute_kind = None
            rnd.accused = frozenset()
            if self.active_count() < self.config.min_operators:
                self._halt(rnd)
            else:
                self._start_attempt(rnd, rnd.attempt + 1)
        return self._call(name, caller, round_id, op)

    def fail_to_submit_cv(self, caller: bytes, round_id: int) -> None:
        return self._fail_window("failToSubmitCv", caller, round_id,
                                 Phase.CV_WINDOW, "cv", lambda rnd: rnd.cv)

    def fail_to_submit_co(self, caller: bytes, round_id: int) -> None:
        return self._fail_window("failToSubmitCo", caller, round_id,
                                 Phase.CO_WINDOW, "co", lambda rnd: rnd.co)

    def fail_to_submit_s(self, caller: bytes, round_id: int) -> None:
        return self._fail_window("failToSubmitS", caller, round_id,
                                 Phase.S_WINDOW, "s", lambda rnd: rnd.s)

    def fail_to_request_s_or_generate_random_number(self, caller: bytes, round_id: int) -> None:
        def op() -> None:
            if self.config.mode is not Mode.HYBRID:
                raise PhaseViolation("leader duties exist only in hybrid mode")
            self._require_active_caller(caller)
            rnd = self._current(round_id)
            if rnd.phase not in (Phase.OFF_CHAIN, Phase.ROOT_SUBMITTED):
                raise PhaseViolation(f"no pending leader duty in phase {rnd.phase.value}")
            if self.now <= rnd.leader_deadline:
                raise TooEarly("the leader's deadline has not expired yet")
            self._slash([self.config.leader], leader_bonus=False)
            self._halt(rnd)
        return self._call("failToRequestSOrGenerateRandomNumber", caller, round_id, op)

    # ------------------------------------------------------------ halt recovery

    def resume(self, caller: bytes, replenish_deposit: int) -> None:
        def op() -> dict:
            if caller != self.config.leader:
                raise NotLeader("only the designated leader resumes")
            if not self.halted:
                raise NotHalted("protocol is not halted")
            if replenish_deposit < 0:
                raise InvalidCall("replenishment must be non-negative")
            record = self.operators.get(caller)
            if record is None:
                raise InvalidCall("leader was never activated")
            if record.deposit + replenish_deposit < self.config.minimum_deposit:
                raise InsufficientDeposit("leader deposit would stay below the minimum")
            prospective = self.active_count() + (0 if record.active else 1)
            if prospective < self.config.min_operators:
                raise NotEnoughOperators("too few operators to resume service")
            self.external_in += replenish_deposit
            record.deposit += replenish_deposit
            if not record.active:
                record.active = True
                record.reward_debt = self.acc_per_operator
            self.halted = False
            self._write(3)
            if self.current_round_id is not None:
                rnd = self.rounds[self.current_round_id]
                assert rnd.phase is Phase.HALTED
                self._start_attempt(rnd, rnd.attempt + 1)
            else:
                self._promote_next()
            return {"externalIn": replenish_deposit}
        return self._call("resume", caller, None, op)

    def refund(self, consumer: bytes, round_id: int) -> int:
        def op() -> dict:
            if not self.halted:
                raise NotHalted("refunds are available only while halted")
            rnd = self.round(round_id)
            if rnd.consumer != consumer:
                raise NotYourRequest("request belongs to another consumer")
            if rnd.phase is Phase.FINALIZED:
                raise AlreadyProcessed("round already delivered an output")
            if rnd.phase is Phase.REFUNDED:
                raise AlreadyRefunded("round already refunded")
            fee = self.escrow.pop(round_id, 0)
            self.external_out += fee
            rnd.phase = Phase.REFUNDED
            rnd.dispute_kind = None
            rnd.accused = frozenset()
            if self.current_round_id == round_id:
                self.current_round_id = None
            self._write(2)
            return {"__return__": fee, "externalOut": fee, "phase": "Refunded"}
        return self._call("refund", consumer, round_id, op)

    # ------------------------------------------------------------------- export

    def snapshot(self) -> dict:
        """JSON-ready state dump for debugging."""
        return {
            "tick": self.now,
            "halted": self.halted,
            "mode": self.config.mode.value,
            "operators": [
                {
                    "address": _hex(op.address),
                    "deposit": op.deposit,
                    "active": op.active,
                    "activationIndex": op.activation_index,
                    "pendingReward": (self.acc_per_operator - op.reward_debt) if op.active else 0,
                }
                for op in sorted(self.operators.values(), key=lambda o: o.activation_index)
            ],
            "balances": {_hex(a): v for a, v in sorted(self.balances.items())},
            "escrow": {str(k): v for k, v in sorted(self.escrow.items())},
            "dustPool": self.dust_pool,
            "currentRound": self.current_round_id,
            "rounds": {
                str(rid): {
                    "attempt": rnd.attempt,
                    "phase": rnd.phase.value,
                    "consumer": _hex(rnd.consumer),
                    "fee": rnd.fee,
                    "output": rnd.output.hex() if rnd.output else None,
                }
                for rid, rnd in sorted(self.rounds.items())
            },
            "meter": self.meter.snapshot(),
            "seenEntries": len(self.seen),
        }
