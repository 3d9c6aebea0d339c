"""Leader and operator behaviors driving the ledger through off-chain exchange.

Actors are deterministic state machines stepped by the simulation engine.
Fault policies drop designated messages on a round's first attempt and stay
silent in the matching on-chain window, so every shipped fault scenario ends
in either compelled compliance or a slash followed by a clean retry. Policies
never raise out of a step; rejected ledger calls are already recorded in the
transcript and are swallowed here.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from . import beacon_math, crypto, merkle
from .crypto import RecoverableSignature
from .keccak import keccak256
from .ledger import Ledger, LedgerError, Mode, Phase, Round


class OperatorPolicy(enum.Enum):
    HONEST = "honest"
    WITHHOLD_CV_OFF_CHAIN = "withhold-cv-off-chain"
    WITHHOLD_CO_OFF_CHAIN = "withhold-co-off-chain"
    WITHHOLD_S_OFF_CHAIN = "withhold-s-off-chain"
    NEVER_SUBMIT_ON_CHAIN = "never-submit-on-chain"
    LATE_ON_CHAIN_GRIEFER = "late-on-chain-griefer"


class LeaderPolicy(enum.Enum):
    HONEST = "honest"
    WITHHOLD_MERKLE_ROOT = "withhold-merkle-root"
    WITHHOLD_GENERATE = "withhold-generate"
    SUBMIT_WRONG_ROOT = "submit-wrong-root"


class Kind(enum.Enum):
    COMMIT_CV = "CommitCv"
    REVEAL_CO = "RevealCo"
    REVEAL_S = "RevealS"
    ORDER_ANNOUNCEMENT = "OrderAnnouncement"


@dataclass(frozen=True)
class Message:
    kind: Kind
    sender: bytes
    round: int
    attempt: int
    payload: object
    signature: RecoverableSignature | None = None


class Context:
    """Per-step view the engine hands to an actor."""

    def __init__(self, now: int, ledger: Ledger, send) -> None:
        self.now = now
        self.ledger = ledger
        self.send = send  # send(recipient_address, Message)


_REJECTED = object()  # sentinel: the ledger refused the call


def _guarded(fn, *args, **kwargs):
    """Issue a ledger call; rejections are already in the transcript."""
    try:
        return fn(*args, **kwargs)
    except LedgerError:
        return _REJECTED


class OperatorActor:
    """One operator: commits, reveals on its turn, answers windows per policy."""

    def __init__(self, address: bytes, privkey: int, policy: OperatorPolicy,
                 rng: random.Random, deposit: int) -> None:
        self.address = address
        self.privkey = privkey
        self.policy = policy
        self.rng = rng
        self.deposit = deposit
        self.inbox: list[Message] = []
        self.chains: dict[tuple[int, int], crypto.CommitmentChain] = {}
        self.sent: set[tuple[int, int, Kind]] = set()
        self.reveal_due: dict[tuple[int, int], int] = {}
        self.sent_offchain: list[Message] = []  # outbound log, used by tests

    # ------------------------------------------------------------------ policy

    def _withholds(self, kind: Kind, attempt: int) -> bool:
        if self.policy is OperatorPolicy.NEVER_SUBMIT_ON_CHAIN:
            return True  # crash-silent: no messages, no transactions
        if self.policy is OperatorPolicy.LATE_ON_CHAIN_GRIEFER:
            return kind is Kind.REVEAL_S  # commits and opens off-chain, griefs the reveal
        if attempt > 0:
            return False  # faults are one-shot; retries run clean
        return (
            (self.policy is OperatorPolicy.WITHHOLD_CV_OFF_CHAIN and kind is Kind.COMMIT_CV)
            or (self.policy is OperatorPolicy.WITHHOLD_CO_OFF_CHAIN and kind is Kind.REVEAL_CO)
            or (self.policy is OperatorPolicy.WITHHOLD_S_OFF_CHAIN and kind is Kind.REVEAL_S)
        )

    def _answers_window(self, kind: str, attempt: int) -> bool:
        if self.policy is OperatorPolicy.NEVER_SUBMIT_ON_CHAIN:
            return False
        if self.policy is OperatorPolicy.LATE_ON_CHAIN_GRIEFER:
            return True  # complies, but at the last in-window tick
        if attempt > 0:
            return True
        mapped = {
            "cv": OperatorPolicy.WITHHOLD_CV_OFF_CHAIN,
            "co": OperatorPolicy.WITHHOLD_CO_OFF_CHAIN,
            "s": OperatorPolicy.WITHHOLD_S_OFF_CHAIN,
        }
        return self.policy is not mapped[kind]

    def _late(self) -> bool:
        return self.policy is OperatorPolicy.LATE_ON_CHAIN_GRIEFER

    # ----------------------------------------------------------------- helpers

    def chain_for(self, round_id: int, attempt: int) -> crypto.CommitmentChain:
        key = (round_id, attempt)
        if key not in self.chains:
            self.chains[key] = crypto.derive_chain(self.rng.getrandbits(256).to_bytes(32, "big"))
        return self.chains[key]

    def _sign_commit(self, ledger: Ledger, round_id: int, attempt: int, cv: bytes):
        msg = crypto.TypedMessage(
            chain_id=ledger.config.chain_id, ver_contract=ledger.config.ver_contract,
            round=round_id, attempt_id=attempt, cv=cv,
        )
        digest = crypto.typed_digest(msg, ledger.config.domain_name, ledger.config.domain_version)
        return crypto.sign(digest, self.privkey)

    def _send(self, ctx: Context, leader: bytes, message: Message) -> None:
        self.sent_offchain.append(message)
        ctx.send(leader, message)

    # -------------------------------------------------------------------- step

    def step(self, ctx: Context) -> None:
        ledger = ctx.ledger
        self._maybe_rejoin(ctx)
        rid = ledger.current_round_id
        rnd = ledger.rounds[rid] if rid is not None else None
        for message in self.inbox:
            self._on_message(ctx, message, rnd)
        self.inbox.clear()
        if rnd is None:
            return
        index = rnd.index_of(self.address)
        if index is None:
            return
        if ledger.config.mode is Mode.HYBRID:
            self._step_hybrid(ctx, rnd, index)
        else:
            self._step_on_chain(ctx, rnd, index)
        self._police_windows(ctx, rnd)

    def _maybe_rejoin(self, ctx: Context) -> None:
        # A slashed operator restores service during a halt by re-depositing.
        if not ctx.ledger.halted or self.policy is OperatorPolicy.NEVER_SUBMIT_ON_CHAIN:
            return
        record = ctx.ledger.operators.get(self.address)
        if record is not None and not record.active:
            _guarded(ctx.ledger.deposit_and_activate, self.address, self.deposit)

    def _on_message(self, ctx: Context, message: Message, rnd: Round | None) -> None:
        if message.kind is not Kind.ORDER_ANNOUNCEMENT:
            return
        if rnd is None or (message.round, message.attempt) != (rnd.round_id, rnd.attempt):
            return
        index = rnd.index_of(self.address)
        if index is None:
            return
        inners: list[bytes] = message.payload  # type: ignore[assignment]
        chain = self.chains.get((rnd.round_id, rnd.attempt))
        if chain is None or len(inners) != len(rnd.participants) or inners[index] != chain.inner:
            return  # inconsistent announcement; an honest leader never sends one
        order = beacon_math.reveal_order(
            beacon_math.order_keys(beacon_math.omega_v(inners),
                                   [keccak256(inner) for inner in inners]))
        position = order.permutation.index(index)
        # one reveal slot per tick, counted from receipt of the announcement
        self.reveal_due[(rnd.round_id, rnd.attempt)] = ctx.now + position

    def _step_hybrid(self, ctx: Context, rnd: Round, index: int) -> None:
        leader = ctx.ledger.config.leader
        if self.address == leader:
            return  # the leader's participant duties live in LeaderActor
        key = (rnd.round_id, rnd.attempt)
        chain = self.chain_for(rnd.round_id, rnd.attempt)
        if rnd.phase is Phase.OFF_CHAIN:
            if (rnd.round_id, rnd.attempt, Kind.COMMIT_CV) not in self.sent \
                    and not self._withholds(Kind.COMMIT_CV, rnd.attempt):
                sig = self._sign_commit(ctx.ledger, rnd.round_id, rnd.attempt, chain.outer)
                self._send(ctx, leader, Message(Kind.COMMIT_CV, self.address,
                                                rnd.round_id, rnd.attempt, chain.outer, sig))
                self.sent.add((rnd.round_id, rnd.attempt, Kind.COMMIT_CV))
        elif rnd.phase is Phase.ROOT_SUBMITTED:
            if (rnd.round_id, rnd.attempt, Kind.REVEAL_CO) not in self.sent \
                    and not self._withholds(Kind.REVEAL_CO, rnd.attempt):
                self._send(ctx, leader, Message(Kind.REVEAL_CO, self.address,
                                                rnd.round_id, rnd.attempt, chain.inner))
                self.sent.add((rnd.round_id, rnd.attempt, Kind.REVEAL_CO))
            due = self.reveal_due.get(key)
            if due is not None and ctx.now >= due \
                    and (rnd.round_id, rnd.attempt, Kind.REVEAL_S) not in self.sent \
                    and not self._withholds(Kind.REVEAL_S, rnd.attempt):
                self._send(ctx, leader, Message(Kind.REVEAL_S, self.address,
                                                rnd.round_id, rnd.attempt, chain.secret))
                self.sent.add((rnd.round_id, rnd.attempt, Kind.REVEAL_S))
        elif rnd.dispute_kind is not None and index in rnd.accused:
            self._answer_dispute(ctx, rnd, index, chain)

    def _answer_dispute(self, ctx: Context, rnd: Round, index: int,
                        chain: crypto.CommitmentChain) -> None:
        if not self._answers_window(rnd.dispute_kind, rnd.attempt):
            return
        when = rnd.window_deadline if self._late() else ctx.now
        if ctx.now < when or ctx.now > rnd.window_deadline:
            return
        if rnd.dispute_kind == "cv" and rnd.cv[index] is None:
            _guarded(ctx.ledger.submit_cv, self.address, rnd.round_id, chain.outer)
        elif rnd.dispute_kind == "co" and rnd.co[index] is None:
            _guarded(ctx.ledger.submit_co, self.address, rnd.round_id, chain.inner)
        elif rnd.dispute_kind == "s" and rnd.s[index] is None:
            _guarded(ctx.ledger.submit_s, self.address, rnd.round_id, chain.secret)

    def _step_on_chain(self, ctx: Context, rnd: Round, index: int) -> None:
        if self.policy is OperatorPolicy.NEVER_SUBMIT_ON_CHAIN:
            return
        chain = self.chain_for(rnd.round_id, rnd.attempt)
        late = self._late()
        if rnd.phase is Phase.CV_WINDOW and rnd.cv[index] is None:
            if self._withholds(Kind.COMMIT_CV, rnd.attempt):
                return
            if not late or ctx.now >= rnd.window_deadline:
                _guarded(ctx.ledger.submit_cv, self.address, rnd.round_id, chain.outer)
        elif rnd.phase is Phase.CO_WINDOW and rnd.co[index] is None:
            if self._withholds(Kind.REVEAL_CO, rnd.attempt):
                return
            if not late or ctx.now >= rnd.window_deadline:
                _guarded(ctx.ledger.submit_co, self.address, rnd.round_id, chain.inner)
        elif rnd.phase is Phase.S_WINDOW:
            if rnd.order is None:
                if all(v is not None for v in rnd.co):
                    order = beacon_math.reveal_order(
                        beacon_math.order_keys(
                            beacon_math.omega_v([v for v in rnd.co]),  # type: ignore[list-item]
                            [v for v in rnd.cv]))  # type: ignore[list-item]
                    # position zero stores the order; others step in if it stalls
                    first = order.permutation[0]
                    if index == first or ctx.now >= rnd.phase_entered + 2:
                        _guarded(ctx.ledger.submit_reveal_order, self.address,
                                 rnd.round_id, order)
                if rnd.order is None:
                    return
            if rnd.s[index] is not None:
                return
            if self.policy is OperatorPolicy.WITHHOLD_S_OFF_CHAIN and rnd.attempt == 0:
                return
            position = rnd.order.permutation.index(index)
            if any(rnd.s[j] is None for j in rnd.order.permutation[:position]):
                return
            _guarded(ctx.ledger.submit_s, self.address, rnd.round_id, chain.secret)

    def _police_windows(self, ctx: Context, rnd: Round) -> None:
        # Anyone still active may trigger expiry paths; the griefer never
        # transacts beyond its single compelled submission.
        if self.policy in (OperatorPolicy.NEVER_SUBMIT_ON_CHAIN,
                           OperatorPolicy.LATE_ON_CHAIN_GRIEFER):
            return
        record = ctx.ledger.operators.get(self.address)
        if record is None or not record.active:
            return
        ledger = ctx.ledger
        if rnd.phase in (Phase.OFF_CHAIN, Phase.ROOT_SUBMITTED) \
                and ledger.config.mode is Mode.HYBRID and ctx.now > rnd.leader_deadline:
            _guarded(ledger.fail_to_request_s_or_generate_random_number,
                     self.address, rnd.round_id)
            return
        if ctx.now <= rnd.window_deadline:
            return
        if rnd.phase is Phase.CV_WINDOW and self._window_unmet(ledger, rnd, rnd.cv):
            _guarded(ledger.fail_to_submit_cv, self.address, rnd.round_id)
        elif rnd.phase is Phase.CO_WINDOW and self._window_unmet(ledger, rnd, rnd.co):
            _guarded(ledger.fail_to_submit_co, self.address, rnd.round_id)
        elif rnd.phase is Phase.S_WINDOW and self._window_unmet(ledger, rnd, rnd.s):
            _guarded(ledger.fail_to_submit_s, self.address, rnd.round_id)

    @staticmethod
    def _window_unmet(ledger: Ledger, rnd: Round, values: list) -> bool:
        if ledger.config.mode is Mode.HYBRID:
            return any(values[i] is None for i in rnd.accused)
        return any(v is None for v in values)


@dataclass
class _LeaderRoundState:
    chain: crypto.CommitmentChain
    own_signature: RecoverableSignature
    cvs: dict[int, bytes] = field(default_factory=dict)
    sigs: dict[int, RecoverableSignature] = field(default_factory=dict)
    cos: dict[int, bytes] = field(default_factory=dict)
    secrets: dict[int, bytes] = field(default_factory=dict)
    announced_at: int | None = None
    own_reveal_due: int | None = None
    generate_failed: bool = False
    escalation_failed: bool = False


class LeaderActor:
    """The coordinating operator: collects, aggregates, escalates, recovers."""

    def __init__(self, address: bytes, privkey: int, policy: LeaderPolicy,
                 rng: random.Random, deposit: int) -> None:
        self.address = address
        self.privkey = privkey
        self.policy = policy
        self.rng = rng
        self.deposit = deposit
        self.inbox: list[Message] = []
        self.state: dict[tuple[int, int], _LeaderRoundState] = {}
        self.broadcast_log: list[Message] = []

    def _faulty(self, what: LeaderPolicy, attempt: int) -> bool:
        return self.policy is what and attempt == 0

    def _round_state(self, ctx: Context, rnd: Round) -> _LeaderRoundState:
        key = (rnd.round_id, rnd.attempt)
        if key not in self.state:
            chain = crypto.derive_chain(self.rng.getrandbits(256).to_bytes(32, "big"))
            msg = crypto.TypedMessage(
                chain_id=ctx.ledger.config.chain_id,
                ver_contract=ctx.ledger.config.ver_contract,
                round=rnd.round_id, attempt_id=rnd.attempt, cv=chain.outer,
            )
            digest = crypto.typed_digest(msg, ctx.ledger.config.domain_name,
                                         ctx.ledger.config.domain_version)
            state = _LeaderRoundState(chain=chain,
                                      own_signature=crypto.sign(digest, self.privkey))
            index = rnd.index_of(self.address)
            if index is not None:
                state.cvs[index] = chain.outer
                state.sigs[index] = state.own_signature
                state.cos[index] = chain.inner
            self.state[key] = state
        return self.state[key]

    def step(self, ctx: Context) -> None:
        ledger = ctx.ledger
        if ledger.halted:
            self._recover(ctx)
            return
        rid = ledger.current_round_id
        if rid is None:
            self.inbox.clear()
            return
        rnd = ledger.rounds[rid]
        state = self._round_state(ctx, rnd)
        self._collect(ctx, rnd, state)
        if rnd.phase is Phase.OFF_CHAIN:
            self._drive_commit(ctx, rnd, state)
        elif rnd.phase is Phase.ROOT_SUBMITTED:
            self._drive_reveals(ctx, rnd, state)
        elif rnd.dispute_kind is not None and ctx.now > rnd.window_deadline:
            self._expire_window(ctx, rnd)

    def _recover(self, ctx: Context) -> None:
        self.inbox.clear()
        record = ctx.ledger.operators.get(self.address)
        if record is None:
            return
        missing = max(0, ctx.ledger.config.minimum_deposit - record.deposit)
        prospective = ctx.ledger.active_count() + (0 if record.active else 1)
        if prospective >= ctx.ledger.config.min_operators:
            _guarded(ctx.ledger.resume, self.address, missing)

    def _collect(self, ctx: Context, rnd: Round, state: _LeaderRoundState) -> None:
        for message in self.inbox:
            if (message.round, message.attempt) != (rnd.round_id, rnd.attempt):
                continue
            index = rnd.index_of(message.sender)
            if index is None:
                continue
            if message.kind is Kind.COMMIT_CV:
                # only signed commitments are usable later; unsigned ones are noise
                if message.signature is None or not isinstance(message.payload, bytes):
                    continue
                msg = crypto.TypedMessage(
                    chain_id=ctx.ledger.config.chain_id,
                    ver_contract=ctx.ledger.config.ver_contract,
                    round=rnd.round_id, attempt_id=rnd.attempt, cv=message.payload,
                )
                digest = crypto.typed_digest(msg, ctx.ledger.config.domain_name,
                                             ctx.ledger.config.domain_version)
                try:
                    signer = crypto.recover(digest, message.signature)
                except crypto.InvalidSignature:
                    continue
                if signer != message.sender:
                    continue
                state.cvs[index] = message.payload
                state.sigs[index] = message.signature
            elif message.kind is Kind.REVEAL_CO:
                # an unverifiable reveal counts as withholding
                if state.cvs.get(index) == keccak256(message.payload):
                    state.cos[index] = message.payload
            elif message.kind is Kind.REVEAL_S:
                if state.cos.get(index) == keccak256(message.payload):
                    state.secrets[index] = message.payload
        self.inbox.clear()
        # the leader reveals to itself once its own slot in the order arrives
        if state.own_reveal_due is not None and ctx.now >= state.own_reveal_due:
            index = rnd.index_of(self.address)
            if index is not None:
                state.secrets[index] = state.chain.secret

    def _drive_commit(self, ctx: Context, rnd: Round, state: _LeaderRoundState) -> None:
        n = len(rnd.participants)
        for i in range(n):  # fold in anything compelled on-chain earlier
            if rnd.cv[i] is not None:
                state.cvs.setdefault(i, rnd.cv[i])
        if len(state.cvs) == n:
            if self._faulty(LeaderPolicy.WITHHOLD_MERKLE_ROOT, rnd.attempt):
                return
            if self._faulty(LeaderPolicy.SUBMIT_WRONG_ROOT, rnd.attempt):
                root = keccak256(b"not the commitment tree")
            else:
                root = merkle.merkle_root([state.cvs[i] for i in range(n)])
            _guarded(ctx.ledger.submit_merkle_root, self.address, rnd.round_id, root)
        elif ctx.now > rnd.off_chain_deadline:
            accused = sorted(set(range(n)) - set(state.cvs))
            known = {i: state.cvs[i] for i in state.cvs}
            sigs = {i: state.sigs[i] for i in state.cvs if i in state.sigs}
            _guarded(ctx.ledger.request_to_submit_cv, self.address, rnd.round_id,
                     accused, known, sigs)

    def _drive_reveals(self, ctx: Context, rnd: Round, state: _LeaderRoundState) -> None:
        n = len(rnd.participants)
        for i in range(n):
            if rnd.co[i] is not None:
                state.cos.setdefault(i, rnd.co[i])
            if rnd.cv[i] is not None:
                state.cvs.setdefault(i, rnd.cv[i])
        if len(state.cos) == n and state.announced_at is None:
            inners = [state.cos[i] for i in range(n)]
            announcement = Message(Kind.ORDER_ANNOUNCEMENT, self.address,
                                   rnd.round_id, rnd.attempt, inners)
            for addr in rnd.participants:
                if addr != self.address:
                    ctx.send(addr, announcement)
            self.broadcast_log.append(announcement)
            state.announced_at = ctx.now
            index = rnd.index_of(self.address)
            if index is not None:
                order = beacon_math.reveal_order(
                    beacon_math.order_keys(beacon_math.omega_v(inners),
                                           [keccak256(v) for v in inners]))
                # own slot, as if the announcement took one hop to arrive
                state.own_reveal_due = ctx.now + 1 + order.permutation.index(index)
        if len(state.secrets) == n:
            if self._faulty(LeaderPolicy.WITHHOLD_GENERATE, rnd.attempt) or state.generate_failed:
                return
            secrets = [state.secrets[i] for i in range(n)]
            signatures: list[RecoverableSignature | None] = [
                None if rnd.cv[i] is not None else state.sigs.get(i) for i in range(n)
            ]
            result = _guarded(ctx.ledger.generate_random_number, self.address,
                              rnd.round_id, secrets, signatures)
            if result is _REJECTED:
                state.generate_failed = True  # a wrong root cannot be fixed this attempt
            return
        if state.escalation_failed:
            return  # a rejected escalation cannot pass this attempt (bad root)
        if len(state.cos) < n and ctx.now > rnd.phase_entered + ctx.ledger.config.off_chain_phase_timeout:
            known = dict(state.cos)
            accused = {i: state.cvs[i] for i in range(n) if i not in state.cos}
            sigs = {i: sig for i, sig in state.sigs.items()}
            if _guarded(ctx.ledger.request_to_submit_co, self.address, rnd.round_id,
                        known, accused, sigs) is _REJECTED:
                state.escalation_failed = True
            return
        if len(state.cos) == n and state.announced_at is not None:
            gate = max(rnd.phase_entered + ctx.ledger.config.off_chain_phase_timeout,
                       state.announced_at + n + 2)
            if ctx.now > gate:
                inners = [state.cos[i] for i in range(n)]
                order = beacon_math.reveal_order(
                    beacon_math.order_keys(beacon_math.omega_v(inners),
                                           [keccak256(v) for v in inners]))
                signatures = [None if rnd.cv[i] is not None else state.sigs.get(i)
                              for i in range(n)]
                if _guarded(ctx.ledger.request_to_submit_s, self.address, rnd.round_id,
                            inners, dict(state.secrets), signatures, order) is _REJECTED:
                    state.escalation_failed = True

    def _expire_window(self, ctx: Context, rnd: Round) -> None:
        if rnd.dispute_kind == "cv" and any(rnd.cv[i] is None for i in rnd.accused):
            _guarded(ctx.ledger.fail_to_submit_cv, self.address, rnd.round_id)
        elif rnd.dispute_kind == "co" and any(rnd.co[i] is None for i in rnd.accused):
            _guarded(ctx.ledger.fail_to_submit_co, self.address, rnd.round_id)
        elif rnd.dispute_kind == "s" and any(rnd.s[i] is None for i in rnd.accused):
            _guarded(ctx.ledger.fail_to_submit_s, self.address, rnd.round_id)
