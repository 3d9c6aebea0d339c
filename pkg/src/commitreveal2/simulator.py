"""Deterministic discrete-event engine: logical clock, message delivery,
scenario scripting, and route assertions.

One simulation is single-threaded and wall-clock free; identical scripts and
seeds produce byte-identical transcripts. Actor keys, per-actor RNG streams,
and the consumer address all derive from the scenario seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace

from . import secp256k1
from .actors import Context, LeaderActor, LeaderPolicy, Message, OperatorActor, OperatorPolicy
from .crypto import address_from_private_key
from .keccak import keccak256
from .ledger import Ledger, LedgerConfig, LedgerError, Mode, Phase
from .transcript import Transcript


class InvalidScenario(Exception):
    pass


class LivenessTimeout(Exception):
    """The tick budget ran out before every round reached a terminal phase."""


class RouteMismatch(AssertionError):
    pass


DEFAULT_TICK_BUDGET = 100_000

# relative weights when a single scalar cost is needed (griefing asymmetry);
# loosely modeled on typical chain pricing, exact values are not load-bearing
WORK_WEIGHTS = {
    "transactions": 21_000,
    "signatureVerifications": 3_000,
    "keccakInvocations": 36,
    "storageWrites": 5_000,
    "merkleLeavesHashed": 36,
}


def weighted_work(meter: dict[str, int]) -> int:
    return sum(WORK_WEIGHTS[name] * count for name, count in meter.items())


@dataclass(frozen=True)
class ScenarioScript:
    name: str = "scenario"
    seed: int = 0
    mode: Mode = Mode.HYBRID
    operator_count: int = 2
    rounds: int = 1
    fee: int = 100
    minimum_deposit: int = 1_000
    leader_policy: LeaderPolicy = LeaderPolicy.HONEST
    operator_policies: dict[int, OperatorPolicy] = field(default_factory=dict)
    off_chain_phase_timeout: int = 10
    merkle_root_submission_period: int = 10
    on_chain_submission_period: int = 10
    request_or_generate_period: int = 10
    message_latency: int = 1
    consumer_refunds_on_halt: bool = False
    chain_id: int = 1
    last_revealer_reward_num: int = 0
    last_revealer_reward_den: int = 1
    expected_route: tuple[str, ...] | None = None
    tick_budget: int = DEFAULT_TICK_BUDGET

    def __post_init__(self):
        if self.operator_count < 2:
            raise InvalidScenario("scenarios need at least 2 operators")
        if self.rounds < 1:
            raise InvalidScenario("scenarios run at least one round")
        if any(i < 0 or i >= self.operator_count for i in self.operator_policies):
            raise InvalidScenario("operator policy index out of range")
        if 0 in self.operator_policies:
            raise InvalidScenario("index 0 is the leader; use leaderPolicy")

    def policy_of(self, index: int) -> OperatorPolicy:
        return self.operator_policies.get(index, OperatorPolicy.HONEST)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioScript":
        try:
            policies = {int(k): OperatorPolicy(v)
                        for k, v in raw.get("operatorPolicies", {}).items()}
            timing = raw.get("timing", {})
            return cls(
                name=raw.get("name", "scenario"),
                seed=int(raw.get("seed", 0)),
                mode=Mode(raw.get("mode", "Hybrid")),
                operator_count=int(raw["operatorCount"]),
                rounds=int(raw.get("rounds", 1)),
                fee=int(raw.get("fee", 100)),
                minimum_deposit=int(raw.get("minimumDeposit", 1_000)),
                leader_policy=LeaderPolicy(raw.get("leaderPolicy", "honest")),
                operator_policies=policies,
                off_chain_phase_timeout=int(timing.get("offChainPhaseTimeout", 10)),
                merkle_root_submission_period=int(timing.get("merkleRootSubmissionPeriod", 10)),
                on_chain_submission_period=int(timing.get("onChainSubmissionPeriod", 10)),
                request_or_generate_period=int(timing.get("requestOrGeneratePeriod", 10)),
                message_latency=int(timing.get("messageLatency", 1)),
                consumer_refunds_on_halt=bool(raw.get("consumerRefundsOnHalt", False)),
                chain_id=int(raw.get("chainId", 1)),
                last_revealer_reward_num=int(raw.get("lastRevealerRewardNum", 0)),
                last_revealer_reward_den=int(raw.get("lastRevealerRewardDen", 1)),
                expected_route=(tuple(raw["expectedRoute"])
                                if raw.get("expectedRoute") is not None else None),
                tick_budget=int(raw.get("tickBudget", DEFAULT_TICK_BUDGET)),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidScenario(f"bad scenario document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioScript":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidScenario(f"scenario is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "mode": self.mode.value,
            "operatorCount": self.operator_count,
            "rounds": self.rounds,
            "fee": self.fee,
            "minimumDeposit": self.minimum_deposit,
            "leaderPolicy": self.leader_policy.value,
            "operatorPolicies": {str(k): v.value
                                 for k, v in sorted(self.operator_policies.items())},
            "timing": {
                "offChainPhaseTimeout": self.off_chain_phase_timeout,
                "merkleRootSubmissionPeriod": self.merkle_root_submission_period,
                "onChainSubmissionPeriod": self.on_chain_submission_period,
                "requestOrGeneratePeriod": self.request_or_generate_period,
                "messageLatency": self.message_latency,
            },
            "consumerRefundsOnHalt": self.consumer_refunds_on_halt,
            "chainId": self.chain_id,
            "lastRevealerRewardNum": self.last_revealer_reward_num,
            "lastRevealerRewardDen": self.last_revealer_reward_den,
            "expectedRoute": list(self.expected_route) if self.expected_route else None,
            "tickBudget": self.tick_budget,
        }

    def with_operator_count(self, n: int) -> "ScenarioScript":
        return replace(self, operator_count=n)


def _derive_key(seed: int, label: bytes, index: int) -> int:
    material = keccak256(seed.to_bytes(8, "big") + label + index.to_bytes(4, "big"))
    return int.from_bytes(material, "big") % (secp256k1.N - 1) + 1


@dataclass
class SimulationResult:
    script: ScenarioScript
    transcript: Transcript
    ledger: Ledger
    round_ids: list[int]

    def routes(self) -> dict[int, list[str]]:
        return {rid: self.transcript.route(rid) for rid in self.round_ids}

    def outputs(self) -> dict[int, bytes]:
        return dict(self.transcript.final_outputs)


class Engine:
    """Runs one scenario to completion."""

    def __init__(self, script: ScenarioScript) -> None:
        self.script = script
        self.transcript = Transcript()
        leader_priv = _derive_key(script.seed, b"operator-key", 0)
        leader_addr = address_from_private_key(leader_priv)
        config = LedgerConfig(
            leader=leader_addr,
            mode=script.mode,
            chain_id=script.chain_id,
            minimum_deposit=script.minimum_deposit,
            off_chain_phase_timeout=script.off_chain_phase_timeout,
            merkle_root_submission_period=script.merkle_root_submission_period,
            on_chain_submission_period=script.on_chain_submission_period,
            request_or_generate_period=script.request_or_generate_period,
            last_revealer_reward_num=script.last_revealer_reward_num,
            last_revealer_reward_den=script.last_revealer_reward_den,
        )
        self.ledger = Ledger(config, transcript=self.transcript)
        self.consumer = keccak256(script.seed.to_bytes(8, "big") + b"consumer")[12:]
        self.actors = []
        self.address_book = {}
        for i in range(script.operator_count):
            priv = leader_priv if i == 0 else _derive_key(script.seed, b"operator-key", i)
            addr = address_from_private_key(priv)
            rng = random.Random(_derive_key(script.seed, b"actor-rng", i))
            if i == 0 and script.mode is Mode.HYBRID:
                actor = LeaderActor(addr, priv, script.leader_policy, rng,
                                    deposit=script.minimum_deposit)
            else:
                actor = OperatorActor(addr, priv, script.policy_of(i) if i else OperatorPolicy.HONEST,
                                      rng, deposit=script.minimum_deposit)
            self.actors.append(actor)
            self.address_book[addr] = actor
        self.mailbag: list[tuple[int, int, bytes, Message]] = []  # (deliver_at, seq, to, msg)
        self._msg_seq = 0
        self.round_ids: list[int] = []
        self._refunded: set[int] = set()

    def _send(self, recipient: bytes, message: Message) -> None:
        deliver_at = self.ledger.now + self.script.message_latency
        self.mailbag.append((deliver_at, self._msg_seq, recipient, message))
        self._msg_seq += 1
        self.transcript.append(
            self.ledger.now, "message", message.kind.value,
            caller="0x" + message.sender.hex(),
            round=message.round, attempt=message.attempt,
            info={"to": "0x" + recipient.hex(), "deliverAt": deliver_at},
        )

    def _deliver_due(self, now: int) -> None:
        due = [m for m in self.mailbag if m[0] <= now]
        if not due:
            return
        self.mailbag = [m for m in self.mailbag if m[0] > now]
        for _, _, recipient, message in sorted(due, key=lambda m: (m[0], m[1])):
            actor = self.address_book.get(recipient)
            if actor is not None:
                actor.inbox.append(message)

    def _drive_consumer(self) -> None:
        ledger = self.ledger
        if self.script.consumer_refunds_on_halt and ledger.halted:
            for rid in self.round_ids:
                if rid in self._refunded:
                    continue
                if ledger.rounds[rid].phase not in (Phase.FINALIZED, Phase.REFUNDED):
                    try:
                        ledger.refund(self.consumer, rid)
                        self._refunded.add(rid)
                    except LedgerError:
                        pass
        if ledger.halted or len(self.round_ids) >= self.script.rounds:
            return
        if all(ledger.rounds[rid].phase in (Phase.FINALIZED, Phase.REFUNDED)
               for rid in self.round_ids):
            try:
                rid = ledger.request_random_number(self.consumer, self.script.fee)
                self.round_ids.append(rid)
            except LedgerError:
                pass

    def _finished(self) -> bool:
        if len(self.round_ids) < self.script.rounds:
            return False
        return all(self.ledger.rounds[rid].phase in (Phase.FINALIZED, Phase.REFUNDED)
                   for rid in self.round_ids)

    def run(self) -> SimulationResult:
        for actor in self.actors:  # genesis activation in actor order
            self.ledger.deposit_and_activate(actor.address, self.script.minimum_deposit)
        for tick in range(self.script.tick_budget):
            self.ledger.set_time(tick)
            self._deliver_due(tick)
            self._drive_consumer()
            ctx = Context(tick, self.ledger, self._send)
            for actor in self.actors:
                actor.step(ctx)
            if self._finished():
                break
        else:
            raise LivenessTimeout(
                f"scenario {self.script.name!r} did not settle in {self.script.tick_budget} ticks")
        result = SimulationResult(self.script, self.transcript, self.ledger, self.round_ids)
        if self.script.expected_route is not None:
            for rid in self.round_ids:
                got = tuple(self.transcript.route(rid))
                if got != self.script.expected_route:
                    raise RouteMismatch(
                        f"round {rid}: route {list(got)} != expected {list(self.script.expected_route)}")
        return result


def run(script: ScenarioScript) -> SimulationResult:
    """Execute a scenario; raises RouteMismatch if an expected route is violated."""
    return Engine(script).run()


def sweep(template: ScenarioScript, n_values: list[int]) -> list[dict]:
    """Run the template at each operator count with the same seed derivation.

    Returns one row per n: {"n": n, <counter>: route-total, ...} aggregated over
    the scenario's first round service calls.
    """
    rows = []
    for n in n_values:
        result = run(template.with_operator_count(n))
        meter = result.transcript.route_meter(result.round_ids[0])
        row = {"n": n}
        for counter in sorted(WORK_WEIGHTS):
            row[counter] = meter.get(counter, 0)
        rows.append(row)
    return rows


@dataclass(frozen=True)
class GriefingReport:
    n: int
    leader_meter: dict[str, int]
    griefer_meter: dict[str, int]
    leader_work: int
    griefer_work: int

    @property
    def ratio(self) -> float:
        return self.leader_work / self.griefer_work


def griefing_report(script: ScenarioScript) -> GriefingReport:
    """Leader-vs-griefer cost asymmetry for a single-griefer scenario."""
    griefers = [i for i in range(script.operator_count)
                if i > 0 and script.policy_of(i) is OperatorPolicy.LATE_ON_CHAIN_GRIEFER]
    if len(griefers) != 1:
        raise InvalidScenario("griefing analysis needs exactly one late-on-chain griefer")
    engine = Engine(script)
    result = engine.run()
    griefer_addr = "0x" + engine.actors[griefers[0]].address.hex()
    leader_meter = griefer_meter = None
    for event in result.transcript.calls(successful_only=True):
        if event.name == "requestToSubmitS" and leader_meter is None:
            leader_meter = event.meter or {}
        if event.name == "submitS" and event.caller == griefer_addr:
            griefer_meter = event.meter or {}
    if leader_meter is None or griefer_meter is None:
        raise InvalidScenario("scenario did not take the griefing route")
    return GriefingReport(
        n=script.operator_count,
        leader_meter=leader_meter,
        griefer_meter=griefer_meter,
        leader_work=weighted_work(leader_meter),
        griefer_work=weighted_work(griefer_meter),
    )
