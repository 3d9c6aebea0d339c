"""Actor behaviors observed through scenario transcripts: who says what
off-chain, who escalates, who gets slashed, and who never does."""

from commitreveal2.actors import Kind, LeaderPolicy, OperatorPolicy
from commitreveal2.ledger import Mode, Phase
from commitreveal2.simulator import Engine, ScenarioScript, run


def _engine(script: ScenarioScript) -> Engine:
    engine = Engine(script)
    engine.run()
    return engine


class TestHonestBehavior:
    def test_one_signed_commit_message_per_operator(self):
        engine = _engine(ScenarioScript(seed=5, operator_count=4))
        for actor in engine.actors[1:]:
            commits = [m for m in actor.sent_offchain if m.kind is Kind.COMMIT_CV]
            assert len(commits) == 1
            assert commits[0].signature is not None

    def test_all_honest_route_is_two_calls_per_round(self):
        result = run(ScenarioScript(seed=6, operator_count=5, rounds=3))
        for rid in result.round_ids:
            assert result.transcript.route(rid) == [
                "submitMerkleRoot", "generateRandomNumber"]

    def test_honest_leader_never_rejected(self):
        engine = _engine(ScenarioScript(seed=7, operator_count=6, rounds=2))
        leader_calls = [e for e in engine.transcript.calls()
                        if e.caller == "0x" + engine.actors[0].address.hex()]
        assert leader_calls and all(e.result == "ok" for e in leader_calls)


class TestWithholdingOperators:
    def test_withheld_s_escalates_via_request(self):
        script = ScenarioScript(
            seed=8, operator_count=5,
            operator_policies={2: OperatorPolicy.WITHHOLD_S_OFF_CHAIN})
        engine = _engine(script)
        names = [e.name for e in engine.transcript.calls(successful_only=True)]
        assert "requestToSubmitS" in names and "failToSubmitS" in names
        withholder = engine.actors[2]
        assert not any(m.kind is Kind.REVEAL_S for m in withholder.sent_offchain)
        assert not engine.ledger.operators[withholder.address].active
        # every escalation an honest leader issues passes ledger validation
        leader_hex = "0x" + engine.actors[0].address.hex()
        leader_results = {e.result for e in engine.transcript.calls()
                          if e.caller == leader_hex}
        assert leader_results == {"ok"}

    def test_withheld_cv_escalates_via_cv_request(self):
        script = ScenarioScript(
            seed=9, operator_count=4,
            operator_policies={1: OperatorPolicy.WITHHOLD_CV_OFF_CHAIN})
        engine = _engine(script)
        names = [e.name for e in engine.transcript.calls(successful_only=True)]
        assert "requestToSubmitCv" in names and "failToSubmitCv" in names
        assert engine.ledger.rounds[0].phase is Phase.FINALIZED

    def test_withheld_co_escalates_via_co_request(self):
        script = ScenarioScript(
            seed=10, operator_count=4,
            operator_policies={3: OperatorPolicy.WITHHOLD_CO_OFF_CHAIN})
        engine = _engine(script)
        names = [e.name for e in engine.transcript.calls(successful_only=True)]
        assert "requestToSubmitCo" in names and "failToSubmitCo" in names
        assert engine.ledger.rounds[0].phase is Phase.FINALIZED

    def test_never_submit_operator_ends_slashed_and_deactivated(self):
        script = ScenarioScript(
            seed=11, operator_count=4,
            operator_policies={1: OperatorPolicy.NEVER_SUBMIT_ON_CHAIN})
        engine = _engine(script)
        record = engine.ledger.operators[engine.actors[1].address]
        assert not record.active and record.deposit == 0
        assert engine.ledger.rounds[0].phase is Phase.FINALIZED


class TestGriefer:
    def test_griefer_profile(self):
        script = ScenarioScript(
            seed=12, operator_count=4,
            operator_policies={2: OperatorPolicy.LATE_ON_CHAIN_GRIEFER})
        engine = _engine(script)
        griefer = engine.actors[2]
        # zero off-chain reveal-2 messages, but commit and reveal-1 flow normally
        assert not any(m.kind is Kind.REVEAL_S for m in griefer.sent_offchain)
        assert any(m.kind is Kind.COMMIT_CV for m in griefer.sent_offchain)
        assert any(m.kind is Kind.REVEAL_CO for m in griefer.sent_offchain)
        # exactly one ledger call after genesis setup: the in-window submission
        griefer_hex = "0x" + griefer.address.hex()
        calls = [e for e in engine.transcript.calls()
                 if e.caller == griefer_hex and e.name != "depositAndActivate"]
        assert [e.name for e in calls] == ["submitS"]
        assert calls[0].result == "ok"
        # never slashed: deposit intact, still active
        record = engine.ledger.operators[griefer.address]
        assert record.active and record.deposit == script.minimum_deposit
        slashes = [e for e in engine.transcript.events if e.name == "slashed"]
        assert slashes == []

    def test_griefer_submits_at_window_deadline(self):
        script = ScenarioScript(
            seed=13, operator_count=3,
            operator_policies={1: OperatorPolicy.LATE_ON_CHAIN_GRIEFER})
        engine = _engine(script)
        request = next(e for e in engine.transcript.calls(successful_only=True)
                       if e.name == "requestToSubmitS")
        submit = next(e for e in engine.transcript.calls(successful_only=True)
                      if e.name == "submitS")
        window = script.on_chain_submission_period
        assert submit.tick == request.tick + window  # the last in-window tick


class TestLeaderFaults:
    def test_withhold_root_variant(self):
        script = ScenarioScript(seed=14, operator_count=4,
                                leader_policy=LeaderPolicy.WITHHOLD_MERKLE_ROOT)
        result = run(script)
        assert result.transcript.route(0) == [
            "failToRequestSOrGenerateRandomNumber", "resume",
            "submitMerkleRoot", "generateRandomNumber"]

    def test_wrong_root_ends_in_leader_slash_then_recovery(self):
        script = ScenarioScript(seed=15, operator_count=4,
                                leader_policy=LeaderPolicy.SUBMIT_WRONG_ROOT)
        engine = _engine(script)
        assert engine.transcript.route(0) == [
            "submitMerkleRoot", "failToRequestSOrGenerateRandomNumber",
            "resume", "submitMerkleRoot", "generateRandomNumber"]
        rejected = [e for e in engine.transcript.calls()
                    if e.name == "generateRandomNumber" and e.result == "RootMismatch"]
        assert len(rejected) == 1
        slashes = [e for e in engine.transcript.events if e.name == "slashed"]
        assert len(slashes) == 1
        assert engine.ledger.rounds[0].phase is Phase.FINALIZED

    def test_withhold_generate_slash_split_is_equal_only(self):
        script = ScenarioScript(seed=16, operator_count=5,
                                leader_policy=LeaderPolicy.WITHHOLD_GENERATE)
        engine = _engine(script)
        # four compliant operators split the slashed deposit with no bonus
        assert engine.ledger.acc_per_operator == script.minimum_deposit // 4
        leader = engine.actors[0].address
        assert engine.ledger.balances.get(leader, 0) == 100  # round fee only


class TestOnChainActors:
    def test_on_chain_honest_round_finalizes(self):
        result = run(ScenarioScript(seed=17, operator_count=4, mode=Mode.ON_CHAIN))
        assert result.ledger.rounds[0].phase is Phase.FINALIZED
        names = [e.name for e in result.transcript.calls(successful_only=True)]
        assert names.count("submitCv") == 4
        assert names.count("submitRevealOrder") == 1

    def test_on_chain_silent_operator_slashed_and_round_recovers(self):
        script = ScenarioScript(
            seed=18, operator_count=4, mode=Mode.ON_CHAIN,
            operator_policies={2: OperatorPolicy.NEVER_SUBMIT_ON_CHAIN})
        result = run(script)
        assert result.ledger.rounds[0].phase is Phase.FINALIZED
        assert result.ledger.rounds[0].attempt == 1
        names = [e.name for e in result.transcript.calls(successful_only=True)]
        assert "failToSubmitCv" in names
