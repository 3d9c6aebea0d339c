"""Statistical probes and cost fits at module-test scale; the acceptance suite
re-runs the heavy versions at their stated tolerances."""

import math

import pytest

from commitreveal2 import analysis
from commitreveal2.actors import OperatorPolicy
from commitreveal2.analysis import NotEnoughPoints
from commitreveal2.ledger import CommitmentMismatch, Mode
from commitreveal2.simulator import ScenarioScript, sweep
from conftest import CONSUMER, make_harness


class TestBiasTest:
    def test_single_round_is_degenerate(self):
        report = analysis.bias_test(rounds=1, n=3, seed=4)
        assert all(f in (0.0, 1.0) for f in report.per_bit_frequency)
        assert report.sample_count == 1

    def test_fixed_seed_reproducible(self):
        a = analysis.bias_test(rounds=200, n=3, seed=5)
        b = analysis.bias_test(rounds=200, n=3, seed=5)
        assert a == b

    def test_moderate_sample_within_loose_bound(self):
        report = analysis.bias_test(rounds=2_000, n=3, seed=6)
        assert report.max_deviation < 0.05
        assert report.within(0.05)

    def test_zero_rounds_rejected(self):
        with pytest.raises(NotEnoughPoints):
            analysis.bias_test(rounds=0, n=3, seed=0)


class TestPositions:
    def test_matrix_rows_and_columns_sum_to_one(self):
        report = analysis.position_matrix(rounds=1_000, n=4, seed=7)
        for row in report.matrix:
            assert math.isclose(sum(row), 1.0, abs_tol=1e-9)
        for col in range(4):
            assert math.isclose(sum(row[col] for row in report.matrix), 1.0, abs_tol=1e-9)

    def test_matrix_doubly_stochastic_at_scale(self):
        report = analysis.position_matrix(rounds=10_000, n=8, seed=12)
        assert report.max_cell_deviation() <= 0.02

    def test_last_position_small_sample(self):
        freq = analysis.last_position_test(rounds=3_000, n=5, adversary_size=1, seed=8)
        assert abs(freq - 0.2) < 0.04

    def test_nearly_full_adversary(self):
        freq = analysis.last_position_test(rounds=3_000, n=5, adversary_size=4, seed=9)
        assert abs(freq - 0.8) < 0.04

    def test_empty_adversary_is_exactly_zero(self):
        assert analysis.last_position_test(rounds=100, n=5, adversary_size=0, seed=1) == 0.0

    def test_bad_adversary_size_rejected(self):
        with pytest.raises(ValueError):
            analysis.last_position_test(rounds=10, n=3, adversary_size=3)


class TestGrindProbe:
    def test_single_candidate_is_baseline(self):
        report = analysis.grind_resistance_probe(trials=3_000, n=4,
                                                 adversary_index=0, budget=1, seed=10)
        assert abs(report.frequency - 0.25) < 0.04
        assert report.expected == pytest.approx(0.25)

    def test_budget_eight_matches_closed_form(self):
        report = analysis.grind_resistance_probe(trials=3_000, n=4,
                                                 adversary_index=2, budget=8, seed=11)
        assert report.expected == pytest.approx(1 - (3 / 4) ** 8)
        assert abs(report.frequency - report.expected) < 0.05

    def test_post_commit_resampling_rejected_by_ledger(self):
        # once the outer commitment is on chain, a reground secret cannot open it
        h = make_harness(2, mode=Mode.ON_CHAIN)
        rid = h.ledger.request_random_number(CONSUMER, 1)
        secrets = h.fresh_secrets()
        chains = h.chains(secrets)
        for i, addr in enumerate(h.addrs):
            h.ledger.submit_cv(addr, rid, chains[i].outer)
        reground = h.chains(h.fresh_secrets())
        with pytest.raises(CommitmentMismatch):
            h.ledger.submit_co(h.addrs[0], rid, reground[0].inner)
        # the honest value still passes
        h.ledger.submit_co(h.addrs[0], rid, chains[0].inner)


class TestCostReport:
    def test_exact_affine_detected(self):
        rows = [{"n": n, "sig": 2 * n - 1, "flat": 2} for n in (3, 5, 9, 12)]
        fits = analysis.cost_report(rows)
        assert fits["sig"].exact and fits["sig"].r_squared == 1.0
        assert fits["sig"].slope == 2.0 and fits["sig"].intercept == -1.0
        assert fits["flat"].slope == 0.0 and fits["flat"].intercept == 2.0
        assert fits["flat"].r_squared == 1.0

    def test_noisy_data_fits_least_squares(self):
        rows = [{"n": 1, "y": 1}, {"n": 2, "y": 3}, {"n": 3, "y": 4}]
        fit = analysis.cost_report(rows)["y"]
        assert not fit.exact
        assert fit.slope == pytest.approx(1.5)
        assert 0.9 < fit.r_squared < 1.0

    def test_too_few_points_rejected(self):
        with pytest.raises(NotEnoughPoints):
            analysis.cost_report([{"n": 3, "y": 1}, {"n": 4, "y": 2}])
        with pytest.raises(NotEnoughPoints):
            analysis.cost_report([{"n": 3, "y": 1}, {"n": 3, "y": 1}, {"n": 4, "y": 2}])

    def test_pw_sweep_signature_fit_is_exactly_affine(self):
        template = ScenarioScript(
            seed=7, operator_count=3,
            operator_policies={1: OperatorPolicy.WITHHOLD_S_OFF_CHAIN})
        fits = analysis.cost_report(sweep(template, [3, 5, 8, 11]))
        sig = fits["signatureVerifications"]
        assert sig.exact and sig.r_squared == 1.0 and sig.slope == 2.0

    def test_baseline_transactions_fit(self):
        fits = analysis.cost_report(sweep(ScenarioScript(seed=7), [2, 5, 9]))
        tx = fits["transactions"]
        assert tx.slope == 0.0 and tx.intercept == 2.0 and tx.r_squared == 1.0
