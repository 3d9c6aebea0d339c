"""Statistical validation of the beacon's output distribution and aggregation
of cost-meter sweeps into affine fits.

The statistical probes evaluate the round arithmetic pipeline directly with
seeded fresh secrets: signatures and ledger plumbing cannot influence the
output value, and desk-scale sample counts need millions of hashes, not
millions of signature verifications.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from . import beacon_math


class NotEnoughPoints(Exception):
    pass


def _fresh_secrets(rng: random.Random, n: int) -> list[bytes]:
    return [rng.getrandbits(256).to_bytes(32, "big") for _ in range(n)]


@dataclass(frozen=True)
class BitBiasReport:
    per_bit_frequency: tuple[float, ...]  # 256 empirical means
    sample_count: int
    max_deviation: float  # largest |mean - 0.5|

    def within(self, tolerance: float) -> bool:
        return self.max_deviation <= tolerance


def bias_test(rounds: int, n: int, seed: int) -> BitBiasReport:
    """Empirical per-bit means of the output over honest rounds."""
    if rounds < 1:
        raise NotEnoughPoints("at least one round is required")
    rng = random.Random(seed)
    ones = [0] * 256
    for _ in range(rounds):
        output = beacon_math.run_round(_fresh_secrets(rng, n)).omega_o
        value = int.from_bytes(output, "big")
        for bit in range(256):
            ones[bit] += (value >> bit) & 1
    freqs = tuple(count / rounds for count in ones)
    return BitBiasReport(
        per_bit_frequency=freqs,
        sample_count=rounds,
        max_deviation=max(abs(f - 0.5) for f in freqs),
    )


@dataclass(frozen=True)
class PositionReport:
    """Row r, column p: frequency of operator r landing at reveal position p."""

    matrix: tuple[tuple[float, ...], ...]
    sample_count: int

    def max_cell_deviation(self) -> float:
        n = len(self.matrix)
        return max(abs(cell - 1.0 / n) for row in self.matrix for cell in row)


def position_matrix(rounds: int, n: int, seed: int) -> PositionReport:
    """Operator-by-position occupancy frequencies over honest rounds."""
    rng = random.Random(seed)
    counts = [[0] * n for _ in range(n)]
    for _ in range(rounds):
        order = beacon_math.run_round(_fresh_secrets(rng, n)).order
        for position, operator in enumerate(order.permutation):
            counts[operator][position] += 1
    return PositionReport(
        matrix=tuple(tuple(c / rounds for c in row) for row in counts),
        sample_count=rounds,
    )


def last_position_test(rounds: int, n: int, adversary_size: int, seed: int = 0) -> float:
    """Frequency with which any of the first adversary_size operators reveals last."""
    if not 0 <= adversary_size < n:
        raise ValueError("adversary size must be in [0, n)")
    if adversary_size == 0:
        return 0.0
    rng = random.Random(seed)
    hits = 0
    for _ in range(rounds):
        order = beacon_math.run_round(_fresh_secrets(rng, n)).order
        if order.permutation[-1] < adversary_size:
            hits += 1
    return hits / rounds


@dataclass(frozen=True)
class GrindReport:
    frequency: float
    expected: float  # 1 - (1 - 1/n)^budget
    trials: int
    budget: int


def grind_resistance_probe(trials: int, n: int, adversary_index: int,
                           budget: int, seed: int = 0) -> GrindReport:
    """Last-position frequency when one operator may resample its secret up to
    budget times before commitments seal, keeping the first winning candidate.

    Every resample reshuffles all order keys, so each candidate is an
    independent 1/n shot; grinding buys nothing once commitments are sealed.
    """
    if not 0 <= adversary_index < n:
        raise ValueError("adversary index out of range")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = random.Random(seed)
    hits = 0
    for _ in range(trials):
        secrets = _fresh_secrets(rng, n)
        for _ in range(budget):
            secrets[adversary_index] = rng.getrandbits(256).to_bytes(32, "big")
            order = beacon_math.run_round(secrets).order
            if order.permutation[-1] == adversary_index:
                hits += 1
                break
    return GrindReport(
        frequency=hits / trials,
        expected=1.0 - (1.0 - 1.0 / n) ** budget,
        trials=trials,
        budget=budget,
    )


@dataclass(frozen=True)
class AffineFit:
    slope: float
    intercept: float
    r_squared: float
    exact: bool  # all second differences vanished; fit is exact in integers


def _fit_counter(ns: list[int], ys: list[int]) -> AffineFit:
    # exact path: integer second differences of an affine sequence are zero
    slopes = {Fraction(ys[i + 1] - ys[i], ns[i + 1] - ns[i]) for i in range(len(ns) - 1)}
    if len(slopes) == 1:
        slope = slopes.pop()
        intercept = Fraction(ys[0]) - slope * ns[0]
        return AffineFit(float(slope), float(intercept), 1.0, True)
    mean_n = sum(ns) / len(ns)
    mean_y = sum(ys) / len(ys)
    sxx = sum((x - mean_n) ** 2 for x in ns)
    sxy = sum((x - mean_n) * (y - mean_y) for x, y in zip(ns, ys))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_n
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(ns, ys))
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return AffineFit(slope, intercept, r_squared, False)


def cost_report(sweep_rows: list[dict]) -> dict[str, AffineFit]:
    """Least-squares affine fit of each counter against the operator count."""
    if len(sweep_rows) < 3:
        raise NotEnoughPoints("need at least 3 sweep points")
    rows = sorted(sweep_rows, key=lambda r: r["n"])
    ns = [row["n"] for row in rows]
    if len(set(ns)) != len(ns):
        raise NotEnoughPoints("duplicate operator counts in sweep")
    counters = [key for key in rows[0] if key != "n"]
    return {
        counter: _fit_counter(ns, [row[counter] for row in rows])
        for counter in counters
    }
