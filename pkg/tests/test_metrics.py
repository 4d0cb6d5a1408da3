"""Metric primitives: accuracy, deltas, votes, rank correlation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfeval.errors import NumericalError, ParameterError
from selfeval.metrics import (
    TaskResult,
    VoteTally,
    accuracy,
    chance_delta,
    spearman_rho,
    votes_from_predictions,
)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 100.0

    def test_none_correct(self):
        assert accuracy([1, 1, 1], [2, 2, 2]) == 0.0

    def test_504_of_1000(self):
        preds = [0] * 504 + [1] * 496
        labels = [0] * 504 + [0] * 496
        assert accuracy(preds, labels) == pytest.approx(50.4)

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            accuracy([1], [1, 2])

    def test_empty(self):
        with pytest.raises(ParameterError):
            accuracy([], [])


class TestTaskResultAndDelta:
    def test_paper_fixture_color(self):
        r = TaskResult.from_accuracies("color", [85.2], 25.0, [1])
        assert chance_delta(r) == pytest.approx(60.2)

    def test_delta_zero_at_chance(self):
        r = TaskResult.from_accuracies("color", [25.0, 25.0], 25.0, [1, 2])
        assert chance_delta(r) == 0.0

    def test_below_chance_representable(self):
        r = TaskResult.from_accuracies("count", [22.8], 25.0, [1])
        assert chance_delta(r) == pytest.approx(-2.2)

    def test_delta_consistency_enforced(self):
        with pytest.raises(ParameterError):
            TaskResult(
                task="color", accuracy_mean_pct=50.0, accuracy_std_pct=0.0,
                chance_pct=25.0, delta_pct=10.0, seeds=(1,),
            )

    def test_std_over_repeats(self):
        r = TaskResult.from_accuracies("color", [50.0, 52.0, 54.0], 25.0, [1, 2, 3])
        assert r.accuracy_mean_pct == pytest.approx(52.0)
        assert r.accuracy_std_pct == pytest.approx(2.0)

    def test_chance_range_validated(self):
        r = TaskResult.from_accuracies("color", [50.0], 0.0, [1])
        with pytest.raises(ParameterError):
            chance_delta(r)


class TestVotes:
    def test_a_always_right(self):
        tally = votes_from_predictions([1, 1, 1], [0, 0, 0], [1, 1, 1])
        assert tally == VoteTally(only_a=3, only_b=0, both=0, neither=0)

    def test_identical_predictions(self):
        tally = votes_from_predictions([1, 0], [1, 0], [1, 1])
        assert tally.only_a == 0 and tally.only_b == 0
        assert tally.both == 1 and tally.neither == 1

    def test_random_fixture_matches_recount(self):
        """Independent brute-force recount oracle."""
        rng = np.random.default_rng(42)
        preds_a = rng.integers(0, 4, size=100).tolist()
        preds_b = rng.integers(0, 4, size=100).tolist()
        correct = rng.integers(0, 4, size=100).tolist()
        tally = votes_from_predictions(preds_a, preds_b, correct)
        only_a = only_b = both = neither = 0
        for i in range(100):
            ha = preds_a[i] == correct[i]
            hb = preds_b[i] == correct[i]
            only_a += ha and not hb
            only_b += hb and not ha
            both += ha and hb
            neither += (not ha) and (not hb)
        assert (tally.only_a, tally.only_b, tally.both, tally.neither) == (
            only_a, only_b, both, neither,
        )
        assert tally.total == 100

    def test_votes_accuracy_consistency(self):
        rng = np.random.default_rng(7)
        preds_a = rng.integers(0, 3, size=60).tolist()
        preds_b = rng.integers(0, 3, size=60).tolist()
        correct = rng.integers(0, 3, size=60).tolist()
        tally = votes_from_predictions(preds_a, preds_b, correct)
        acc_a = accuracy(preds_a, correct)
        assert tally.only_a + tally.both == round(acc_a / 100 * 60)

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            votes_from_predictions([1], [1, 2], [1, 2])


def brute_force_spearman(a, b):
    """Independent oracle: explicit rank assignment + fsum Pearson."""
    def ranks(values):
        order = sorted(range(len(values)), key=lambda i: values[i])
        out = [0.0] * len(values)
        i = 0
        while i < len(values):
            j = i
            while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
                j += 1
            avg = (i + j) / 2 + 1
            for k in range(i, j + 1):
                out[order[k]] = avg
            i = j + 1
        return out

    ra, rb = ranks(list(a)), ranks(list(b))
    n = len(ra)
    ma = math.fsum(ra) / n
    mb = math.fsum(rb) / n
    cov = math.fsum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    va = math.fsum((x - ma) ** 2 for x in ra)
    vb = math.fsum((y - mb) ** 2 for y in rb)
    return cov / math.sqrt(va * vb)


class TestSpearman:
    def test_identity_gives_one(self):
        a = [3.0, 1.0, 2.0, 10.0]
        assert spearman_rho(a, a) == pytest.approx(1.0)

    def test_reversed_gives_minus_one(self):
        a = [3.0, 1.0, 2.0, 10.0]
        b = [-x for x in a]
        assert spearman_rho(a, b) == pytest.approx(-1.0)

    def test_tie_handling_hand_case(self):
        a = [1.0, 2.0, 2.0, 4.0]
        b = [1.0, 3.0, 2.0, 4.0]
        assert spearman_rho(a, b) == pytest.approx(
            brute_force_spearman(a, b), abs=1e-12
        )

    def test_thousand_random_vectors_vs_brute_force(self):
        """1000 random vectors including ties, 1e-12 agreement."""
        rng = np.random.default_rng(123)
        for case in range(1000):
            n = int(rng.integers(2, 40))
            if case % 3 == 0:
                a = rng.integers(0, 5, size=n).astype(float)
                b = rng.integers(0, 5, size=n).astype(float)
            else:
                a = rng.normal(size=n)
                b = rng.normal(size=n)
            if np.all(a == a[0]) or np.all(b == b[0]):
                continue
            assert spearman_rho(a, b) == pytest.approx(
                brute_force_spearman(a, b), abs=1e-12
            )

    def test_scipy_cross_check(self):
        from scipy.stats import spearmanr

        rng = np.random.default_rng(5)
        a = rng.integers(0, 6, size=50).astype(float)
        b = rng.integers(0, 6, size=50).astype(float)
        assert spearman_rho(a, b) == pytest.approx(
            spearmanr(a, b).statistic, abs=1e-12
        )

    def test_zero_rank_variance_undefined(self):
        with pytest.raises(NumericalError):
            spearman_rho([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_validation(self):
        with pytest.raises(ParameterError):
            spearman_rho([1.0], [1.0])
        with pytest.raises(ParameterError):
            spearman_rho([1.0, 2.0], [1.0])

    @given(
        data=st.lists(
            st.tuples(
                st.floats(-100, 100, allow_nan=False),
                st.floats(-100, 100, allow_nan=False),
            ),
            min_size=3,
            max_size=30,
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_transform_invariance(self, data):
        """rho is invariant under strictly monotone transforms of inputs.

        Inputs are quantized so the transforms stay strictly monotone in
        float arithmetic (untransformed near-denormals would collapse).
        """
        a = [round(x, 4) for x, _ in data]
        b = [round(y, 4) for _, y in data]
        if len(set(a)) < 2 or len(set(b)) < 2:
            return
        base = spearman_rho(a, b)
        transformed = spearman_rho(
            [3.0 * x + 7.0 for x in a], [y**3 + 2.0 * y for y in b]
        )
        assert transformed == pytest.approx(base, abs=1e-9)
