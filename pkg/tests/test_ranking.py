"""Ranking, tier-assignment, and triage-metric tests with brute-force oracles."""

import numpy as np
import pytest

from floodtriage import (
    TierBoundaries,
    assign_tiers,
    auirc,
    evaluate_triage,
    extent_metrics,
    irr,
    k_at_recall,
    rank,
    recall_dfdr,
    tes,
)
from floodtriage.errors import BadBoundaries, BadCutoff, EmptyTruth
from floodtriage.ranking import sensitivity_sweep

from conftest import make_raster, make_scored


def random_fixture(rng, n_max=40):
    n = int(rng.integers(2, n_max))
    ranked = [make_scored(f"C{i:04d}", severity=float(1.0 - i / n))
              for i in range(n)]
    truth = {sp.property.claim_id for sp in ranked if rng.random() < 0.4}
    if not truth:
        truth = {ranked[0].property.claim_id}
    k = int(rng.integers(0, n + 1))
    return ranked, truth, k


class TestRank:
    def test_descending_severity_with_tiebreaks(self):
        items = [
            make_scored("B", 0.5, confidence=0.2),
            make_scored("A", 0.5, confidence=0.2),
            make_scored("C", 0.5, confidence=0.9),
            make_scored("D", 0.9, confidence=0.1),
        ]
        ordered = [sp.property.claim_id for sp in rank(items)]
        assert ordered == ["D", "C", "A", "B"]


class TestAssignTiers:
    def test_boundaries(self):
        b = TierBoundaries()
        ranked = [
            make_scored("A", 0.41, confidence=0.1),   # tier 1
            make_scored("B", 0.40, confidence=0.1),   # tier 1 (inclusive)
            make_scored("C", 0.30, confidence=0.9),   # tier 2 (mid severity)
            make_scored("D", 0.10, confidence=0.9),   # tier 3
            make_scored("E", 0.10, confidence=0.5),   # tier 2 fallback
        ]
        assert assign_tiers(ranked, b) == [1, 1, 2, 3, 2]

    def test_invalid_boundaries(self):
        with pytest.raises(BadBoundaries):
            TierBoundaries(t1=0.1, t2=0.4)


class TestMetricIdentities:
    def test_against_set_arithmetic_oracle(self, rng):
        import time
        t0 = time.time()
        for _ in range(1000):
            ranked, truth, k = random_fixture(rng)
            n = len(ranked)
            top = {sp.property.claim_id for sp in ranked[:k]}
            hits = len(top & truth)
            assert irr(k, n) == pytest.approx(1 - k / n, abs=1e-12)
            r, d = recall_dfdr(ranked, truth, k)
            assert r == pytest.approx(hits / len(truth), abs=1e-12)
            expect_d = (k - hits) / k if k else 0.0
            assert d == pytest.approx(expect_d, abs=1e-12)
            assert tes(ranked, truth, k) == pytest.approx(
                (1 - k / n) * (hits / len(truth)) * (1 - expect_d), abs=1e-12)
        assert time.time() - t0 < 5.0

    def test_dfdr_at_zero_dispatches(self):
        ranked = [make_scored("A", 0.9)]
        _, d = recall_dfdr(ranked, {"A"}, 0)
        assert d == 0.0

    def test_cutoff_validation(self):
        ranked = [make_scored("A", 0.9)]
        with pytest.raises(BadCutoff):
            recall_dfdr(ranked, {"A"}, 2)
        with pytest.raises(EmptyTruth):
            recall_dfdr(ranked, set(), 1)
        with pytest.raises(BadCutoff):
            irr(5, 4)


class TestKAtRecall:
    def test_minimum_prefix(self):
        ranked = [make_scored(c, 1.0 - i * 0.1) for i, c in enumerate("ABCDE")]
        truth = {"B", "D"}
        assert k_at_recall(ranked, truth, 0.5) == 2  # prefix A,B holds one hit
        assert k_at_recall(ranked, truth, 1.0) == 4
        assert k_at_recall(ranked, truth, 0.0) == 0

    def test_unreachable_returns_n(self):
        ranked = [make_scored("A", 0.9)]
        assert k_at_recall(ranked, {"ZZZ"}, 0.9) == 1


class TestAuirc:
    def test_perfect_oracle_closed_form(self):
        n = 2000
        for p in (0.1, 0.4, 0.8):
            n_high = int(p * n)
            ranked = [make_scored(f"C{i:05d}", 1.0 - i / n, high=i < n_high)
                      for i in range(n)]
            truth = {f"C{i:05d}" for i in range(n_high)}
            got = auirc(ranked, truth)
            assert abs(got - (1 - p / 2)) < 2 / n_high

    def test_inverted_oracle_closed_form(self):
        n = 2000
        for p in (0.1, 0.4, 0.8):
            n_high = int(p * n)
            truth = {f"C{i:05d}" for i in range(n - n_high, n)}
            ranked = [make_scored(f"C{i:05d}", 1.0 - i / n) for i in range(n)]
            got = auirc(ranked, truth)
            assert abs(got - p / 2) < 2 / n_high

    def test_random_scores_average_half(self):
        n = 400
        vals = []
        for seed in range(50):
            rng = np.random.default_rng(seed)
            order = rng.permutation(n)
            ranked = [make_scored(f"C{i:05d}", float(1.0 - r / n))
                      for i, r in zip(order, range(n))]
            truth = {f"C{i:05d}" for i in range(n // 2)}
            vals.append(auirc(ranked, truth))
        assert abs(np.mean(vals) - 0.50) < 0.03


class TestExtentMetrics:
    def test_matches_confusion_oracle(self, rng):
        p = rng.random((16, 16)) < 0.5
        t = rng.random((16, 16)) < 0.5
        m = extent_metrics(make_raster(p), make_raster(t))
        tp = np.sum(p & t)
        fp = np.sum(p & ~t)
        fn = np.sum(~p & t)
        assert m["precision"] == pytest.approx(tp / (tp + fp))
        assert m["recall"] == pytest.approx(tp / (tp + fn))
        assert m["iou"] == pytest.approx(tp / (tp + fp + fn))
        assert m["f1"] == pytest.approx(2 * tp / (2 * tp + fp + fn))

    def test_empty_union_iou_one(self):
        z = make_raster(np.zeros((4, 4), dtype=bool))
        assert extent_metrics(z, z)["iou"] == 1.0


class TestEvaluateTriage:
    def test_bundle_consistent_with_parts(self):
        ranked = [make_scored(f"C{i}", 1.0 - i * 0.05, high=i < 6)
                  for i in range(20)]
        truth = {f"C{i}" for i in range(6)}
        m = evaluate_triage(ranked, truth, recall_levels=(0.9,))
        k_tau = sum(1 for sp in ranked if sp.severity >= 0.40)
        assert m.tes == pytest.approx(tes(ranked, truth, k_tau))
        assert m.auirc == pytest.approx(auirc(ranked, truth))
        k = k_at_recall(ranked, truth, 0.9)
        assert m.irr_at_recall[0.9] == pytest.approx(irr(k, len(ranked)))


class TestSensitivitySweep:
    def test_rows_and_empty_truth_flag(self):
        scored = [make_scored(f"C{i}", 1.0 - i * 0.1) for i in range(8)]
        rows = sensitivity_sweep(
            scored,
            truth_by_theta={1.0: {"C0", "C1"}, 2.0: set()},
            thetas=[1.0, 2.0],
        )
        assert rows[0]["n_high"] == 2 and "auirc" in rows[0]
        assert rows[1]["error"] == "EmptyTruth"
