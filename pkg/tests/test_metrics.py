import itertools

import numpy as np
import pytest

from driveintent.labels import CLASS_ORDER, ManeuverLabel
from driveintent.metrics import confusion, fold_mean_std, metrics_from_confusion


def brute_force_metrics(preds, truths):
    """Independent pair-counting oracle for the whole metric family."""
    total = len(preds)
    per_class = {}
    for c in CLASS_ORDER:
        tp = sum(1 for p, t in zip(preds, truths) if p == c and t == c)
        fp = sum(1 for p, t in zip(preds, truths) if p == c and t != c)
        fn = sum(1 for p, t in zip(preds, truths) if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class[c] = (prec, rec, f1)
    acc = sum(1 for p, t in zip(preds, truths) if p == t) / total
    macro = [np.mean([per_class[c][i] for c in CLASS_ORDER]) for i in range(3)]
    return 100 * acc, 100 * macro[0], 100 * macro[1], 100 * macro[2]


class TestConfusion:
    def test_perfect_diagonal(self):
        labels = [ManeuverLabel.from_index(i % 5) for i in range(20)]
        cm = confusion(labels, labels)
        assert np.trace(cm) == 20 and cm.sum() == 20
        row = metrics_from_confusion(cm)
        assert row.accuracy == row.precision == row.recall == row.f1 == 100.0

    def test_single_off_diagonal(self):
        cm = confusion([ManeuverLabel.RIGHT_TURN], [ManeuverLabel.LEFT_TURN])
        assert cm[ManeuverLabel.LEFT_TURN.index, ManeuverLabel.RIGHT_TURN.index] == 1
        assert np.trace(cm) == 0

    def test_total_preserved(self, rng):
        preds = [ManeuverLabel.from_index(int(i)) for i in rng.integers(0, 5, 100)]
        truths = [ManeuverLabel.from_index(int(i)) for i in rng.integers(0, 5, 100)]
        assert confusion(preds, truths).sum() == 100

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion([ManeuverLabel.LEFT_TURN], [])


class TestMetricFamily:
    def test_hand_example_recall(self):
        # class-0 row [8,2,0,0,0], the 2 land in class 1's column, rest diagonal
        cm = np.diag([8, 10, 10, 10, 10])
        cm[0, 1] = 2
        row = metrics_from_confusion(cm)
        # class-0 recall = 8/10
        tp, fn = 8, 2
        assert tp / (tp + fn) == 0.8
        oracle_recall = 100 * np.mean([0.8, 1.0, 1.0, 1.0, 1.0])
        assert row.recall == pytest.approx(oracle_recall)

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            preds = [ManeuverLabel.from_index(int(i)) for i in rng.integers(0, 5, n)]
            truths = [ManeuverLabel.from_index(int(i)) for i in rng.integers(0, 5, n)]
            row = metrics_from_confusion(confusion(preds, truths))
            acc, prec, rec, f1 = brute_force_metrics(preds, truths)
            assert row.accuracy == pytest.approx(acc, abs=1e-12)
            assert row.precision == pytest.approx(prec, abs=1e-12)
            assert row.recall == pytest.approx(rec, abs=1e-12)
            assert row.f1 == pytest.approx(f1, abs=1e-12)

    def test_accuracy_is_trace_over_total(self, rng):
        cm = rng.integers(0, 9, size=(5, 5))
        cm[0, 0] += 1
        row = metrics_from_confusion(cm)
        assert row.accuracy == pytest.approx(100 * np.trace(cm) / cm.sum())

    def test_f1_harmonic_identity_exhaustive(self):
        # The per-class F1 identity depends only on (TP, FP, FN); exhaust
        # every triple reachable from 5x5 matrices with entries in {0,1,2}
        # (TP in 0..2, FP and FN in 0..8), realized as actual matrices.
        for tp, fp, fn in itertools.product(range(3), range(9), range(9)):
            cm = np.zeros((5, 5), dtype=int)
            cm[0, 0] = tp
            for j, amount in enumerate(_split(fp)):
                cm[j + 1, 0] = amount
            for j, amount in enumerate(_split(fn)):
                cm[0, j + 1] = amount
            cm[1, 1] += 1  # keep the matrix nonempty
            assert cm.max() <= 3
            row = metrics_from_confusion(cm)
            # brute-force macro F1 with per-class harmonic means
            f1s = []
            for c in range(5):
                ctp = cm[c, c]
                p = ctp / cm[:, c].sum() if cm[:, c].sum() else 0.0
                r = ctp / cm[c, :].sum() if cm[c, :].sum() else 0.0
                f1s.append(2 * p * r / (p + r) if p + r else 0.0)
            assert row.f1 == pytest.approx(100 * np.mean(f1s), abs=1e-12)

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            metrics_from_confusion(np.zeros((5, 5), dtype=int))

    def test_rounding(self):
        cm = np.diag([1, 1, 1, 0, 0])
        cm[3, 0] = 1
        row = metrics_from_confusion(cm).rounded()
        assert row.accuracy == 75.0


def _split(total: int) -> list[int]:
    """Split 0..8 into four {0,1,2} cells."""
    out = []
    for _ in range(4):
        take = min(2, total)
        out.append(take)
        total -= take
    assert total == 0
    return out


class TestFoldAggregation:
    def test_published_kfold_row(self):
        folds = [87.91, 87.91, 89.01, 87.91, 89.01]
        mean, std = fold_mean_std(folds)
        assert round(mean, 2) == 88.35
        assert round(std, 1) == 0.6

    def test_identical_folds_zero_std(self):
        mean, std = fold_mean_std([81.0] * 5)
        assert mean == 81.0 and std == 0.0

    def test_mean_within_bounds(self, rng):
        for _ in range(100):
            vals = list(rng.uniform(0, 100, size=5))
            mean, std = fold_mean_std(vals)
            assert min(vals) <= mean <= max(vals) and std >= 0
            assert mean == pytest.approx(np.mean(vals), abs=1e-9)
            assert std == pytest.approx(np.std(vals, ddof=1), abs=1e-9)
