"""Binary classification metrics computed from first principles.

Kept free of library calls so the exhaustive confusion-matrix oracle in the
test suite checks an independent implementation.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

N_CLASSES = 2


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    per_class: dict
    confusion: list  # confusion[i][j] = count(true == i, pred == j)
    n: int
    seed: int = None
    config_digest: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def flat_row(self) -> dict:
        """One flat mapping for CSV export."""
        row = {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "n": self.n,
            "seed": self.seed,
            "config_digest": self.config_digest,
        }
        for k in range(N_CLASSES):
            scores = self.per_class[k]
            row[f"precision_{k}"] = scores.precision
            row[f"recall_{k}"] = scores.recall
            row[f"f1_{k}"] = scores.f1
            row[f"support_{k}"] = scores.support
        for i in range(N_CLASSES):
            for j in range(N_CLASSES):
                row[f"confusion_{i}{j}"] = self.confusion[i][j]
        return row


def metrics(y_true, y_pred, seed=None, config_digest: str = "") -> EvalReport:
    """Accuracy, macro-F1 and per-class scores; F1 is 0 when undefined."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"length mismatch: {y_true.shape[0]} true vs {y_pred.shape[0]} predicted"
        )
    if y_true.size == 0:
        raise ValueError("cannot score an empty label vector")

    confusion = [[0] * N_CLASSES for _ in range(N_CLASSES)]
    for t, p in zip(y_true.tolist(), y_pred.tolist()):
        confusion[t][p] += 1

    n = int(y_true.size)
    accuracy = sum(confusion[k][k] for k in range(N_CLASSES)) / n

    per_class = {}
    f1_sum = 0.0
    for k in range(N_CLASSES):
        tp = confusion[k][k]
        fp = sum(confusion[i][k] for i in range(N_CLASSES)) - tp
        fn = sum(confusion[k][j] for j in range(N_CLASSES)) - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[k] = ClassScores(precision, recall, f1, tp + fn)
        f1_sum += f1

    return EvalReport(
        accuracy=accuracy,
        macro_f1=f1_sum / N_CLASSES,
        per_class=per_class,
        confusion=confusion,
        n=n,
        seed=seed,
        config_digest=config_digest,
    )
