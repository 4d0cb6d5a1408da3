"""Accuracy, chance deltas, vote conversion and rank correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError


def accuracy(predictions, correct) -> float:
    """Fraction of matching entries, in percent."""
    predictions = list(predictions)
    correct = list(correct)
    if not predictions:
        raise ParameterError("accuracy needs at least one prediction")
    if len(predictions) != len(correct):
        raise ParameterError(
            f"length mismatch: {len(predictions)} predictions vs {len(correct)} labels"
        )
    hits = sum(1 for p, c in zip(predictions, correct) if p == c)
    return 100.0 * hits / len(predictions)


@dataclass(frozen=True)
class TaskResult:
    """Mean/std accuracy over repeats plus the chance delta, in percent."""

    task: str
    accuracy_mean_pct: float
    accuracy_std_pct: float
    chance_pct: float
    delta_pct: float
    seeds: tuple

    def __post_init__(self):
        if not 0.0 <= self.accuracy_mean_pct <= 100.0:
            raise ParameterError("accuracy must lie in [0, 100]")
        if abs(self.delta_pct - (self.accuracy_mean_pct - self.chance_pct)) > 1e-9:
            raise ParameterError("delta inconsistent with mean - chance")

    @classmethod
    def from_accuracies(cls, task, accuracies, chance_pct, seeds) -> "TaskResult":
        accs = np.asarray(list(accuracies), dtype=np.float64)
        mean = float(accs.mean())
        std = float(accs.std(ddof=1)) if accs.size > 1 else 0.0
        return cls(
            task=task,
            accuracy_mean_pct=mean,
            accuracy_std_pct=std,
            chance_pct=float(chance_pct),
            delta_pct=mean - float(chance_pct),
            seeds=tuple(int(s) for s in seeds),
        )

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "accuracyMeanPct": round(self.accuracy_mean_pct, 2),
            "accuracyStdPct": round(self.accuracy_std_pct, 2),
            "chancePct": round(self.chance_pct, 2),
            "deltaPct": round(self.accuracy_mean_pct - self.chance_pct, 2),
            "seeds": list(self.seeds),
        }


def chance_delta(result: TaskResult) -> float:
    """Accuracy above (or below) random guessing."""
    if not 0.0 < result.chance_pct < 100.0:
        raise ParameterError("chance must lie strictly in (0, 100)")
    return result.accuracy_mean_pct - result.chance_pct


@dataclass(frozen=True)
class VoteTally:
    """Per-example bucketing of two models' correctness."""

    only_a: int
    only_b: int
    both: int
    neither: int

    def __post_init__(self):
        for v in (self.only_a, self.only_b, self.both, self.neither):
            if v < 0:
                raise ParameterError("tally components must be nonnegative")

    @property
    def total(self) -> int:
        return self.only_a + self.only_b + self.both + self.neither

    def to_json_dict(self) -> dict:
        return {
            "onlyA": self.only_a,
            "onlyB": self.only_b,
            "both": self.both,
            "neither": self.neither,
        }


def votes_from_predictions(preds_a, preds_b, correct) -> VoteTally:
    """Count examples where only one model is right."""
    preds_a, preds_b, correct = list(preds_a), list(preds_b), list(correct)
    if not (len(preds_a) == len(preds_b) == len(correct)):
        raise ParameterError("prediction and label lists must have equal lengths")
    only_a = only_b = both = neither = 0
    for a, b, c in zip(preds_a, preds_b, correct):
        hit_a, hit_b = a == c, b == c
        if hit_a and hit_b:
            both += 1
        elif hit_a:
            only_a += 1
        elif hit_b:
            only_b += 1
        else:
            neither += 1
    return VoteTally(only_a=only_a, only_b=only_b, both=both, neither=neither)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based) with ties assigned their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(a, b) -> float:
    """Spearman's rank correlation with average ranks for ties."""
    a = np.asarray(list(a), dtype=np.float64)
    b = np.asarray(list(b), dtype=np.float64)
    if a.size != b.size:
        raise ParameterError("inputs must have equal lengths")
    if a.size < 2:
        raise ParameterError("need at least two observations")
    ra, rb = _average_ranks(a), _average_ranks(b)
    da, db = ra - ra.mean(), rb - rb.mean()
    var_a, var_b = float(np.dot(da, da)), float(np.dot(db, db))
    if var_a == 0.0 or var_b == 0.0:
        raise NumericalError("spearman_rho undefined: zero rank variance")
    return float(np.dot(da, db) / np.sqrt(var_a * var_b))
