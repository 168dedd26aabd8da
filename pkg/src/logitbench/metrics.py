"""Per-replicate performance metrics for one method's output.

Four metrics: RMSE of slope estimates, mean interval score (MIS) of 95%
intervals, area under the precision-recall curve (AUPRC) of variable-
inclusion rankings, and the Brier score of pooled held-out predictions.
All are deterministic pure functions over slopes only (j = 1..p).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IS_ALPHA = 0.05  # 95% intervals; miss penalty 2/alpha = 40


@dataclass
class MethodOutput:
    """Everything one method produces on one replicate."""

    beta_hat: np.ndarray | None = None  # length p+1, intercept first; 0 if excluded
    ci_lower: np.ndarray | None = None  # length p+1, or None for interval-free methods
    ci_upper: np.ndarray | None = None
    inclusion_score: np.ndarray | None = None  # length p
    test_probs: np.ndarray | None = None  # pooled held-out predictions
    test_outcomes: np.ndarray | None = None
    cpu_seconds: float = 0.0
    failed: bool = False
    error: str = ""


@dataclass
class MetricRecord:
    rmse: float | None = None
    mis: float | None = None
    auprc: float | None = None
    brier: float | None = None
    cpu_minutes: float = 0.0
    failed: bool = False
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mis": self.mis,
            "auprc": self.auprc,
            "brier": self.brier,
            "cpu_minutes": self.cpu_minutes,
            "failed": self.failed,
            "error": self.error,
        }


def rmse(beta_hat, beta_dgm) -> float:
    """Root mean squared error between estimated and generating slopes."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_dgm = np.asarray(beta_dgm, dtype=float)
    if beta_hat.shape != beta_dgm.shape:
        raise ValueError("coefficient vectors differ in length")
    return float(np.sqrt(np.mean((beta_hat - beta_dgm) ** 2)))


def interval_score(lower, upper, beta_dgm, alpha: float = IS_ALPHA) -> float:
    """Mean interval score: width plus 2/alpha times the distance missed."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    beta_dgm = np.asarray(beta_dgm, dtype=float)
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    width = upper - lower
    below = np.maximum(lower - beta_dgm, 0.0)
    above = np.maximum(beta_dgm - upper, 0.0)
    scores = width + (2.0 / alpha) * (below + above)
    return float(np.mean(scores))


def auprc(inclusion_score, relevant) -> float:
    """Area under the precision-recall curve with tied scores collapsed.

    Ties form a single block; the block contributes its precision times
    the recall it spans (average-precision form). Undefined when every
    predictor is relevant or none is.
    """
    scores = np.asarray(inclusion_score, dtype=float)
    is_rel = np.zeros(len(scores), dtype=bool)
    is_rel[list(relevant)] = True
    n_rel = int(is_rel.sum())
    if n_rel == 0 or n_rel == len(scores):
        raise ValueError("need at least one relevant and one irrelevant predictor")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_rel = is_rel[order]

    area = 0.0
    tp = 0
    seen = 0
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        block_rel = int(sorted_rel[i:j].sum())
        tp_new = tp + block_rel
        seen_new = seen + (j - i)
        precision = tp_new / seen_new
        delta_recall = block_rel / n_rel
        area += precision * delta_recall
        tp, seen, i = tp_new, seen_new, j
    return float(area)


def brier(test_probs, test_outcomes) -> float:
    """Mean squared difference between predicted probabilities and outcomes."""
    probs = np.asarray(test_probs, dtype=float)
    outcomes = np.asarray(test_outcomes, dtype=float)
    if probs.size == 0 or probs.shape != outcomes.shape:
        raise ValueError("need equal-length, non-empty prediction and outcome vectors")
    return float(np.mean((probs - outcomes) ** 2))


def compute_metrics(output: MethodOutput, beta_dgm, relevant) -> MetricRecord:
    """Assemble a MetricRecord; absent inputs leave metrics absent."""
    record = MetricRecord(
        cpu_minutes=output.cpu_seconds / 60.0, failed=output.failed, error=output.error
    )
    if output.failed:
        return record
    beta_dgm = np.asarray(beta_dgm, dtype=float)
    slopes_dgm = beta_dgm[1:]
    if output.beta_hat is not None:
        record.rmse = rmse(np.asarray(output.beta_hat)[1:], slopes_dgm)
    if output.ci_lower is not None and output.ci_upper is not None:
        record.mis = interval_score(
            np.asarray(output.ci_lower)[1:], np.asarray(output.ci_upper)[1:], slopes_dgm
        )
    if output.inclusion_score is not None and 0 < len(relevant) < len(output.inclusion_score):
        record.auprc = auprc(output.inclusion_score, relevant)
    if output.test_probs is not None and output.test_outcomes is not None:
        record.brier = brier(output.test_probs, output.test_outcomes)
    return record
