"""Ranking metrics: ROC AUC with ties, AUC vs uncertainty thresholds,
uncertainty histograms and per-epoch report assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .losses import EvidentialOutput

DEFAULT_THRESHOLDS = tuple(np.round(np.arange(0.1, 1.01, 0.1), 10))


@dataclass
class ThresholdPoint:
    threshold: float
    auc: float | None  # None when the subset is empty or single-class
    sample_count: int


@dataclass
class Histogram:
    counts: np.ndarray
    edges: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class EvalReport:
    epoch: int
    method: str
    overall_auc: float | None
    threshold_curve: list[ThresholdPoint] = field(default_factory=list)
    uncertainty_histogram: Histogram | None = None


def _tied_ranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < s.size:
        j = i
        while j < s.size and s[j] == s[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j - 1) + 1.0
        i = j
    return ranks


def roc_auc(scores, labels) -> float | None:
    """Mann-Whitney AUC with half credit for ties, O(n log n).

    Returns None when only one class is present (never a fabricated
    0.5 and never NaN).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(int)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _tied_ranks(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def scores_from_probabilities(p: np.ndarray) -> np.ndarray:
    """Binary score: probability (or p_hat) of class 1."""
    return np.asarray(p)[:, 1]


def multiclass_auc(p_hat: np.ndarray, class_idx: np.ndarray) -> float | None:
    """Binary tasks score class 1 directly; K > 2 falls back to a
    one-vs-rest macro average over classes with both outcomes present."""
    p_hat = np.asarray(p_hat, dtype=np.float64)
    if p_hat.shape[1] == 2:
        return roc_auc(scores_from_probabilities(p_hat), class_idx)
    parts = []
    for j in range(p_hat.shape[1]):
        auc = roc_auc(p_hat[:, j], (class_idx == j).astype(int))
        if auc is not None:
            parts.append(auc)
    return float(np.mean(parts)) if parts else None


def auc_vs_uncertainty(
    out: EvidentialOutput, labels, thresholds=None
) -> list[ThresholdPoint]:
    """AUC over {i : u_i < tau} for each threshold (strict comparison).

    Defaults to the decade grid 0.1..1.0 plus a point just above the
    maximum observed uncertainty, so the last entry covers the full set.
    """
    labels = np.asarray(labels).ravel().astype(int)
    u = out.uncertainty
    if thresholds is None:
        cover_all = np.nextafter(float(u.max()), np.inf)
        grid = sorted(set(float(t) for t in DEFAULT_THRESHOLDS) | {cover_all})
    else:
        grid = [float(t) for t in thresholds]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("thresholds must be strictly increasing")
    curve = []
    for tau in grid:
        mask = u < tau
        count = int(mask.sum())
        auc = multiclass_auc(out.p_hat[mask], labels[mask]) if count else None
        curve.append(ThresholdPoint(threshold=tau, auc=auc, sample_count=count))
    return curve


def uncertainty_histogram(out: EvidentialOutput, bins: int) -> Histogram:
    """Equal-width bins over [0, max(1, max u)]; counts sum to n."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    u = out.uncertainty
    hi = max(1.0, float(u.max()))
    counts, edges = np.histogram(u, bins=bins, range=(0.0, hi))
    return Histogram(counts=counts, edges=edges)


def assemble_report(records, per_epoch_outputs, bins: int = 20):
    """One EvalReport per epoch plus a summary of final AUCs.

    `per_epoch_outputs` pairs each record with either an
    EvidentialOutput (evidence heads) or a probability matrix, plus the
    integer class labels of the validation set.
    """
    if len(records) != len(per_epoch_outputs):
        raise ValueError("one output per epoch record required")
    reports = []
    for rec, (out, labels) in zip(records, per_epoch_outputs):
        if isinstance(out, EvidentialOutput):
            report = EvalReport(
                epoch=rec.epoch,
                method=rec.stage,
                overall_auc=multiclass_auc(out.p_hat, labels),
                threshold_curve=auc_vs_uncertainty(out, labels),
                uncertainty_histogram=uncertainty_histogram(out, bins),
            )
        else:
            report = EvalReport(
                epoch=rec.epoch,
                method=rec.stage,
                overall_auc=multiclass_auc(np.asarray(out), labels),
            )
        reports.append(report)
    summary = {
        "epochs": len(reports),
        "final_auc": reports[-1].overall_auc if reports else None,
    }
    return reports, summary
