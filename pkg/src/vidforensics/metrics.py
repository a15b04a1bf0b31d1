"""Detection and calibration metrics for binary real(0)/fake(1) scores.

Sums go through ``math.fsum`` so results do not depend on summation order.
"""

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import MetricError

PROB_CLIP = 1e-7


def _split(labels, values, name):
    labels = np.asarray(labels)
    values = np.asarray(values, dtype=np.float64)
    if labels.shape != values.shape:
        raise MetricError(f"{name}: {labels.shape[0]} labels vs {values.shape[0]} scores")
    reals, fakes = values[labels == 0], values[labels == 1]
    if len(reals) == 0 or len(fakes) == 0:
        raise MetricError(f"{name} needs at least one real and one fake sample")
    return reals, fakes


def auc(labels, scores):
    """Mann-Whitney AUC: P(fake score > real score), ties worth one half."""
    reals, fakes = _split(labels, scores, "auc")
    order = np.sort(reals)
    below = np.searchsorted(order, fakes, side="left")
    not_above = np.searchsorted(order, fakes, side="right")
    wins = below.sum() + 0.5 * (not_above - below).sum()
    return float(wins / (len(reals) * len(fakes)))


def balanced_accuracy(labels, probs, threshold=0.5):
    """Mean of TPR and TNR, predicting fake when prob >= threshold."""
    reals, fakes = _split(labels, probs, "balanced_accuracy")
    tpr = np.mean(fakes >= threshold)
    tnr = np.mean(reals < threshold)
    return float((tpr + tnr) / 2.0)


def pd_at_fpr(labels, scores, fpr=0.05):
    """Detection rate at the smallest threshold t with P(real > t) <= fpr."""
    reals, fakes = _split(labels, scores, "pd_at_fpr")
    order = np.sort(reals)
    n = len(order)
    # reals strictly above order[k] is n - (last index of that value + 1)
    above = n - np.searchsorted(order, order, side="right")
    ok = np.nonzero(above <= fpr * n)[0]
    threshold = order[ok[0]]
    if fpr >= 1.0:
        # every candidate qualifies, so the smallest score of all wins
        threshold = min(threshold, fakes.min())
    return float(np.mean(fakes > threshold))


def balanced_nll(labels, probs):
    reals, fakes = _split(labels, probs, "balanced_nll")
    reals = np.clip(reals, PROB_CLIP, 1.0 - PROB_CLIP)
    fakes = np.clip(fakes, PROB_CLIP, 1.0 - PROB_CLIP)
    real_term = math.fsum(-math.log(1.0 - p) for p in reals) / len(reals)
    fake_term = math.fsum(-math.log(p) for p in fakes) / len(fakes)
    return 0.5 * real_term + 0.5 * fake_term


def ece(labels, probs, bins=10):
    """Binary ECE over equal-width bins of the predicted fake probability."""
    labels = np.asarray(labels, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if labels.shape != probs.shape or len(labels) == 0:
        raise MetricError("ece needs matching, nonempty labels and probabilities")
    idx = np.minimum((probs * bins).astype(int), bins - 1)
    total = 0.0
    for b in range(bins):
        sel = idx == b
        n_b = int(sel.sum())
        if n_b:
            gap = math.fsum(labels[sel]) / n_b - math.fsum(probs[sel]) / n_b
            total += n_b / len(probs) * abs(gap)
    return float(total)


@dataclass
class MetricReport:
    auc: float
    bacc: float
    pd_at_5: float
    nll: float
    ece: float
    threshold: float = 0.5

    def rows(self):
        return list(asdict(self).items())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "value"])
            for k, v in self.rows():
                w.writerow([k, f"{v:.6f}"])


def evaluate(samples, threshold=0.5, bins=10):
    """All five metrics for a list of :class:`ScoredSample`."""
    labels = np.array([s.label for s in samples])
    scores = np.array([s.score for s in samples], dtype=np.float64)
    probs = np.array([s.prob for s in samples], dtype=np.float64)
    return MetricReport(
        auc=auc(labels, scores),
        bacc=balanced_accuracy(labels, probs, threshold),
        pd_at_5=pd_at_fpr(labels, scores, 0.05),
        nll=balanced_nll(labels, probs),
        ece=ece(labels, probs, bins),
        threshold=threshold,
    )
