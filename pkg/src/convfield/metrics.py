"""Evaluation metrics: position accuracy, per-label rates, rank AUC.

Per-label rates come from one-vs-rest confusion counts of the decoded
labels.  AUC uses the label's marginal probability as the score and the
rank-based statistic with midrank tie handling, which equals the pairwise
win fraction (ties at half credit).  Undefined ratios (0/0) are reported
as NaN; label means skip labels missing a class entirely.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .crf import compute_potentials, decode_posterior, forward_backward
from .data import Dataset
from .convnet import conv_forward
from .model import ModelParams


@dataclass
class ConfusionCounts:
    """One-vs-rest counts per label; arrays of shape (n_labels,)."""

    tp: np.ndarray
    tn: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @classmethod
    def from_predictions(cls, predicted: list[np.ndarray], truth: list[np.ndarray],
                         n_labels: int) -> "ConfusionCounts":
        tp = np.zeros(n_labels, dtype=np.int64)
        fp = np.zeros(n_labels, dtype=np.int64)
        fn = np.zeros(n_labels, dtype=np.int64)
        total = 0
        for pred, true in zip(predicted, truth):
            if len(pred) != len(true):
                raise ValueError("prediction/truth length mismatch")
            total += len(true)
            for t in range(n_labels):
                p, g = pred == t, true == t
                tp[t] += int(np.sum(p & g))
                fp[t] += int(np.sum(p & ~g))
                fn[t] += int(np.sum(~p & g))
        tn = total - tp - fp - fn
        return cls(tp=tp, tn=tn, fp=fp, fn=fn)


def qx_accuracy(predicted: list[np.ndarray], truth: list[np.ndarray]) -> float:
    correct = total = 0
    for pred, true in zip(predicted, truth):
        if len(pred) != len(true):
            raise ValueError("prediction/truth length mismatch")
        correct += int(np.sum(np.asarray(pred) == np.asarray(true)))
        total += len(true)
    if total == 0:
        raise ValueError("no positions to score")
    return correct / total


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.full(num.shape, math.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def per_label_metrics(counts: ConfusionCounts):
    """Sensitivity, specificity, precision and Mcc per label.

    0/0 ratios are NaN; an Mcc with a zero denominator is 0.
    """
    tp, tn = counts.tp.astype(float), counts.tn.astype(float)
    fp, fn = counts.fp.astype(float), counts.fn.astype(float)
    sens = _ratio(tp, tp + fn)
    spec = _ratio(tn, tn + fp)
    prec = _ratio(tp, tp + fp)
    denom = np.sqrt((tp + fp) * (tn + fp) * (tp + fn) * (tn + fn))
    mcc = np.zeros_like(denom)
    ok = denom > 0
    mcc[ok] = (tp[ok] * tn[ok] - fp[ok] * fn[ok]) / denom[ok]
    return sens, spec, prec, mcc


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def empirical_auc(scores, is_positive) -> float:
    """Rank-based pairwise win fraction with midrank tie handling."""
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(is_positive, dtype=bool)
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise ValueError("empirical_auc needs at least one positive and one negative")
    ranks = _midranks(scores)
    u = float(ranks[pos].sum()) - n1 * (n1 + 1) / 2.0
    return u / (n1 * n0)


@dataclass
class MetricsReport:
    label_names: list[str]
    qx: float
    sens: list[float]
    spec: list[float]
    prec: list[float]
    mcc: list[float]
    auc: list[float]
    mean_mcc: float
    mean_auc: float
    positions: int
    skipped_labels: list[str]

    def to_json_dict(self) -> dict:
        def clean(v):
            return None if (isinstance(v, float) and math.isnan(v)) else v

        return {
            "qx": self.qx,
            "positions": self.positions,
            "per_label": [
                {"label": name, "sens": clean(self.sens[i]), "spec": clean(self.spec[i]),
                 "prec": clean(self.prec[i]), "mcc": clean(self.mcc[i]),
                 "auc": clean(self.auc[i])}
                for i, name in enumerate(self.label_names)
            ],
            "mean_mcc": clean(self.mean_mcc),
            "mean_auc": clean(self.mean_auc),
            "skipped_labels": list(self.skipped_labels),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def to_text(self) -> str:
        def fmt(v):
            return "  n/a" if (isinstance(v, float) and math.isnan(v)) else f"{v:5.3f}"

        lines = [f"qx\t{self.qx:.4f}", f"positions\t{self.positions}"]
        lines.append("label\tsens\tspec\tprec\tmcc\tauc")
        for i, name in enumerate(self.label_names):
            lines.append("\t".join([name, fmt(self.sens[i]), fmt(self.spec[i]),
                                    fmt(self.prec[i]), fmt(self.mcc[i]), fmt(self.auc[i])]))
        lines.append(f"mean_mcc\t{fmt(self.mean_mcc)}")
        lines.append(f"mean_auc\t{fmt(self.mean_auc)}")
        if self.skipped_labels:
            lines.append("skipped_labels\t" + ",".join(self.skipped_labels))
        return "\n".join(lines)


def evaluate_model(params: ModelParams, data: Dataset) -> MetricsReport:
    """Decode and score a labeled dataset against a model."""
    if not data.fully_labeled:
        raise ValueError("evaluation needs fully labeled data")
    n = len(data.alphabet)
    predicted, truth = [], []
    scores = [[] for _ in range(n)]
    positives = [[] for _ in range(n)]
    for seq in data.sequences:
        trace = conv_forward(seq.features, params.arch, params.conv)
        fb = forward_backward(compute_potentials(trace[-1], params.crf))
        predicted.append(decode_posterior(fb))
        truth.append(seq.labels)
        for t in range(n):
            scores[t].append(fb.marginals[:, t])
            positives[t].append(seq.labels == t)

    counts = ConfusionCounts.from_predictions(predicted, truth, n)
    sens, spec, prec, mcc = per_label_metrics(counts)
    auc = np.full(n, math.nan)
    skipped = []
    for t in range(n):
        s = np.concatenate(scores[t])
        p = np.concatenate(positives[t])
        if p.any() and (~p).any():
            auc[t] = empirical_auc(s, p)
        else:
            skipped.append(data.alphabet.names[t])
    usable = ~np.isnan(auc)
    mean_mcc = float(mcc[usable].mean()) if usable.any() else math.nan
    mean_auc = float(auc[usable].mean()) if usable.any() else math.nan
    return MetricsReport(
        label_names=list(data.alphabet.names),
        qx=qx_accuracy(predicted, truth),
        sens=list(sens), spec=list(spec), prec=list(prec),
        mcc=list(mcc), auc=list(auc),
        mean_mcc=mean_mcc, mean_auc=mean_auc,
        positions=sum(s.length for s in data.sequences),
        skipped_labels=skipped,
    )
