# File: src/analysis/evaluation.py

"""
Scores action predictions and entity predictions.

Action predictions get per-class precision/recall/F1 with micro, macro and
weighted aggregates plus a confusion matrix. Entity predictions are scored
on exact-match spans (the primary number) and on BIO tags per token.
Every report can be rendered as a text table or a JSON-ready dict.
"""

from collections import Counter
from dataclasses import dataclass, field
import logging

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from src.annotation.schema import OUTSIDE, EntityLabel
from src.exceptions import LengthMismatchError

log = logging.getLogger(__name__)

AVERAGES = ("micro", "macro", "weighted")


def _f1(p, r):
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def _ratio(num, den):
    return num / den if den > 0 else 0.0


@dataclass
class Metrics:
    """
    Per-class and aggregate scores.

    `confusion` is indexed [gold, predicted] in `labels` order; span reports
    leave it as None.
    """
    labels: list
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    micro: dict
    macro: dict
    weighted: dict
    n: int
    accuracy: float = None
    confusion: np.ndarray = None
    counts: dict = field(default_factory=dict)

    def per_class(self):
        return {
            label: {
                "precision": float(self.precision[i]),
                "recall": float(self.recall[i]),
                "f1": float(self.f1[i]),
                "support": int(self.support[i]),
            }
            for i, label in enumerate(self.labels)
        }

    def to_dict(self):
        out = {
            "n": self.n,
            "per_class": self.per_class(),
            "micro": dict(self.micro),
            "macro": dict(self.macro),
            "weighted": dict(self.weighted),
        }
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
        if self.counts:
            out["counts"] = dict(self.counts)
        if self.confusion is not None:
            out["confusion"] = {"labels": list(self.labels), "matrix": self.confusion.tolist()}
        return out

    def to_frame(self):
        frame = pd.DataFrame(
            {"precision": self.precision, "recall": self.recall, "f1": self.f1, "support": self.support},
            index=pd.Index(self.labels, name="label"),
        )
        total = int(np.sum(self.support))
        for avg in AVERAGES:
            scores = getattr(self, avg)
            frame.loc[f"{avg} avg"] = [scores["precision"], scores["recall"], scores["f1"], total]
        frame["support"] = frame["support"].astype(int)
        return frame

    def to_table(self):
        text = self.to_frame().to_string(float_format=lambda v: f"{v:.4f}")
        if self.accuracy is not None:
            text += f"\naccuracy: {self.accuracy:.4f} (n={self.n})"
        return text

    def confusion_frame(self):
        if self.confusion is None:
            raise ValueError("This report carries no confusion matrix")
        return pd.DataFrame(
            self.confusion,
            index=pd.Index(self.labels, name="gold"),
            columns=pd.Index(self.labels, name="predicted"),
        )


def _aggregates(precision, recall, f1, support, tp, fp, fn, include_absent=True, predicted=None):
    micro_p = _ratio(tp, tp + fp)
    micro_r = _ratio(tp, tp + fn)
    micro = {"precision": micro_p, "recall": micro_r, "f1": _f1(micro_p, micro_r)}

    if include_absent:
        keep = np.ones(len(precision), dtype=bool)
    else:
        keep = support > 0
        if predicted is not None:
            keep = keep | (np.asarray(predicted) > 0)
    if keep.any():
        macro = {"precision": float(np.mean(precision[keep])), "recall": float(np.mean(recall[keep])),
                 "f1": float(np.mean(f1[keep]))}
    else:
        macro = {"precision": 0.0, "recall": 0.0, "f1": 0.0}

    total = float(np.sum(support))
    if total > 0:
        weights = support / total
        weighted = {"precision": float(weights @ precision), "recall": float(weights @ recall),
                    "f1": float(weights @ f1)}
    else:
        weighted = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    return micro, macro, weighted


def classification_report(gold, pred, labels, include_absent_in_macro=True, strict=True):
    """
    Per-class P/R/F1, aggregates and confusion matrix for single-label predictions.

    Args:
        gold, pred (list): parallel label lists (enums are compared by value).
        labels (list): the label order for per-class rows and the confusion matrix.
        include_absent_in_macro (bool): count classes with no support in the macro mean.
        strict (bool): require every occurring value to be in `labels`; when False,
            values outside `labels` still count as errors for the listed classes.

    Raises:
        LengthMismatchError: gold and pred differ in length.
        ValueError: strict and a value is missing from `labels`.
    """
    if len(gold) != len(pred):
        raise LengthMismatchError(f"{len(gold)} gold labels but {len(pred)} predictions")
    gold = [str(g) for g in gold]
    pred = [str(p) for p in pred]
    labels = [str(label) for label in labels]
    if strict:
        unknown = (set(gold) | set(pred)) - set(labels)
        if unknown:
            raise ValueError(f"Labels {sorted(unknown)} occur but are not in the label list")

    n = len(gold)
    k = len(labels)
    if n == 0 or k == 0:
        zeros = np.zeros(k)
        empty = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
        return Metrics(labels, zeros, zeros.copy(), zeros.copy(), np.zeros(k, dtype=int),
                       dict(empty), dict(empty), dict(empty), n, accuracy=0.0,
                       confusion=np.zeros((k, k), dtype=int))

    precision, recall, f1, support = precision_recall_fscore_support(
        gold, pred, labels=labels, average=None, zero_division=0)
    cm = confusion_matrix(gold, pred, labels=labels)
    tp = int(np.trace(cm))
    listed = set(labels)
    fp = sum(1 for g, p in zip(gold, pred) if p in listed and g != p)
    fn = sum(1 for g, p in zip(gold, pred) if g in listed and g != p)
    micro, macro, weighted = _aggregates(
        precision, recall, f1, support, tp, fp, fn, include_absent=include_absent_in_macro,
        predicted=cm.sum(axis=0))
    accuracy = sum(g == p for g, p in zip(gold, pred)) / n
    return Metrics(labels, precision, recall, f1, support.astype(int), micro, macro, weighted,
                   n, accuracy=accuracy, confusion=cm)


def _span_key(span):
    return (str(span.label), span.start, span.end)


def span_f1(gold, pred, labels=None):
    """
    Exact-match span scores: a prediction is correct only when label, start and end all match.

    Args:
        gold, pred (list): per utterance, an iterable of Span.
        labels (list): per-class rows; defaults to EntityLabel order restricted
            to labels that occur.

    Raises:
        LengthMismatchError: gold and pred cover different numbers of utterances.
    """
    if len(gold) != len(pred):
        raise LengthMismatchError(f"{len(gold)} gold utterances but {len(pred)} predicted")
    tp, fp, fn = Counter(), Counter(), Counter()
    for gold_spans, pred_spans in zip(gold, pred):
        g = {_span_key(s) for s in gold_spans}
        p = {_span_key(s) for s in pred_spans}
        for label, _, _ in g & p:
            tp[label] += 1
        for label, _, _ in p - g:
            fp[label] += 1
        for label, _, _ in g - p:
            fn[label] += 1

    if labels is None:
        seen = set(tp) | set(fp) | set(fn)
        labels = [e.value for e in EntityLabel if e.value in seen]
        labels += sorted(seen - set(labels))
    labels = [str(label) for label in labels]

    precision = np.array([_ratio(tp[l], tp[l] + fp[l]) for l in labels])
    recall = np.array([_ratio(tp[l], tp[l] + fn[l]) for l in labels])
    f1 = np.array([_f1(p, r) for p, r in zip(precision, recall)])
    support = np.array([tp[l] + fn[l] for l in labels], dtype=int)
    total_tp, total_fp, total_fn = sum(tp.values()), sum(fp.values()), sum(fn.values())
    micro, macro, weighted = _aggregates(precision, recall, f1, support, total_tp, total_fp, total_fn)
    log.debug(f"Span scores: tp={total_tp} fp={total_fp} fn={total_fn}")
    return Metrics(labels, precision, recall, f1, support, micro, macro, weighted, len(gold),
                   counts={"tp": total_tp, "fp": total_fp, "fn": total_fn})


def token_report(gold, pred):
    """
    BIO tag scores per token, with 'O' left out of the per-class rows and aggregates.

    Args:
        gold, pred (list[list[str]]): tag sequences per utterance.
    """
    if len(gold) != len(pred):
        raise LengthMismatchError(f"{len(gold)} gold utterances but {len(pred)} predicted")
    flat_gold, flat_pred = [], []
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise LengthMismatchError(f"Utterance {i}: {len(g)} gold tags but {len(p)} predicted")
        flat_gold.extend(g)
        flat_pred.extend(p)
    labels = sorted((set(flat_gold) | set(flat_pred)) - {OUTSIDE})
    return classification_report(flat_gold, flat_pred, labels, strict=False)


def top_confusions(metrics, k=5):
    """The k largest off-diagonal confusion cells as (gold, predicted, count), largest first."""
    if metrics.confusion is None:
        return []
    cells = [
        (metrics.labels[i], metrics.labels[j], int(metrics.confusion[i, j]))
        for i in range(len(metrics.labels))
        for j in range(len(metrics.labels))
        if i != j and metrics.confusion[i, j] > 0
    ]
    cells.sort(key=lambda c: -c[2])
    return cells[:k]
