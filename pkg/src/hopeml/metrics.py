"""Per-class precision/recall/F1, macro and weighted aggregates, confusion matrix.

Zero-division convention throughout: 0/0 -> 0. The macro mean divides by the
full class count, zero-support classes included, which is what makes macro F1
robust to the imbalance that inflates weighted F1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from hopeml.corpus import ClassLabel


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    classes: tuple
    confusion: tuple  # rows = gold, cols = predicted; tuple of int tuples
    per_class: dict
    macro_f1: float
    weighted_f1: float
    accuracy: float

    def metric(self, name: str) -> float:
        if name not in ("macro_f1", "weighted_f1", "accuracy"):
            raise MetricsError(f"unknown metric {name!r}")
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "confusion": [list(row) for row in self.confusion],
            "per_class": {
                _class_value(c): {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for c, s in self.per_class.items()
            },
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _class_value(c) -> str:
    return c.value if isinstance(c, ClassLabel) else str(c)


def _class_from_value(v: str):
    try:
        return ClassLabel(v)
    except ValueError:
        return v


def report_from_dict(data: dict) -> EvalReport:
    """Rebuild a report from its JSON schema.

    The schema stores no explicit class order; classes are recovered in
    canonical ClassLabel order (sorted for non-canonical labels), which is
    the order every report produced by this package uses.
    """
    labels = [_class_from_value(v) for v in data["per_class"]]
    canonical = [c for c in ClassLabel if c in labels]
    others = sorted((l for l in labels if not isinstance(l, ClassLabel)), key=str)
    classes = tuple(canonical + others)
    per_class = {
        c: ClassScores(
            precision=float(data["per_class"][_class_value(c)]["precision"]),
            recall=float(data["per_class"][_class_value(c)]["recall"]),
            f1=float(data["per_class"][_class_value(c)]["f1"]),
            support=int(data["per_class"][_class_value(c)]["support"]),
        )
        for c in classes
    }
    return EvalReport(
        classes=classes,
        confusion=tuple(tuple(int(v) for v in row) for row in data["confusion"]),
        per_class=per_class,
        macro_f1=float(data["macro_f1"]),
        weighted_f1=float(data["weighted_f1"]),
        accuracy=float(data["accuracy"]),
    )


def _safe_div(num: float, den: float) -> float:
    return float(num) / float(den) if den > 0 else 0.0


def evaluate(gold, pred, classes) -> EvalReport:
    """Score predictions against gold labels over an ordered class list."""
    gold = list(gold)
    pred = list(pred)
    if len(gold) != len(pred):
        raise MetricsError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    if not gold:
        raise MetricsError("cannot evaluate an empty prediction list")
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}

    k = len(classes)
    confusion = np.zeros((k, k), dtype=np.int64)
    for g, p in zip(gold, pred):
        if g not in index:
            raise MetricsError(f"gold label {g!r} not in class list")
        if p not in index:
            raise MetricsError(f"predicted label {p!r} not in class list")
        confusion[index[g], index[p]] += 1

    per_class = {}
    f1s = np.zeros(k)
    supports = np.zeros(k, dtype=np.int64)
    for i, c in enumerate(classes):
        tp = confusion[i, i]
        fp = confusion[:, i].sum() - tp
        fn = confusion[i, :].sum() - tp
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        support = int(tp + fn)
        per_class[c] = ClassScores(precision, recall, f1, support)
        f1s[i] = f1
        supports[i] = support

    total = supports.sum()
    return EvalReport(
        classes=classes,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        per_class=per_class,
        macro_f1=float(f1s.mean()),
        weighted_f1=float((f1s * supports).sum() / total),
        accuracy=float(np.trace(confusion) / total),
    )


def format_report(report: EvalReport) -> str:
    """Deterministic plain-text table followed by a one-line JSON rendering."""
    name_width = max(len(_class_value(c)) for c in report.classes)
    name_width = max(name_width, len("class"))
    lines = [f"{'class':<{name_width}}  precision  recall  f1      support"]
    for c in report.classes:
        s = report.per_class[c]
        lines.append(
            f"{_class_value(c):<{name_width}}  {s.precision:9.4f}  {s.recall:6.4f}  {s.f1:6.4f}  {s.support:7d}"
        )
    lines.append("")
    lines.append(f"accuracy    {report.accuracy:.4f}")
    lines.append(f"macro f1    {report.macro_f1:.4f}")
    lines.append(f"weighted f1 {report.weighted_f1:.4f}")
    lines.append("")
    lines.append("confusion (rows = gold, cols = predicted):")
    for i, c in enumerate(report.classes):
        row = " ".join(f"{v:7d}" for v in report.confusion[i])
        lines.append(f"{_class_value(c):<{name_width}} {row}")
    lines.append("")
    lines.append(report.to_json())
    return "\n".join(lines)
