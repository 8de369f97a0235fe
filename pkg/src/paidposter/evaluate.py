"""Confusion matrix and the four summary metrics; paid posters are the positive class."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Mapping

from .corpus import LABELS, PAID


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def transpose(self) -> "ConfusionMatrix":
        """Matrix obtained by swapping predictions and truth."""
        return ConfusionMatrix(self.tp, self.fn, self.fp, self.tn)


@dataclass(frozen=True)
class Metrics:
    precision: Fraction
    recall: Fraction
    f_measure: Fraction
    accuracy: Fraction
    precision_defined: bool = True
    recall_defined: bool = True

    def as_floats(self) -> tuple[float, float, float, float]:
        return (float(self.precision), float(self.recall), float(self.f_measure), float(self.accuracy))

    def percentages(self) -> tuple[str, str, str, str]:
        return tuple(percent(v) for v in (self.precision, self.recall, self.f_measure, self.accuracy))


def confusion(predictions: Mapping[str, str], truth: Mapping[str, str]) -> ConfusionMatrix:
    missing_pred = sorted(set(truth) - set(predictions))
    missing_truth = sorted(set(predictions) - set(truth))
    if missing_pred or missing_truth:
        parts = []
        if missing_pred:
            parts.append(f"no prediction for: {', '.join(missing_pred)}")
        if missing_truth:
            parts.append(f"no ground truth for: {', '.join(missing_truth)}")
        raise KeyError("; ".join(parts))
    tp = fp = fn = tn = 0
    for uid, actual in truth.items():
        guess = predictions[uid]
        for lab in (actual, guess):
            if lab not in LABELS:
                raise ValueError(f"unknown label {lab!r} for user {uid!r}")
        if actual == PAID:
            if guess == PAID:
                tp += 1
            else:
                fn += 1
        elif guess == PAID:
            fp += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def metrics(m: ConfusionMatrix) -> Metrics:
    """Precision, recall, F-measure and accuracy as exact fractions.

    An undefined precision or recall (zero denominator) is reported as 0 with
    the matching ``*_defined`` flag cleared.
    """
    if m.total == 0:
        raise ValueError("empty confusion matrix")
    p_def = m.tp + m.fp > 0
    r_def = m.tp + m.fn > 0
    p = Fraction(m.tp, m.tp + m.fp) if p_def else Fraction(0)
    r = Fraction(m.tp, m.tp + m.fn) if r_def else Fraction(0)
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    acc = Fraction(m.tp + m.tn, m.total)
    return Metrics(p, r, f, acc, p_def, r_def)


def percent(x: Fraction | float, places: int = 2) -> str:
    """Render a ratio as a percentage, rounding half away from zero."""
    q = Decimal(1).scaleb(-places)
    if isinstance(x, Fraction):
        val = Decimal(x.numerator * 100) / Decimal(x.denominator)
    else:
        val = Decimal(repr(x * 100))
    return f"{val.quantize(q, rounding=ROUND_HALF_UP)}%"


def machine_line(m: ConfusionMatrix, met: Metrics | None = None) -> str:
    met = met or metrics(m)
    p, r, f, a = met.as_floats()
    return f"{m.tp},{m.fp},{m.fn},{m.tn},{p:.6f},{r:.6f},{f:.6f},{a:.6f}"


def report(m: ConfusionMatrix, title: str | None = None) -> str:
    met = metrics(m)
    p, r, f, a = met.percentages()
    if not met.precision_defined:
        p += " (undefined)"
    if not met.recall_defined:
        r += " (undefined)"
    rows = [
        ("True Negative", str(m.tn)),
        ("False Positive", str(m.fp)),
        ("False Negative", str(m.fn)),
        ("True Positive", str(m.tp)),
        ("Precision", p),
        ("Recall", r),
        ("F-measure", f),
        ("Accuracy", a),
    ]
    width = max(len(k) for k, _ in rows)
    lines = [title] if title else []
    lines += [f"{k:<{width}}  {v}" for k, v in rows]
    lines.append(machine_line(m, met))
    return "\n".join(lines)
