"""Evaluation metrics and output-mapping rules.

Covers ternary classification scoring (per-class one-vs-rest F1, macro
F1, confusion matrix), the strict ternary-to-binary protocol used to
compare against binary detectors (any non-human prediction on the human
subset is a false positive; only an ai prediction counts on the ai
subset), the derived average accuracy and style-robustness verdicts,
and the four-way-detector output mapping.

Rates are fractions of a subset expressed in percent [0, 100]; reports
format them with two decimals.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ValidationError
from .taxonomy import CLASSES, CollaborationMode, ContentClass


class FourWayLabel(Enum):
    """Output vocabulary of four-way external detectors."""

    HW = "hw"
    HWMP = "hwmp"
    MG = "mg"
    MGMP = "mgmp"


@dataclass
class ClassificationMetrics:
    """One-vs-rest scores for the ternary task plus the confusion matrix
    (rows gold, columns predicted, canonical class order)."""

    precision: dict[ContentClass, float]
    recall: dict[ContentClass, float]
    f1_per_class: dict[ContentClass, float]
    macro_f1: float
    confusion: np.ndarray
    unparsed: int = 0


@dataclass
class MetricReport:
    """Everything one evaluation produces; sections not computable from
    the available inputs stay None (e.g. the mix-subset rate under the
    strict binary protocol)."""

    f1_per_class: Optional[dict[ContentClass, float]] = None
    macro_f1: Optional[float] = None
    confusion: Optional[np.ndarray] = None
    precision: Optional[dict[ContentClass, float]] = None
    recall: Optional[dict[ContentClass, float]] = None
    ai_rates: Optional[dict[ContentClass, Optional[float]]] = None
    average_accuracy: Optional[float] = None
    style_robust: Optional[bool] = None
    any_ai_rate: Optional[float] = None
    unparsed: int = 0
    n_records: int = 0


def _check_pairs(preds: Sequence, golds: Sequence) -> None:
    if len(preds) != len(golds):
        raise ValidationError(f"{len(preds)} predictions vs {len(golds)} golds")
    if len(golds) == 0:
        raise ValidationError("cannot score an empty prediction list")


def confusion_and_f1(
    preds: Sequence[Optional[ContentClass]], golds: Sequence[ContentClass]
) -> ClassificationMetrics:
    """Per-class precision/recall/F1, macro F1 and the confusion matrix.

    F1 is defined as 0 when precision + recall is 0. A None prediction
    (an unparseable external verdict) counts against its gold class and
    is tallied in ``unparsed``; the 3x3 confusion matrix covers parsed
    predictions only.
    """
    _check_pairs(preds, golds)
    n = len(CLASSES)
    counts = np.zeros((n, n + 1), dtype=int)  # last column: unparsed
    for p, g in zip(preds, golds):
        counts[g.index, n if p is None else p.index] += 1
    confusion = counts[:, :n]
    precision, recall, f1 = {}, {}, {}
    for c in CLASSES:
        i = c.index
        tp = confusion[i, i]
        fp = confusion[:, i].sum() - tp
        fn = counts[i, :].sum() - tp
        prec = tp / (tp + fp) if tp + fp > 0 else 0.0
        rec = tp / (tp + fn) if tp + fn > 0 else 0.0
        precision[c] = float(prec)
        recall[c] = float(rec)
        f1[c] = float(2 * prec * rec / (prec + rec)) if prec + rec > 0 else 0.0
    macro = float(np.mean([f1[c] for c in CLASSES]))
    return ClassificationMetrics(
        precision=precision,
        recall=recall,
        f1_per_class=f1,
        macro_f1=macro,
        confusion=confusion,
        unparsed=int(counts[:, n].sum()),
    )


def strict_binary_outcomes(preds: Sequence[ContentClass], subset: ContentClass) -> float:
    """Predicted-AI rate (%) of a gold subset under the strict rule.

    On the human subset every non-human prediction counts as a false
    positive; on the ai subset only an ai prediction counts as a true
    positive. ``preds`` are the predictions for records whose gold class
    is ``subset``.
    """
    if subset not in (ContentClass.HUMAN, ContentClass.AI):
        raise ValidationError(f"strict binary protocol covers human/ai subsets, not {subset}")
    if len(preds) == 0:
        raise ConfigError(f"empty {subset.value} subset")
    if subset is ContentClass.HUMAN:
        hits = sum(1 for p in preds if p is not ContentClass.HUMAN)
    else:
        hits = sum(1 for p in preds if p is ContentClass.AI)
    return 100.0 * hits / len(preds)


def average_accuracy(rate_human: float, rate_ai: float) -> float:
    """Mean of human-subset accuracy (100 - rate) and ai-subset rate."""
    for name, rate in (("rate_human", rate_human), ("rate_ai", rate_ai)):
        if not 0.0 <= rate <= 100.0:
            raise ValidationError(f"{name} must be in [0, 100], got {rate}")
    return ((100.0 - rate_human) + rate_ai) / 2.0


def is_style_robust(rate_human: float, rate_mix: float, rate_ai: float) -> bool:
    """True iff the predicted-AI rate strictly increases human < mix < ai."""
    for name, rate in (("human", rate_human), ("mix", rate_mix), ("ai", rate_ai)):
        if not 0.0 <= rate <= 100.0:
            raise ValidationError(f"rate_{name} must be in [0, 100], got {rate}")
    return rate_human < rate_mix < rate_ai


def map_fourway(label: FourWayLabel) -> ContentClass:
    """Collapse a four-way detector output to the binary human/ai frame."""
    if label in (FourWayLabel.HW, FourWayLabel.HWMP):
        return ContentClass.HUMAN
    return ContentClass.AI


def any_ai_involvement(mode_preds: Sequence[CollaborationMode]) -> float:
    """Percentage of predicted modes that are anything but hw."""
    if len(mode_preds) == 0:
        raise ValidationError("cannot compute any-AI rate of an empty list")
    hits = sum(1 for m in mode_preds if m is not CollaborationMode.HW)
    return 100.0 * hits / len(mode_preds)


def ternary_report(
    preds: Sequence[Optional[ContentClass]],
    golds: Sequence[ContentClass],
    mode_preds: Optional[Sequence[CollaborationMode]] = None,
) -> MetricReport:
    """Full report for a ternary detector.

    The human/ai subset rates follow the strict binary protocol; the mix
    subset is never evaluated under it, so its rate and the
    style-robustness verdict stay None.
    """
    cls = confusion_and_f1(preds, golds)
    by_subset = {c: [p for p, g in zip(preds, golds) if g is c] for c in CLASSES}
    ai_rates: dict[ContentClass, Optional[float]] = {c: None for c in CLASSES}
    for subset in (ContentClass.HUMAN, ContentClass.AI):
        picks = [p if p is not None else ContentClass.MIX for p in by_subset[subset]]
        if picks:
            ai_rates[subset] = strict_binary_outcomes(picks, subset)
    avg = None
    if ai_rates[ContentClass.HUMAN] is not None and ai_rates[ContentClass.AI] is not None:
        avg = average_accuracy(ai_rates[ContentClass.HUMAN], ai_rates[ContentClass.AI])
    any_ai = any_ai_involvement(mode_preds) if mode_preds else None
    return MetricReport(
        f1_per_class=cls.f1_per_class,
        macro_f1=cls.macro_f1,
        confusion=cls.confusion,
        precision=cls.precision,
        recall=cls.recall,
        ai_rates=ai_rates,
        average_accuracy=avg,
        style_robust=None,
        any_ai_rate=any_ai,
        unparsed=cls.unparsed,
        n_records=len(golds),
    )


def binary_detector_report(
    pred_is_ai: Sequence[bool], golds: Sequence[ContentClass]
) -> MetricReport:
    """Report for an external binary detector: per-subset predicted-AI
    rates, average accuracy and the style-robustness verdict."""
    _check_pairs(pred_is_ai, golds)
    rates: dict[ContentClass, Optional[float]] = {}
    for c in CLASSES:
        flags = [p for p, g in zip(pred_is_ai, golds) if g is c]
        rates[c] = 100.0 * sum(flags) / len(flags) if flags else None
    avg = None
    robust = None
    if rates[ContentClass.HUMAN] is not None and rates[ContentClass.AI] is not None:
        avg = average_accuracy(rates[ContentClass.HUMAN], rates[ContentClass.AI])
        if rates[ContentClass.MIX] is not None:
            robust = is_style_robust(
                rates[ContentClass.HUMAN], rates[ContentClass.MIX], rates[ContentClass.AI]
            )
    return MetricReport(
        ai_rates=rates,
        average_accuracy=avg,
        style_robust=robust,
        n_records=len(golds),
    )
