"""Report serialization: JSON, plain-text tables, confusion CSV/figure,
and per-venue trend summaries.

Trend rows follow the analysis convention of the run reports: the pure
AI and mix rates come from the content-class head, while the any-AI
rate comes from the collaboration-mode head (every predicted mode other
than hw counts as involvement).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ValidationError
from .metrics import MetricReport
from .taxonomy import CLASSES, ContentClass


def _fmt_rate(value: Optional[float]) -> str:
    return f"{value:.2f}" if value is not None else "-"


def report_to_dict(report: MetricReport) -> dict:
    """JSON-ready view of a report; rates keep two decimals."""
    out: dict = {"n_records": report.n_records}
    if report.f1_per_class is not None:
        out["f1_per_class"] = {c.value: round(100 * report.f1_per_class[c], 2) for c in CLASSES}
        out["macro_f1"] = round(100 * (report.macro_f1 or 0.0), 2)
        out["precision_per_class"] = {
            c.value: round(100 * report.precision[c], 2) for c in CLASSES
        }
        out["recall_per_class"] = {c.value: round(100 * report.recall[c], 2) for c in CLASSES}
        out["confusion"] = report.confusion.tolist()
    if report.ai_rates is not None:
        out["predicted_ai_rate"] = {
            c.value: (round(v, 2) if v is not None else None)
            for c, v in report.ai_rates.items()
        }
    if report.average_accuracy is not None:
        out["average_accuracy"] = round(report.average_accuracy, 2)
    out["style_robust"] = report.style_robust
    if report.any_ai_rate is not None:
        out["any_ai_rate"] = round(report.any_ai_rate, 2)
    if report.unparsed:
        out["unparsed"] = report.unparsed
    return out


def report_to_text(report: MetricReport) -> str:
    """Plain-text table mirroring the benchmark report layout."""
    lines = [f"records: {report.n_records}"]
    if report.f1_per_class is not None:
        lines.append("")
        lines.append(f"{'class':<8}{'precision':>11}{'recall':>9}{'F1':>9}")
        for c in CLASSES:
            lines.append(
                f"{c.value:<8}{100 * report.precision[c]:>11.2f}"
                f"{100 * report.recall[c]:>9.2f}{100 * report.f1_per_class[c]:>9.2f}"
            )
        lines.append(f"{'macro':<8}{'':>11}{'':>9}{100 * report.macro_f1:>9.2f}")
        lines.append("")
        lines.append("confusion (rows gold, cols predicted):")
        header = "".join(f"{c.value:>8}" for c in CLASSES)
        lines.append(f"{'':<8}{header}")
        for c in CLASSES:
            row = "".join(f"{int(n):>8}" for n in report.confusion[c.index])
            lines.append(f"{c.value:<8}{row}")
    if report.ai_rates is not None:
        lines.append("")
        rates = "  ".join(
            f"{c.value}={_fmt_rate(report.ai_rates[c])}" for c in CLASSES
        )
        lines.append(f"predicted AI rate (%): {rates}")
        lines.append(f"average accuracy (%): {_fmt_rate(report.average_accuracy)}")
        robust = "-" if report.style_robust is None else ("yes" if report.style_robust else "no")
        lines.append(f"style robust: {robust}")
    if report.any_ai_rate is not None:
        lines.append(f"any AI involvement (%): {report.any_ai_rate:.2f}")
    if report.unparsed:
        lines.append(f"unparsed verdicts: {report.unparsed}")
    return "\n".join(lines) + "\n"


def confusion_to_csv(report: MetricReport, path) -> None:
    if report.confusion is None:
        raise ValidationError("report has no confusion matrix")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gold\\pred"] + [c.value for c in CLASSES])
        for c in CLASSES:
            writer.writerow([c.value] + [int(n) for n in report.confusion[c.index]])


def confusion_figure(report: MetricReport, path) -> None:
    """Render the confusion matrix as a heatmap image."""
    if report.confusion is None:
        raise ValidationError("report has no confusion matrix")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 3.5))
    im = ax.imshow(report.confusion, cmap="Blues")
    ax.set_xticks(range(len(CLASSES)), [c.value for c in CLASSES])
    ax.set_yticks(range(len(CLASSES)), [c.value for c in CLASSES])
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    for i in range(len(CLASSES)):
        for j in range(len(CLASSES)):
            ax.text(j, i, str(int(report.confusion[i, j])), ha="center", va="center")
    fig.colorbar(im)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def trend_rates(rows: Sequence[dict], group_by: Sequence[str] = ("venue", "year")) -> list[dict]:
    """Per-group any-AI / mix / pure-AI rates from prediction rows.

    Each row needs the grouping fields plus the predicted ``klass`` and
    ``mode``. Groups are sorted by their key values.
    """
    allowed = {"venue", "year"}
    bad = set(group_by) - allowed
    if bad:
        raise ValidationError(f"can only group by {sorted(allowed)}, got {sorted(bad)}")
    if not group_by:
        raise ValidationError("need at least one grouping field")
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = tuple(row.get(f) for f in group_by)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        members = groups[key]
        n = len(members)
        any_ai = 100.0 * sum(1 for r in members if r["mode"] != "hw") / n
        mix = 100.0 * sum(1 for r in members if r["klass"] == ContentClass.MIX.value) / n
        pure = 100.0 * sum(1 for r in members if r["klass"] == ContentClass.AI.value) / n
        entry = dict(zip(group_by, key))
        entry.update(
            {
                "n": n,
                "any_ai_rate": round(any_ai, 2),
                "mix_rate": round(mix, 2),
                "pure_ai_rate": round(pure, 2),
            }
        )
        out.append(entry)
    return out


def trend_figure(trends: Sequence[dict], group_by: Sequence[str], path) -> None:
    """Grouped bar chart of the three involvement rates per group."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    labels = ["/".join(str(t[f]) for f in group_by) for t in trends]
    x = np.arange(len(trends))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(trends)), 3.5))
    ax.bar(x - width, [t["any_ai_rate"] for t in trends], width, label="any AI involvement")
    ax.bar(x, [t["mix_rate"] for t in trends], width, label="mix content")
    ax.bar(x + width, [t["pure_ai_rate"] for t in trends], width, label="pure AI content")
    ax.set_xticks(x, labels, rotation=30, ha="right")
    ax.set_ylabel("% of reviews")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_json(data, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_trend_csv(trends: Iterable[dict], group_by: Sequence[str], path) -> None:
    fields = list(group_by) + ["n", "any_ai_rate", "mix_rate", "pure_ai_rate"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in trends:
            writer.writerow(row)
