"""Command-line entry point.

Subcommands: train, predict, eval, forge, split, report. Exit codes: 0
success, 1 validation/configuration error (bad inputs, missing files),
2 runtime failure (gateway exhaustion, divergence). Outputs are staged
in temporary locations and moved into place only on success, and every
command drops a resolved-config snapshot beside its outputs.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import uuid
from pathlib import Path
from typing import Optional, Sequence

from .config import RunConfig, load_config
from .corpus import read_corpus, stratified_split, write_corpus
from .errors import (
    ConfigError,
    DivergenceError,
    EmptyAfterCleanError,
    ForgeError,
    GatewayError,
    ValidationError,
)
from .forge import TemplateSet, forge_many
from .gateway import GenerationParams, gateway_from_config
from .metrics import ternary_report
from .model import Checkpoint, predict, train
from .reporting import (
    confusion_figure,
    confusion_to_csv,
    report_to_dict,
    report_to_text,
    trend_figure,
    trend_rates,
    write_json,
    write_trend_csv,
)
from .taxonomy import CollaborationMode, ContentClass, mode_to_class


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp-{uuid.uuid4().hex[:8]}")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _atomic_publish_dir(tmp: Path, target: Path) -> None:
    if target.exists():
        shutil.rmtree(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp.rename(target)


def _write_snapshot(cfg: RunConfig, command: str, args: dict, beside: Path, inside: bool) -> None:
    snapshot = {"command": command, "args": args, "config": cfg.to_dict()}
    text = json.dumps(snapshot, indent=2, default=str) + "\n"
    if inside:
        _atomic_write_text(beside / "resolved_config.json", text)
    else:
        _atomic_write_text(beside.with_name(beside.name + ".resolved_config.json"), text)


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return rows


def _row_class(row: dict, path: Path) -> ContentClass:
    if "klass" in row:
        try:
            return ContentClass(row["klass"])
        except ValueError as exc:
            raise ValidationError(f"{path}: bad klass {row['klass']!r}") from exc
    if "mode" in row:
        return mode_to_class(CollaborationMode(row["mode"]))
    raise ValidationError(f"{path}: row {row.get('id')!r} has neither klass nor mode")


# -- commands -----------------------------------------------------------------

def _cmd_split(args, cfg: RunConfig) -> int:
    records = read_corpus(_require_file(args.input))
    try:
        parts = tuple(float(x) for x in args.ratios.split(":"))
    except ValueError as exc:
        raise ValidationError(f"bad ratios {args.ratios!r}; expected like 8:1:1") from exc
    if len(parts) != 3:
        raise ValidationError(f"bad ratios {args.ratios!r}; expected three numbers")
    seed = args.seed if args.seed is not None else cfg.train.seed
    splits = stratified_split(records, parts, seed=seed)
    out_dir = Path(args.out_dir)
    tmp = out_dir.parent / f".{out_dir.name}.tmp-{uuid.uuid4().hex[:8]}"
    tmp.mkdir(parents=True)
    try:
        for name, records_out in zip(("train", "val", "test"), splits):
            write_corpus(records_out, tmp / f"{name}.jsonl")
        _atomic_publish_dir(tmp, out_dir)
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _write_snapshot(cfg, "split", {"ratios": args.ratios, "seed": seed}, out_dir, inside=True)
    for name, records_out in zip(("train", "val", "test"), splits):
        print(f"{name}: {len(records_out)} records -> {out_dir / (name + '.jsonl')}")
    return 0


def _cmd_train(args, cfg: RunConfig) -> int:
    train_path = args.train or cfg.corpus.get("train")
    val_path = args.val or cfg.corpus.get("val")
    if not train_path or not val_path:
        raise ConfigError("train needs --train and --val (or corpus.train/corpus.val in config)")
    train_set = read_corpus(_require_file(train_path))
    val_set = read_corpus(_require_file(val_path))
    checkpoint = train(train_set, val_set, cfg.train, encoder=dict(cfg.encoder),
                       hwmg_style=cfg.hwmg_style)
    out = Path(args.out)
    checkpoint.save(out)
    _write_snapshot(cfg, "train", {"train": str(train_path), "val": str(val_path)}, out,
                    inside=False)
    print(f"checkpoint -> {out} (best epoch {checkpoint.best_epoch}, "
          f"val macro F1 {checkpoint.best_val_macro_f1:.4f})")
    return 0


def _cmd_predict(args, cfg: RunConfig) -> int:
    ckpt = Checkpoint.load(_require_file(args.checkpoint))
    rows = _read_jsonl(_require_file(args.input))
    for i, row in enumerate(rows):
        if "id" not in row or "text" not in row:
            raise ValidationError(f"{args.input}: row {i} needs id and text fields")
    preds = predict([row["text"] for row in rows], ckpt, threshold=args.threshold)
    out = Path(args.out)
    lines = []
    for row, pred in zip(rows, preds):
        lines.append(json.dumps({
            "id": row["id"],
            "venue": row.get("venue", ""),
            "year": row.get("year", 0),
            "klass": pred.klass.value,
            "sources": [s.value for s in pred.sources],
            "styles": [f.value for f in pred.styles],
            "mode": pred.mode.value,
            "scores": pred.scores,
            "low_confidence": pred.low_confidence,
        }, ensure_ascii=False))
    _atomic_write_text(out, "\n".join(lines) + "\n")
    _write_snapshot(cfg, "predict",
                    {"checkpoint": args.checkpoint, "input": args.input,
                     "threshold": args.threshold},
                    out, inside=False)
    print(f"{len(preds)} predictions -> {out}")
    return 0


def _cmd_eval(args, cfg: RunConfig) -> int:
    pred_path = _require_file(args.pred)
    gold_path = _require_file(args.gold)
    pred_rows = _read_jsonl(pred_path)
    gold_rows = _read_jsonl(gold_path)
    preds_by_id = {row["id"]: row for row in pred_rows}
    golds_by_id = {row["id"]: row for row in gold_rows}
    if set(preds_by_id) != set(golds_by_id):
        only_p = sorted(set(preds_by_id) - set(golds_by_id))[:3]
        only_g = sorted(set(golds_by_id) - set(preds_by_id))[:3]
        raise ValidationError(
            f"prediction and gold ids differ (pred-only {only_p}, gold-only {only_g})"
        )
    order = [row["id"] for row in gold_rows]
    golds = [_row_class(golds_by_id[i], gold_path) for i in order]
    preds = [_row_class(preds_by_id[i], pred_path) for i in order]
    mode_preds = None
    if all("mode" in preds_by_id[i] for i in order):
        mode_preds = [CollaborationMode(preds_by_id[i]["mode"]) for i in order]
    report = ternary_report(preds, golds, mode_preds)

    out_dir = Path(args.out_dir)
    tmp = out_dir.parent / f".{out_dir.name}.tmp-{uuid.uuid4().hex[:8]}"
    tmp.mkdir(parents=True)
    try:
        write_json(report_to_dict(report), tmp / "report.json")
        (tmp / "report.txt").write_text(report_to_text(report), encoding="utf-8")
        confusion_to_csv(report, tmp / "confusion.csv")
        confusion_figure(report, tmp / "confusion.png")
        _atomic_publish_dir(tmp, out_dir)
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _write_snapshot(cfg, "eval", {"pred": args.pred, "gold": args.gold}, out_dir, inside=True)
    print(report_to_text(report))
    return 0


def _cmd_forge(args, cfg: RunConfig) -> int:
    records = read_corpus(_require_file(args.input))
    target = CollaborationMode(args.mode)
    entry = cfg.gateway_entry(args.gateway)
    gateway = gateway_from_config(entry)
    params = GenerationParams(**entry.get("params", {}))
    templates = TemplateSet.load(cfg.templates_dir) if cfg.templates_dir else None

    papers = {}
    if args.papers:
        for row in _read_jsonl(_require_file(args.papers)):
            papers[row["id"]] = row["paper_content"]
    examples: Optional[list[str]] = None
    if args.examples:
        example_rows = _read_jsonl(_require_file(args.examples))
        examples = [row["text"] for row in example_rows[:2]]

    forged = forge_many(
        records, target, gateway,
        params=params, templates=templates, workers=args.workers,
        paper_content=papers if target in (CollaborationMode.HWMG, CollaborationMode.MG) else None,
        examples=examples,
    )
    out = Path(args.out)
    write_corpus(forged, out)
    _write_snapshot(cfg, "forge",
                    {"input": args.input, "mode": args.mode, "gateway": args.gateway},
                    out, inside=False)
    print(f"{len(forged)} {target.value} records -> {out}")
    return 0


def _cmd_report(args, cfg: RunConfig) -> int:
    pred_rows = _read_jsonl(_require_file(args.pred))
    group_by = [g.strip() for g in args.group_by.split(",") if g.strip()]
    for i, row in enumerate(pred_rows):
        if "klass" not in row or "mode" not in row:
            raise ValidationError(f"{args.pred}: row {i} needs klass and mode fields")
    trends = trend_rates(pred_rows, group_by)

    out_dir = Path(args.out_dir)
    tmp = out_dir.parent / f".{out_dir.name}.tmp-{uuid.uuid4().hex[:8]}"
    tmp.mkdir(parents=True)
    try:
        write_json(trends, tmp / "trends.json")
        write_trend_csv(trends, group_by, tmp / "trends.csv")
        trend_figure(trends, group_by, tmp / "trends.png")
        if args.gold:
            gold_rows = _read_jsonl(_require_file(args.gold))
            golds_by_id = {row["id"]: row for row in gold_rows}
            pairs = [(row, golds_by_id.get(row["id"])) for row in pred_rows]
            missing = [row["id"] for row, gold in pairs if gold is None]
            if missing:
                raise ValidationError(f"--gold is missing ids {missing[:3]}")
            report = ternary_report(
                [ContentClass(row["klass"]) for row, _ in pairs],
                [_row_class(gold, Path(args.gold)) for _, gold in pairs],
            )
            confusion_to_csv(report, tmp / "confusion.csv")
            confusion_figure(report, tmp / "confusion.png")
            write_json(report_to_dict(report), tmp / "report.json")
        _atomic_publish_dir(tmp, out_dir)
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _write_snapshot(cfg, "report", {"pred": args.pred, "group_by": args.group_by},
                    out_dir, inside=True)
    for row in trends:
        label = "/".join(str(row[g]) for g in group_by)
        print(f"{label}: n={row['n']} any_ai={row['any_ai_rate']:.2f}% "
              f"mix={row['mix_rate']:.2f}% pure_ai={row['pure_ai_rate']:.2f}%")
    return 0


# -- dispatch -----------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reviewdet", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML/JSON run config")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", parents=[common], help="stratified train/val/test split")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratios", default="8:1:1")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", parents=[common], help="fine-tune the detector")
    p.add_argument("--train", default=None)
    p.add_argument("--val", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", parents=[common], help="classify reviews with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("eval", parents=[common], help="score predictions against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("forge", parents=[common],
                       help="construct a collaboration mode via a gateway")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mode", required=True, choices=[m.value for m in CollaborationMode
                                                     if m is not CollaborationMode.HW])
    p.add_argument("--gateway", required=True, help="gateway name from the config")
    p.add_argument("--out", required=True)
    p.add_argument("--papers", default=None, help="JSONL of {id, paper_content}")
    p.add_argument("--examples", default=None, help="JSONL of example reviews")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", parents=[common], help="per-venue AI involvement trends")
    p.add_argument("--pred", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--group-by", default="venue,year")
    p.add_argument("--gold", default=None)
    return parser


_COMMANDS = {
    "split": _cmd_split,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "forge": _cmd_forge,
    "report": _cmd_report,
}


def dispatch(argv: Sequence[str]) -> int:
    """Run one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except (ValidationError, ConfigError, FileNotFoundError, EmptyAfterCleanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GatewayError, ForgeError, DivergenceError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
