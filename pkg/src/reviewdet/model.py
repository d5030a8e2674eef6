"""Multi-head classifier: a pluggable text encoder feeding a
cosine-similarity class head and three linear auxiliary heads, plus the
training loop, checkpoint format and inference procedure.

Training minimizes the composite loss with margins applied and keeps
the checkpoint with the best validation macro F1 (ties go to the
earliest epoch). Inference reads raw cosines and never consults the
loss configuration, so margins cannot shift predictions.
"""

from __future__ import annotations

import copy
import hashlib
import json
import shutil
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .encoders import build_encoder
from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateEmbeddingError,
    DivergenceError,
    EncoderError,
    ValidationError,
)
from .losses import LossConfig, MultiTaskOutputs, collate_labels, composite_loss
from .metrics import confusion_and_f1
from .taxonomy import (
    CLASSES,
    FAMILIES,
    MODES,
    SOURCES,
    CollaborationMode,
    ContentClass,
    LabelBundle,
    SourceLabel,
    StyleFamily,
)


def cosine_similarities(x: torch.Tensor, weight: torch.Tensor) -> torch.Tensor:
    """Cosine similarity between embeddings and class reference rows.

    Accepts a single embedding (d,) or a batch (b, d); the result is
    clamped into [-1, 1] to absorb rounding.
    """
    single = x.ndim == 1
    x2 = x.unsqueeze(0) if single else x
    norms = x2.norm(dim=-1, keepdim=True)
    if (norms == 0).any():
        raise DegenerateEmbeddingError("zero-norm embedding has no direction")
    w = weight / weight.norm(dim=-1, keepdim=True)
    z = (x2 / norms) @ w.t()
    z = z.clamp(-1.0, 1.0)
    return z.squeeze(0) if single else z


class CosineHead(nn.Module):
    """Bias-free class head whose rows are unit reference vectors.

    Rows are re-normalized at every forward evaluation, so the stored
    parameter scale never leaks into the logits.
    """

    def __init__(self, num_classes: int, dim: int):
        super().__init__()
        self.weight = nn.Parameter(torch.randn(num_classes, dim))
        with torch.no_grad():
            self.weight /= self.weight.norm(dim=-1, keepdim=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return cosine_similarities(x, self.weight)


class MultiTaskModel(nn.Module):
    """Encoder plus the four task heads (class, source, style, mode)."""

    def __init__(self, encoder: nn.Module):
        super().__init__()
        self.encoder = encoder
        d = encoder.dim
        self.class_head = CosineHead(len(CLASSES), d)
        self.source_head = nn.Linear(d, len(SOURCES))
        self.style_head = nn.Linear(d, len(FAMILIES))
        self.mode_head = nn.Linear(d, len(MODES))

    def _encode(self, texts: Sequence[str]) -> torch.Tensor:
        try:
            return self.encoder.encode(list(texts))
        except Exception as exc:
            # locate the failing record so the error is actionable
            for i, t in enumerate(texts):
                try:
                    self.encoder.encode([t])
                except Exception:
                    raise EncoderError(f"encoder failed on record {i}: {exc}") from exc
            raise

    def forward(self, texts: Sequence[str]) -> MultiTaskOutputs:
        if len(texts) == 0:
            raise ValidationError("forward needs a nonempty batch of texts")
        x = self._encode(texts)
        return MultiTaskOutputs(
            z=self.class_head(x),
            u=self.source_head(x),
            v=self.style_head(x),
            w=self.mode_head(x),
        )


@dataclass(frozen=True)
class TrainConfig:
    """Fine-tuning hyperparameters; defaults match the shipped recipe."""

    epochs: int = 5
    max_seq_length: int = 2048
    learning_rate: float = 2e-5
    batch_size: int = 16
    weight_decay: float = 0.01
    seed: int = 42
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self) -> None:
        if self.epochs <= 0 or self.batch_size <= 0 or self.max_seq_length <= 0:
            raise ValidationError("epochs, batch_size and max_seq_length must be positive")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValidationError("learning_rate must be > 0 and weight_decay >= 0")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "max_seq_length": self.max_seq_length,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "loss": self.loss.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        loss = LossConfig.from_dict(data.pop("loss", {}))
        known = {"epochs", "max_seq_length", "learning_rate", "batch_size", "weight_decay", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(loss=loss, **data)


@dataclass
class Prediction:
    """One record's inference result; ``scores`` carries the raw class
    cosines plus sigmoid/softmax values for every head."""

    klass: ContentClass
    sources: tuple[SourceLabel, ...]
    styles: tuple[StyleFamily, ...]
    mode: CollaborationMode
    scores: dict[str, list[float]]
    low_confidence: dict[str, bool]


_TAXONOMY_ORDERS = {
    "modes": [m.value for m in MODES],
    "classes": [c.value for c in CLASSES],
    "sources": [s.value for s in SOURCES],
    "families": [f.value for f in FAMILIES],
}


@dataclass
class Checkpoint:
    """A trained model with its config snapshot and training history."""

    model: MultiTaskModel
    train_config: TrainConfig
    encoder_spec: dict
    history: list[dict]
    best_epoch: int
    best_val_macro_f1: float

    def save(self, path) -> Path:
        """Write the checkpoint directory atomically (temp dir + rename)."""
        path = Path(path)
        tmp = path.parent / f".{path.name}.tmp-{uuid.uuid4().hex[:8]}"
        tmp.mkdir(parents=True)
        try:
            torch.save(self.model.encoder.state_dict(), tmp / "encoder.pt")
            heads = {
                "class_head": self.model.class_head.state_dict(),
                "source_head": self.model.source_head.state_dict(),
                "style_head": self.model.style_head.state_dict(),
                "mode_head": self.model.mode_head.state_dict(),
            }
            torch.save(heads, tmp / "heads.pt")
            (tmp / "config.json").write_text(
                json.dumps(
                    {"train": self.train_config.to_dict(), "encoder": self.encoder_spec},
                    indent=2,
                )
                + "\n"
            )
            (tmp / "taxonomy.json").write_text(json.dumps(_TAXONOMY_ORDERS, indent=2) + "\n")
            (tmp / "log.json").write_text(
                json.dumps(
                    {
                        "best_epoch": self.best_epoch,
                        "best_val_macro_f1": self.best_val_macro_f1,
                        "history": self.history,
                    },
                    indent=2,
                )
                + "\n"
            )
            manifest = {
                name: hashlib.sha256((tmp / name).read_bytes()).hexdigest()
                for name in ("encoder.pt", "heads.pt", "config.json", "taxonomy.json", "log.json")
            }
            (tmp / "manifest.json").write_text(json.dumps({"files": manifest}, indent=2) + "\n")
            if path.exists():
                shutil.rmtree(path)
            tmp.rename(path)
        except Exception:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        manifest_file = path / "manifest.json"
        if not manifest_file.exists():
            raise CheckpointError(f"no manifest in {path}")
        manifest = json.loads(manifest_file.read_text())["files"]
        for name, digest in manifest.items():
            part = path / name
            if not part.exists():
                raise CheckpointError(f"checkpoint part missing: {name}")
            if hashlib.sha256(part.read_bytes()).hexdigest() != digest:
                raise CheckpointError(f"checkpoint part corrupt: {name}")
        config = json.loads((path / "config.json").read_text())
        orders = json.loads((path / "taxonomy.json").read_text())
        if orders != _TAXONOMY_ORDERS:
            raise CheckpointError("checkpoint was written with a different label universe")
        encoder = build_encoder(config["encoder"])
        encoder.load_state_dict(torch.load(path / "encoder.pt", weights_only=True))
        model = MultiTaskModel(encoder)
        heads = torch.load(path / "heads.pt", weights_only=True)
        model.class_head.load_state_dict(heads["class_head"])
        model.source_head.load_state_dict(heads["source_head"])
        model.style_head.load_state_dict(heads["style_head"])
        model.mode_head.load_state_dict(heads["mode_head"])
        log = json.loads((path / "log.json").read_text())
        return cls(
            model=model,
            train_config=TrainConfig.from_dict(config["train"]),
            encoder_spec=config["encoder"],
            history=log["history"],
            best_epoch=log["best_epoch"],
            best_val_macro_f1=log["best_val_macro_f1"],
        )


def _class_argmax(z_row: np.ndarray) -> ContentClass:
    # ties break to the lowest canonical index (np.argmax picks the first)
    return CLASSES[int(np.argmax(z_row))]


def _eval_macro_f1(model: MultiTaskModel, records, batch_size: int) -> float:
    model.eval()
    preds: list[ContentClass] = []
    golds: list[ContentClass] = []
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            out = model([r.text for r in chunk])
            z = out.z.detach().cpu().numpy()
            preds.extend(_class_argmax(row) for row in z)
            golds.extend(r.labels.klass for r in chunk)
    model.train()
    return confusion_and_f1(preds, golds).macro_f1


def train(
    train_set: Sequence,
    val_set: Sequence,
    cfg: TrainConfig,
    encoder=None,
    hwmg_style: str = "dual",
) -> Checkpoint:
    """Fine-tune the multi-task model and return the best checkpoint.

    ``encoder`` is an encoder spec dict or a ready adapter instance;
    when omitted a toy encoder capped at ``cfg.max_seq_length`` is
    built. Seeding happens before any parameter is created, so two runs
    with the same inputs and config produce identical results.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigError("train and validation splits must be nonempty")
    torch.manual_seed(cfg.seed)
    if encoder is None:
        encoder = {"name": "toy", "max_length": cfg.max_seq_length}
    if isinstance(encoder, dict):
        encoder = dict(encoder)
        encoder.setdefault("max_length", cfg.max_seq_length)
        spec = dict(encoder)
    else:
        spec = encoder.spec() if hasattr(encoder, "spec") else {"name": getattr(encoder, "name", "?")}
    model = MultiTaskModel(build_encoder(encoder))
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay
    )

    labels = [LabelBundle.from_provenance(r.provenance, hwmg_style) for r in train_set]
    texts = [r.text for r in train_set]
    n = len(train_set)
    shuffler = torch.Generator().manual_seed(cfg.seed)

    reported_parts = ["main"] + [
        name
        for name, weight in (("con", cfg.loss.alpha), ("sty", cfg.loss.beta), ("mode", cfg.loss.gamma))
        if weight > 0
    ]

    history: list[dict] = []
    best_state = None
    best_f1 = -1.0
    best_epoch = -1
    for epoch in range(1, cfg.epochs + 1):
        perm = torch.randperm(n, generator=shuffler).tolist()
        total_sum = 0.0
        part_sums = {name: 0.0 for name in reported_parts}
        for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start : start + cfg.batch_size]
            batch = collate_labels([labels[i] for i in idx])
            outputs = model([texts[i] for i in idx])
            finite = all(
                torch.isfinite(t).all() for t in (outputs.z, outputs.u, outputs.v, outputs.w)
            )
            if not finite:
                raise DivergenceError(
                    f"non-finite head outputs at epoch {epoch}, batch {batch_no}"
                )
            total, parts = composite_loss(outputs, batch, cfg.loss)
            if not torch.isfinite(total):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {batch_no}")
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            total_sum += total.item() * len(idx)
            for name in reported_parts:
                part_sums[name] += parts[name].item() * len(idx)
        val_f1 = _eval_macro_f1(model, val_set, cfg.batch_size)
        history.append(
            {
                "epoch": epoch,
                "train_loss": total_sum / n,
                "parts": {name: part_sums[name] / n for name in reported_parts},
                "val_macro_f1": val_f1,
            }
        )
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    return Checkpoint(
        model=model,
        train_config=cfg,
        encoder_spec=spec,
        history=history,
        best_epoch=best_epoch,
        best_val_macro_f1=best_f1,
    )


def predict(
    texts: Sequence[str],
    model: MultiTaskModel | Checkpoint,
    threshold: float = 0.5,
    batch_size: int = 64,
) -> list[Prediction]:
    """Run inference on raw cosines and head probabilities.

    Multi-label heads emit every label whose sigmoid exceeds the
    threshold; an empty set raises the head's low-confidence flag.
    """
    if isinstance(model, Checkpoint):
        model = model.model
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"threshold must be in (0, 1), got {threshold}")
    model.eval()
    results: list[Prediction] = []
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            out = model(list(texts[start : start + batch_size]))
            z = out.z.detach().cpu().numpy()
            u = torch.sigmoid(out.u).detach().cpu().numpy()
            v = torch.sigmoid(out.v).detach().cpu().numpy()
            w = torch.softmax(out.w, dim=-1).detach().cpu().numpy()
            for row in range(z.shape[0]):
                sources = tuple(s for j, s in enumerate(SOURCES) if u[row, j] > threshold)
                styles = tuple(f for j, f in enumerate(FAMILIES) if v[row, j] > threshold)
                results.append(
                    Prediction(
                        klass=_class_argmax(z[row]),
                        sources=sources,
                        styles=styles,
                        mode=MODES[int(np.argmax(w[row]))],
                        scores={
                            "class_cosines": [float(x) for x in z[row]],
                            "source_probs": [float(x) for x in u[row]],
                            "style_probs": [float(x) for x in v[row]],
                            "mode_probs": [float(x) for x in w[row]],
                        },
                        low_confidence={"sources": not sources, "styles": not styles},
                    )
                )
    return results
