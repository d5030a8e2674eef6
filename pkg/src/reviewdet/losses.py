"""Training objectives for the multi-task detector.

The main head is trained with a cost-sensitive margin loss: cosine
logits get a base margin subtracted from the ground-truth class and an
extra cost margin added to the opposing polar class (human vs. ai are
the costly confusions), then scaled and fed to cross-entropy. The
auxiliary heads use multi-label BCE (content source, style family) and
plain cross-entropy (collaboration mode). All functions accept a single
record (1-D logits) or a batch (2-D); batch reductions are means so the
combination weights are batch-size invariant.

Margins are a training-time construct: inference reads raw cosines and
never applies them.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping, Sequence

import torch

from .errors import ValidationError
from .taxonomy import (
    CLASSES,
    FAMILIES,
    MODES,
    SOURCES,
    CollaborationMode,
    ContentClass,
    LabelBundle,
)

_HUMAN = ContentClass.HUMAN.index
_MIX = ContentClass.MIX.index
_AI = ContentClass.AI.index


@dataclass(frozen=True)
class LossConfig:
    """Margin, scale and combination weights for all four losses."""

    s: float = 30.0
    m_base: float = 0.25
    m_cost: float = 0.25
    alpha: float = 0.4
    beta: float = 0.4
    gamma: float = 0.2

    def __post_init__(self) -> None:
        if not self.s > 0:
            raise ValidationError(f"scale s must be positive, got {self.s}")
        for name in ("m_base", "m_cost", "alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative, got {getattr(self, name)}")

    def to_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "LossConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown loss config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class MultiTaskOutputs:
    """Per-record model outputs: class cosines z (3), content-source
    logits u (8), style logits v (7), mode logits w (6). Each field is a
    1-D tensor for one record or a 2-D (batch, width) tensor."""

    z: torch.Tensor
    u: torch.Tensor
    v: torch.Tensor
    w: torch.Tensor


@dataclass
class LabelBatch:
    """Collated training targets: class indices, binary source/style
    matrices, and mode indices."""

    klass: torch.Tensor
    sources: torch.Tensor
    styles: torch.Tensor
    mode: torch.Tensor


def collate_labels(labels: Sequence[LabelBundle], dtype: torch.dtype = torch.float32) -> LabelBatch:
    """Stack per-record label bundles into batch tensors."""
    if not labels:
        raise ValidationError("cannot collate an empty label sequence")
    return LabelBatch(
        klass=torch.tensor([lb.klass.index for lb in labels], dtype=torch.long),
        sources=torch.tensor([lb.sources for lb in labels], dtype=dtype),
        styles=torch.tensor([lb.styles for lb in labels], dtype=dtype),
        mode=torch.tensor([lb.mode.index for lb in labels], dtype=torch.long),
    )


def _as_2d(x, width: int, what: str) -> tuple[torch.Tensor, bool]:
    t = torch.as_tensor(x)
    if not t.is_floating_point():
        t = t.double()
    if t.ndim == 1:
        t = t.unsqueeze(0)
        single = True
    elif t.ndim == 2:
        single = False
    else:
        raise ValidationError(f"{what} must be 1-D or 2-D, got shape {tuple(t.shape)}")
    if t.shape[-1] != width:
        raise ValidationError(f"{what} must have width {width}, got {t.shape[-1]}")
    return t, single


def _index_targets(y, members, batch: int, what: str) -> torch.Tensor:
    """Normalize enum / int / sequence targets to a (batch,) index tensor."""
    if isinstance(y, (ContentClass, CollaborationMode)):
        idx = torch.full((batch,), y.index, dtype=torch.long)
    elif isinstance(y, int):
        idx = torch.full((batch,), y, dtype=torch.long)
    elif isinstance(y, torch.Tensor):
        idx = y.long().reshape(-1)
    else:
        idx = torch.tensor(
            [m.index if isinstance(m, (ContentClass, CollaborationMode)) else int(m) for m in y],
            dtype=torch.long,
        )
    if idx.numel() != batch:
        raise ValidationError(f"{what}: got {idx.numel()} targets for {batch} rows")
    if idx.min() < 0 or idx.max() >= len(members):
        raise ValidationError(f"{what}: target index out of range 0..{len(members) - 1}")
    return idx


def csm_logits(z, y, cfg: LossConfig) -> torch.Tensor:
    """Apply the training margins to cosine class logits and scale.

    The ground-truth entry loses ``m_base``; when the truth is a polar
    class (human or ai) the opposite polar entry gains ``m_cost``; every
    entry is then multiplied by ``s``. The input is never mutated.
    """
    z2, single = _as_2d(z, len(CLASSES), "class logits")
    idx = _index_targets(y, CLASSES, z2.shape[0], "content class")
    base = torch.zeros_like(z2)
    base[torch.arange(z2.shape[0]), idx] = cfg.m_base
    cost = torch.zeros_like(z2)
    cost[idx == _HUMAN, _AI] = cfg.m_cost
    cost[idx == _AI, _HUMAN] = cfg.m_cost
    out = cfg.s * (z2 - base + cost)
    return out.squeeze(0) if single else out


def _nll_from_logits(logits: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
    # max-shifted log-softmax keeps large scaled logits finite
    logp = torch.log_softmax(logits, dim=-1)
    return -logp.gather(-1, idx.unsqueeze(-1)).squeeze(-1)


def csm_loss(z, y, cfg: LossConfig) -> torch.Tensor:
    """Cross-entropy over margin-adjusted scaled cosine logits.

    Returns a scalar tensor; the batch form is the mean over records.
    """
    z2, _ = _as_2d(z, len(CLASSES), "class logits")
    if not torch.isfinite(z2).all():
        raise ValidationError("class logits must be finite")
    idx = _index_targets(y, CLASSES, z2.shape[0], "content class")
    starred = csm_logits(z2, idx, cfg)
    return _nll_from_logits(starred, idx).mean()


def bce_multilabel(logits, targets) -> torch.Tensor:
    """Mean binary cross-entropy with logits over a multi-label head.

    Uses the overflow-free form max(u, 0) - u*y + log(1 + exp(-|u|));
    serves both the 8-wide content-source head and the 7-wide style head.
    """
    u = torch.as_tensor(logits)
    if not u.is_floating_point():
        u = u.double()
    t = torch.as_tensor(targets)
    if u.shape != t.shape:
        raise ValidationError(f"logit shape {tuple(u.shape)} != target shape {tuple(t.shape)}")
    if u.ndim not in (1, 2):
        raise ValidationError(f"logits must be 1-D or 2-D, got shape {tuple(u.shape)}")
    if not torch.isfinite(u).all():
        raise ValidationError("logits must be finite")
    t = t.to(u.dtype)
    if not ((t == 0) | (t == 1)).all():
        raise ValidationError("targets must be binary (0/1)")
    loss = u.clamp(min=0) - u * t + torch.log1p(torch.exp(-u.abs()))
    return loss.mean()


def mode_ce(logits, y) -> torch.Tensor:
    """Cross-entropy over the 6-wide collaboration-mode head (mean)."""
    w2, _ = _as_2d(logits, len(MODES), "mode logits")
    if not torch.isfinite(w2).all():
        raise ValidationError("mode logits must be finite")
    idx = _index_targets(y, MODES, w2.shape[0], "collaboration mode")
    return _nll_from_logits(w2, idx).mean()


def combine_parts(main, con, sty, mode, cfg: LossConfig):
    """Weighted sum of the four loss parts: main + a*con + b*sty + g*mode."""
    return main + cfg.alpha * con + cfg.beta * sty + cfg.gamma * mode


def composite_loss(
    outputs: MultiTaskOutputs,
    labels: LabelBundle | LabelBatch | Sequence[LabelBundle],
    cfg: LossConfig,
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Combined training objective.

    Returns ``(total, parts)`` where parts holds the unweighted main,
    con, sty and mode losses for logging and ablation reports.
    """
    if isinstance(labels, LabelBundle):
        batch = collate_labels([labels])
    elif isinstance(labels, LabelBatch):
        batch = labels
    else:
        batch = collate_labels(list(labels))
    sources = torch.as_tensor(batch.sources)
    styles = torch.as_tensor(batch.styles)
    u, _ = _as_2d(outputs.u, len(SOURCES), "source logits")
    v, _ = _as_2d(outputs.v, len(FAMILIES), "style logits")
    parts = {
        "main": csm_loss(outputs.z, batch.klass, cfg),
        "con": bce_multilabel(u, sources.reshape(u.shape)),
        "sty": bce_multilabel(v, styles.reshape(v.shape)),
        "mode": mode_ce(outputs.w, batch.mode),
    }
    total = combine_parts(parts["main"], parts["con"], parts["sty"], parts["mode"], cfg)
    return total, parts
