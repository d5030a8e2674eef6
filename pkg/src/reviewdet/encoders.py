"""Text encoder adapters.

The model consumes any encoder that maps a batch of texts to a
(batch, dim) float matrix deterministically. Two adapters ship here: a
trainable hashed bag-of-tokens encoder used throughout the tests, and a
transformer-backed adapter for real runs (optional dependency).
"""

from __future__ import annotations

import zlib
from typing import Protocol, Sequence, runtime_checkable

import torch
from torch import nn

from .errors import ValidationError


@runtime_checkable
class EncoderAdapter(Protocol):
    """Minimal surface the model needs from an encoder."""

    name: str
    dim: int
    max_length: int

    def encode(self, texts: Sequence[str]) -> torch.Tensor: ...


class ToyEncoder(nn.Module):
    """Hashed bag-of-tokens encoder.

    Tokens are lowercased whitespace splits, hashed with crc32 into a
    fixed bucket table, and a record's embedding is the mean of its
    token embeddings. Texts longer than ``max_length`` tokens are
    truncated. Embeddings start near zero so a short training run is
    dominated by learned structure rather than the random init.
    """

    name = "toy"

    def __init__(self, dim: int = 64, buckets: int = 4096, max_length: int = 2048,
                 init_std: float = 1e-4):
        super().__init__()
        if dim <= 0 or buckets <= 0 or max_length <= 0:
            raise ValidationError("dim, buckets and max_length must be positive")
        self.dim = dim
        self.buckets = buckets
        self.max_length = max_length
        self.init_std = init_std
        self.embedding = nn.EmbeddingBag(buckets, dim, mode="mean")
        nn.init.normal_(self.embedding.weight, std=init_std)

    def tokenize(self, text: str) -> list[str]:
        return text.lower().split()[: self.max_length]

    def token_ids(self, text: str) -> list[int]:
        return [zlib.crc32(tok.encode("utf-8")) % self.buckets for tok in self.tokenize(text)]

    def encode(self, texts: Sequence[str]) -> torch.Tensor:
        if len(texts) == 0:
            raise ValidationError("cannot encode an empty batch")
        flat: list[int] = []
        offsets: list[int] = []
        for text in texts:
            offsets.append(len(flat))
            flat.extend(self.token_ids(text))
        ids = torch.tensor(flat, dtype=torch.long)
        offs = torch.tensor(offsets, dtype=torch.long)
        return self.embedding(ids, offs)

    forward = encode

    def spec(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "buckets": self.buckets,
            "max_length": self.max_length,
            "init_std": self.init_std,
        }


class TransformerEncoder(nn.Module):
    """Adapter around a Hugging Face encoder (requires ``transformers``).

    The record embedding is the hidden state at the model's designated
    classification position (first token).
    """

    def __init__(self, model_name: str, max_length: int = 2048):
        super().__init__()
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise ImportError(
                "TransformerEncoder needs the 'transformers' package; install reviewdet[hf]"
            ) from exc
        self.name = f"hf:{model_name}"
        self.model_name = model_name
        self.max_length = max_length
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.dim = int(self.model.config.hidden_size)

    def encode(self, texts: Sequence[str]) -> torch.Tensor:  # pragma: no cover - needs weights
        if len(texts) == 0:
            raise ValidationError("cannot encode an empty batch")
        enc = self.tokenizer(
            list(texts), truncation=True, max_length=self.max_length,
            padding=True, return_tensors="pt",
        )
        hidden = self.model(**enc).last_hidden_state
        return hidden[:, 0]

    forward = encode

    def spec(self) -> dict:  # pragma: no cover - needs weights
        return {"name": "hf", "model_name": self.model_name, "max_length": self.max_length}


def build_encoder(spec) -> nn.Module:
    """Construct an encoder from a spec dict, or pass an instance through."""
    if isinstance(spec, nn.Module):
        return spec
    if not isinstance(spec, dict) or "name" not in spec:
        raise ValidationError("encoder spec must be a dict with a 'name' key")
    kind = spec["name"]
    kwargs = {k: v for k, v in spec.items() if k != "name"}
    if kind == "toy":
        return ToyEncoder(**kwargs)
    if kind == "hf":
        return TransformerEncoder(**kwargs)
    raise ValidationError(f"unknown encoder {kind!r}")
