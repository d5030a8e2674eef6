"""Run configuration files.

A run config is a YAML or JSON document with optional sections: train,
loss, encoder, corpus paths, gateway definitions, template directory,
output directory and the co-authored-style policy. Unknown keys are
rejected anywhere in the document, and every command writes a resolved
snapshot of the config it actually used beside its outputs. Gateway
credentials come from environment variables only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError
from .losses import LossConfig
from .model import TrainConfig
from .taxonomy import HWMG_STYLE_POLICIES

_TOP_KEYS = {
    "train", "loss", "encoder", "corpus", "gateways",
    "templates_dir", "output_dir", "hwmg_style",
}
_ENCODER_KEYS = {
    "toy": {"name", "dim", "buckets", "max_length", "init_std"},
    "hf": {"name", "model_name", "max_length"},
}
_GATEWAY_KEYS = {
    "mock": {"name", "kind", "model", "behavior", "params", "max_concurrency"},
    "http": {"name", "kind", "model", "url", "model_name", "api_key_env", "params",
             "max_concurrency"},
}
_PARAM_KEYS = {"temperature", "top_p", "max_tokens"}
_CORPUS_KEYS = {"train", "val", "test", "input"}


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class RunConfig:
    """Everything a command needs, resolved against defaults."""

    train: TrainConfig = field(default_factory=TrainConfig)
    encoder: dict = field(default_factory=lambda: {"name": "toy"})
    corpus: dict = field(default_factory=dict)
    gateways: list = field(default_factory=list)
    templates_dir: Optional[str] = None
    output_dir: str = "runs"
    hwmg_style: str = "dual"

    def gateway_entry(self, name: str) -> dict:
        for entry in self.gateways:
            if entry.get("name") == name:
                return entry
        known = [e.get("name") for e in self.gateways]
        raise ConfigError(f"no gateway named {name!r} in config (have {known})")

    def to_dict(self) -> dict:
        return {
            "train": self.train.to_dict(),
            "encoder": dict(self.encoder),
            "corpus": dict(self.corpus),
            "gateways": [dict(e) for e in self.gateways],
            "templates_dir": self.templates_dir,
            "output_dir": self.output_dir,
            "hwmg_style": self.hwmg_style,
        }


def parse_config(doc: dict) -> RunConfig:
    """Validate a raw config document and resolve it against defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    _reject_unknown(doc, _TOP_KEYS, "config")

    train_section = dict(doc.get("train", {}))
    if "loss" in train_section:
        raise ConfigError("loss settings belong under the top-level 'loss' key")
    loss = LossConfig.from_dict(doc.get("loss", {}))
    train_section["loss"] = loss.to_dict()
    train = TrainConfig.from_dict(train_section)

    encoder = dict(doc.get("encoder", {"name": "toy"}))
    kind = encoder.get("name")
    if kind not in _ENCODER_KEYS:
        raise ConfigError(f"unknown encoder name {kind!r}; choose from {sorted(_ENCODER_KEYS)}")
    _reject_unknown(encoder, _ENCODER_KEYS[kind], "encoder")

    corpus = dict(doc.get("corpus", {}))
    _reject_unknown(corpus, _CORPUS_KEYS, "corpus")

    gateways = []
    for i, entry in enumerate(doc.get("gateways", []) or []):
        entry = dict(entry)
        kind = entry.get("kind")
        if kind not in _GATEWAY_KEYS:
            raise ConfigError(
                f"gateway #{i}: unknown kind {kind!r}; choose from {sorted(_GATEWAY_KEYS)}"
            )
        _reject_unknown(entry, _GATEWAY_KEYS[kind], f"gateway #{i}")
        _reject_unknown(dict(entry.get("params", {})), _PARAM_KEYS, f"gateway #{i} params")
        gateways.append(entry)

    hwmg_style = doc.get("hwmg_style", "dual")
    if hwmg_style not in HWMG_STYLE_POLICIES:
        raise ConfigError(f"hwmg_style must be one of {HWMG_STYLE_POLICIES}")

    return RunConfig(
        train=train,
        encoder=encoder,
        corpus=corpus,
        gateways=gateways,
        templates_dir=doc.get("templates_dir"),
        output_dir=doc.get("output_dir", "runs"),
        hwmg_style=hwmg_style,
    )


def load_config(path: Optional[str]) -> RunConfig:
    """Load a config file (YAML or JSON); None means all defaults."""
    if path is None:
        return RunConfig()
    file = Path(path)
    if not file.exists():
        raise FileNotFoundError(f"config file not found: {file}")
    doc = yaml.safe_load(file.read_text(encoding="utf-8"))
    return parse_config(doc or {})
