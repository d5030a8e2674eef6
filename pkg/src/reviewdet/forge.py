"""Forge collaboration modes from human-written reviews.

Each non-hw mode is produced by filling that mode's prompt template,
calling an LLM gateway (twice for the back-translation mode), cleaning
the response, and stamping provenance: translation/polish/co-author
modes keep a human generator and record the gateway as editor; the
generated mode records the gateway as generator; the paraphrase mode
keeps the source generator and must use a different model as editor.
Source records are never modified.
"""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence

from .corpus import ReviewRecord, clean
from .errors import EmptyAfterCleanError, ForgeError, GatewayError, ValidationError
from .gateway import GenerationParams, LlmGateway, MockGateway, RetryPolicy, call_with_retry
from .taxonomy import CollaborationMode, Provenance, SourceLabel

FORGE_TEMPLATES = ("hwmt_en2cn", "hwmt_cn2en", "hwmp", "hwmg", "mg", "mgmp")


@dataclass(frozen=True)
class TemplateSet:
    """Prompt templates keyed by name, loaded from a versioned directory."""

    templates: dict

    @classmethod
    def load(cls, directory=None) -> "TemplateSet":
        """Load *.txt templates; defaults to the packaged set. A custom
        directory must define every forging template and may override
        the detector prompts."""
        packaged = resources.files("reviewdet").joinpath("templates")
        templates = {
            entry.name[: -len(".txt")]: entry.read_text("utf-8")
            for entry in packaged.iterdir()
            if entry.name.endswith(".txt")
        }
        if directory is not None:
            directory = Path(directory)
            overrides = {p.stem: p.read_text("utf-8") for p in sorted(directory.glob("*.txt"))}
            missing = set(FORGE_TEMPLATES) - set(overrides)
            if missing:
                raise ValidationError(
                    f"template directory {directory} is missing: {sorted(missing)}"
                )
            for name in FORGE_TEMPLATES:
                templates[name] = overrides[name]
            for name, text in overrides.items():
                templates[name] = text
        return cls(templates=templates)

    def render(self, name: str, **fields: str) -> str:
        if name not in self.templates:
            raise ValidationError(f"no template named {name!r}")
        try:
            return self.templates[name].format(**fields)
        except KeyError as exc:
            raise ValidationError(f"template {name!r} needs placeholder {exc}") from exc


_DEFAULT_TEMPLATES: TemplateSet | None = None


def default_templates() -> TemplateSet:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = TemplateSet.load()
    return _DEFAULT_TEMPLATES


_REVIEW_BLOCK = re.compile(
    r"Review:\n(.*?)(?:\n+Only output|\n+Paper content|\s*$)", re.DOTALL
)


def extract_review(prompt: str) -> str:
    """Pull the review payload back out of a rendered forging prompt.

    Mock gateways use this to transform just the review body instead of
    the whole prompt.
    """
    match = _REVIEW_BLOCK.search(prompt)
    if not match:
        raise ValidationError("prompt has no review block")
    return match.group(1).strip()


def uppercase_review_mock(model: SourceLabel, name: str = "mock-upper") -> MockGateway:
    """Deterministic editor double: uppercases the review body and adds
    the kind of chatter the cleaning stage must strip."""

    def respond(prompt: str, params: GenerationParams) -> str:
        return "Here is the polished review:\n" + extract_review(prompt).upper()

    return MockGateway(model=model, respond=respond, name=name)


def identity_review_mock(model: SourceLabel, name: str = "mock-identity") -> MockGateway:
    """Deterministic double that returns the review body unchanged, so
    back-translation round-trips exactly."""

    def respond(prompt: str, params: GenerationParams) -> str:
        return extract_review(prompt)

    return MockGateway(model=model, respond=respond, name=name)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


def forge(
    record: ReviewRecord,
    target_mode: CollaborationMode,
    gateway: LlmGateway,
    *,
    params: GenerationParams = GenerationParams(),
    paper_content: Optional[str] = None,
    examples: Optional[Sequence[str]] = None,
    templates: Optional[TemplateSet] = None,
    retry: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = time.sleep,
) -> ReviewRecord:
    """Produce a new record of ``target_mode`` from a source record.

    Inputs per mode: the co-author mode needs ``paper_content``; the
    generated mode needs ``paper_content`` plus two example reviews; the
    paraphrase mode takes a machine-generated source record and a
    gateway whose model differs from that record's generator. All other
    modes take a human-written source.
    """
    tpl = templates or default_templates()
    _require(target_mode is not CollaborationMode.HW, "hw records are collected, not forged")
    _require(gateway.model is not SourceLabel.HUMAN, "forging gateways must be model-backed")
    mode = record.provenance.mode
    if target_mode is CollaborationMode.MGMP:
        _require(
            mode is CollaborationMode.MG,
            f"mgmp forging needs an mg source record, got {mode.value}",
        )
        _require(
            gateway.model is not record.provenance.generator,
            "mgmp paraphrasing needs a different model than the generator "
            f"({record.provenance.generator.value})",
        )
    else:
        _require(
            mode is CollaborationMode.HW,
            f"{target_mode.value} forging needs an hw source record, got {mode.value}",
        )
    if target_mode is CollaborationMode.HWMG:
        _require(paper_content is not None, "hwmg forging needs paper_content")
    if target_mode is CollaborationMode.MG:
        _require(paper_content is not None, "mg forging needs paper_content")
        _require(
            examples is not None and len(examples) == 2,
            "mg forging needs exactly two example reviews",
        )

    def call(prompt: str) -> str:
        return call_with_retry(gateway, prompt, params, retry, sleep=sleep)

    try:
        if target_mode is CollaborationMode.HWMT:
            cn = call(tpl.render("hwmt_en2cn", en_review=record.text))
            raw = call(tpl.render("hwmt_cn2en", cn_review=cn))
        elif target_mode is CollaborationMode.HWMP:
            raw = call(tpl.render("hwmp", review=record.text))
        elif target_mode is CollaborationMode.HWMG:
            raw = call(tpl.render("hwmg", review=record.text, paper_content=paper_content))
        elif target_mode is CollaborationMode.MG:
            raw = call(
                tpl.render(
                    "mg", example1=examples[0], example2=examples[1], paper_content=paper_content
                )
            )
        else:  # MGMP
            raw = call(tpl.render("mgmp", review=record.text))
        text = clean(raw)
    except (GatewayError, EmptyAfterCleanError) as exc:
        raise ForgeError(
            f"forging {target_mode.value} from record {record.id} failed: {exc}"
        ) from exc

    if target_mode is CollaborationMode.MG:
        provenance = Provenance(mode=target_mode, generator=gateway.model)
    elif target_mode is CollaborationMode.MGMP:
        provenance = Provenance(
            mode=target_mode, generator=record.provenance.generator, editor=gateway.model
        )
    else:
        provenance = Provenance(
            mode=target_mode, generator=SourceLabel.HUMAN, editor=gateway.model
        )
    return ReviewRecord(
        id=f"{record.id}-{target_mode.value}",
        text=text,
        provenance=provenance,
        venue=record.venue,
        year=record.year,
        meta={
            "gateway": gateway.name,
            "generation_params": params.to_dict(),
            "source_id": record.id,
        },
    )


def forge_many(
    records: Sequence[ReviewRecord],
    target_mode: CollaborationMode,
    gateway: LlmGateway,
    *,
    workers: int = 1,
    paper_content=None,
    **kwargs,
) -> list[ReviewRecord]:
    """Forge a batch; results keep the input order regardless of which
    worker finishes first. ``paper_content`` may be one string for all
    records or a mapping from record id to content. Worker count is
    capped by the gateway's ``max_concurrency`` when it declares one."""
    if isinstance(paper_content, dict):
        missing = [r.id for r in records if r.id not in paper_content]
        if missing:
            raise ValidationError(f"paper content missing for records {missing[:3]}")
        contents = [paper_content[r.id] for r in records]
    else:
        contents = [paper_content] * len(records)
    cap = getattr(gateway, "max_concurrency", None)
    if cap:
        workers = min(workers, cap)
    if workers <= 1:
        return [
            forge(r, target_mode, gateway, paper_content=c, **kwargs)
            for r, c in zip(records, contents)
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(forge, r, target_mode, gateway, paper_content=c, **kwargs)
            for r, c in zip(records, contents)
        ]
        return [f.result() for f in futures]
