"""Prompt-based LLM detector baseline.

Renders the zero- or few-shot detector prompt, queries a gateway, and
parses the verdict by trimming, lowercasing and exact-matching one of
human / mix / ai. Anything else raises a parse error carrying the raw
response; batch scoring counts those verdicts as wrong for every class
and reports them separately.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .errors import VerdictParseError
from .forge import TemplateSet, default_templates
from .gateway import GenerationParams, LlmGateway, RetryPolicy, call_with_retry
from .taxonomy import ContentClass

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FewShotExamples:
    """Exactly one in-context example per class; keep the same instance
    across gateways so comparisons stay fair."""

    human: str
    mix: str
    ai: str


def render_detector_prompt(
    text: str,
    shots: Optional[FewShotExamples] = None,
    templates: Optional[TemplateSet] = None,
) -> str:
    """Fill the zero-shot or few-shot detector template."""
    tpl = templates or default_templates()
    if shots is None:
        return tpl.render("detector_zero_shot", text=text)
    return tpl.render(
        "detector_few_shot",
        human_example=shots.human,
        mix_example=shots.mix,
        ai_example=shots.ai,
        text=text,
    )


def parse_verdict(response: str) -> ContentClass:
    """Strict verdict parser: trimmed, lowercased, exact match only."""
    token = response.strip().lower()
    for klass in ContentClass:
        if token == klass.value:
            return klass
    raise VerdictParseError(response)


def llm_detector(
    text: str,
    gateway: LlmGateway,
    shots: Optional[FewShotExamples] = None,
    *,
    params: GenerationParams = GenerationParams(),
    templates: Optional[TemplateSet] = None,
    retry: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = time.sleep,
) -> ContentClass:
    """Classify one text with a prompted LLM."""
    prompt = render_detector_prompt(text, shots, templates)
    response = call_with_retry(gateway, prompt, params, retry, sleep=sleep)
    return parse_verdict(response)


def run_llm_detector(
    texts: Sequence[str],
    gateway: LlmGateway,
    shots: Optional[FewShotExamples] = None,
    **kwargs,
) -> tuple[list[Optional[ContentClass]], list[tuple[int, str]]]:
    """Classify a batch; unparseable verdicts come back as None along
    with (index, raw response) pairs for the log."""
    verdicts: list[Optional[ContentClass]] = []
    failures: list[tuple[int, str]] = []
    for i, text in enumerate(texts):
        try:
            verdicts.append(llm_detector(text, gateway, shots, **kwargs))
        except VerdictParseError as exc:
            logger.warning("record %d: unparseable verdict %r", i, exc.raw)
            verdicts.append(None)
            failures.append((i, exc.raw))
    return verdicts, failures
