"""Closed label universe for review provenance.

Defines the six collaboration modes, the ternary content classes, the
per-agent source labels and the grouped style families, plus every
ground-truth mapping between them. All enumerations serialize to fixed
lowercase strings, and label vectors index members in declaration order
so checkpoints and reports stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError


class CollaborationMode(Enum):
    """How a review was produced (human and/or LLM, and in what order)."""

    HW = "hw"          # human-written
    HWMT = "hwmt"      # human-written, machine-translated (back-translation)
    HWMP = "hwmp"      # human-written, machine-polished
    HWMG = "hwmg"      # human-written, machine-generated additions (co-authored)
    MG = "mg"          # machine-generated
    MGMP = "mgmp"      # machine-generated, machine-paraphrased by a second model

    @property
    def index(self) -> int:
        return _MODE_INDEX[self]


class ContentClass(Enum):
    """Who authored the substantive content, independent of styling."""

    HUMAN = "human"
    MIX = "mix"
    AI = "ai"

    @property
    def index(self) -> int:
        return _CLASS_INDEX[self]


class SourceLabel(Enum):
    """A content-originating agent; model versions stay distinct."""

    HUMAN = "human"
    CLAUDE = "claude"
    DEEPSEEK = "deepseek"
    GEMINI = "gemini"
    GPT = "gpt"
    LLAMA = "llama"
    QWEN25 = "qwen2.5"
    QWEN3 = "qwen3"

    @property
    def index(self) -> int:
        return _SOURCE_INDEX[self]

    @property
    def display(self) -> str:
        return _DISPLAY[self.value]


class StyleFamily(Enum):
    """A model family with a shared surface style; versions collapse."""

    HUMAN = "human"
    CLAUDE = "claude"
    DEEPSEEK = "deepseek"
    GEMINI = "gemini"
    GPT = "gpt"
    LLAMA = "llama"
    QWEN = "qwen"

    @property
    def index(self) -> int:
        return _FAMILY_INDEX[self]

    @property
    def display(self) -> str:
        return _DISPLAY[self.value]


MODES = tuple(CollaborationMode)
CLASSES = tuple(ContentClass)
SOURCES = tuple(SourceLabel)
FAMILIES = tuple(StyleFamily)

_MODE_INDEX = {m: i for i, m in enumerate(MODES)}
_CLASS_INDEX = {c: i for i, c in enumerate(CLASSES)}
_SOURCE_INDEX = {s: i for i, s in enumerate(SOURCES)}
_FAMILY_INDEX = {f: i for i, f in enumerate(FAMILIES)}

_DISPLAY = {
    "human": "Human",
    "claude": "Claude",
    "deepseek": "DeepSeek",
    "gemini": "Gemini",
    "gpt": "GPT",
    "llama": "Llama",
    "qwen2.5": "Qwen2.5",
    "qwen3": "Qwen3",
    "qwen": "Qwen",
}

_MODE_TO_CLASS = {
    CollaborationMode.HW: ContentClass.HUMAN,
    CollaborationMode.HWMT: ContentClass.HUMAN,
    CollaborationMode.HWMP: ContentClass.HUMAN,
    CollaborationMode.HWMG: ContentClass.MIX,
    CollaborationMode.MG: ContentClass.AI,
    CollaborationMode.MGMP: ContentClass.AI,
}

# Style ground truth for the co-authored mode is a policy choice, not a
# structural fact; both policies fit the multi-label style head.
HWMG_STYLE_POLICIES = ("dual", "editor_only")


def mode_to_class(mode: CollaborationMode) -> ContentClass:
    """Map a collaboration mode to its content class (total function)."""
    return _MODE_TO_CLASS[mode]


def model_to_family(model: SourceLabel) -> StyleFamily:
    """Collapse a source label to its style family (Qwen versions merge)."""
    if model in (SourceLabel.QWEN25, SourceLabel.QWEN3):
        return StyleFamily.QWEN
    return StyleFamily(model.value)


@dataclass(frozen=True)
class Provenance:
    """Who produced a review: the mode, the initial content generator,
    and the agent that last restyled the text (absent for hw and mg).
    """

    mode: CollaborationMode
    generator: SourceLabel
    editor: SourceLabel | None = None

    def __post_init__(self) -> None:
        mode, gen, ed = self.mode, self.generator, self.editor
        if mode is CollaborationMode.HW:
            if gen is not SourceLabel.HUMAN or ed is not None:
                raise ValidationError(
                    f"hw requires generator=human and no editor, got {gen.value}/{ed}"
                )
        elif mode in (CollaborationMode.HWMT, CollaborationMode.HWMP, CollaborationMode.HWMG):
            if gen is not SourceLabel.HUMAN:
                raise ValidationError(f"{mode.value} requires generator=human, got {gen.value}")
            if ed is None or ed is SourceLabel.HUMAN:
                raise ValidationError(f"{mode.value} requires a non-human editor, got {ed}")
        elif mode is CollaborationMode.MG:
            if gen is SourceLabel.HUMAN or ed is not None:
                raise ValidationError(
                    f"mg requires a non-human generator and no editor, got {gen.value}/{ed}"
                )
        else:  # MGMP
            if gen is SourceLabel.HUMAN:
                raise ValidationError("mgmp requires a non-human generator")
            if ed is None or ed is SourceLabel.HUMAN:
                raise ValidationError(f"mgmp requires a non-human editor, got {ed}")

    @property
    def klass(self) -> ContentClass:
        return mode_to_class(self.mode)

    def pair_name(self) -> str:
        """Display name of the agents involved, e.g. "Llama-Gemini" for a
        review generated by Llama then paraphrased by Gemini."""
        if self.mode is CollaborationMode.MGMP:
            assert self.editor is not None
            return f"{self.generator.display}-{self.editor.display}"
        if self.mode is CollaborationMode.MG:
            return self.generator.display
        if self.mode is CollaborationMode.HW:
            return SourceLabel.HUMAN.display
        assert self.editor is not None
        return self.editor.display


def content_source_labels(p: Provenance) -> frozenset[SourceLabel]:
    """Agents credited with the substantive content of a review."""
    mode = p.mode
    if mode in (CollaborationMode.HW, CollaborationMode.HWMT, CollaborationMode.HWMP):
        return frozenset({SourceLabel.HUMAN})
    if mode in (CollaborationMode.MG, CollaborationMode.MGMP):
        return frozenset({p.generator})
    assert p.editor is not None
    return frozenset({SourceLabel.HUMAN, p.editor})


def style_family_labels(p: Provenance, hwmg_style: str = "dual") -> frozenset[StyleFamily]:
    """Model families credited with the surface style of a review.

    The last agent to touch the text owns the style. For the co-authored
    mode, ``hwmg_style`` selects between crediting both contributors
    ("dual", the default: verbatim human sentences survive the edit) and
    crediting the editor family alone ("editor_only").
    """
    if hwmg_style not in HWMG_STYLE_POLICIES:
        raise ValidationError(f"unknown hwmg style policy {hwmg_style!r}")
    mode = p.mode
    if mode is CollaborationMode.HW:
        return frozenset({StyleFamily.HUMAN})
    last = p.editor if p.editor is not None else p.generator
    if mode is CollaborationMode.HWMG and hwmg_style == "dual":
        return frozenset({StyleFamily.HUMAN, model_to_family(last)})
    return frozenset({model_to_family(last)})


def source_vector(labels: frozenset[SourceLabel]) -> tuple[int, ...]:
    """Binary indicator vector over the 8 source labels, canonical order."""
    return tuple(1 if s in labels else 0 for s in SOURCES)


def style_vector(labels: frozenset[StyleFamily]) -> tuple[int, ...]:
    """Binary indicator vector over the 7 style families, canonical order."""
    return tuple(1 if f in labels else 0 for f in FAMILIES)


@dataclass(frozen=True)
class LabelBundle:
    """The four training targets for one record: content class, binary
    source vector (8), binary style vector (7), and collaboration mode."""

    klass: ContentClass
    sources: tuple[int, ...]
    styles: tuple[int, ...]
    mode: CollaborationMode

    def __post_init__(self) -> None:
        if len(self.sources) != len(SOURCES) or len(self.styles) != len(FAMILIES):
            raise ValidationError("label vectors must have widths 8 and 7")

    @classmethod
    def from_provenance(cls, p: Provenance, hwmg_style: str = "dual") -> "LabelBundle":
        return cls(
            klass=mode_to_class(p.mode),
            sources=source_vector(content_source_labels(p)),
            styles=style_vector(style_family_labels(p, hwmg_style)),
            mode=p.mode,
        )
