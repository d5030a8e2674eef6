"""Detect AI involvement in peer-review text by content composition.

A review is classified as human, mix, or ai according to who authored
its substantive content, with auxiliary heads attributing the content
source, style family, and collaboration mode. The package also ships
the corpus tooling (cleaning, length filtering, stratified splits,
mode forging through LLM gateways) and the evaluation harness.
"""

from .taxonomy import (
    CollaborationMode,
    ContentClass,
    LabelBundle,
    Provenance,
    SourceLabel,
    StyleFamily,
    content_source_labels,
    mode_to_class,
    model_to_family,
    style_family_labels,
)
from .losses import LossConfig, MultiTaskOutputs, bce_multilabel, composite_loss, csm_logits, csm_loss, mode_ce
from .corpus import ReviewRecord, clean, filter_by_length, length_bounds, read_corpus, stratified_split, write_corpus
from .model import Checkpoint, MultiTaskModel, TrainConfig, predict, train
from .metrics import (
    MetricReport,
    any_ai_involvement,
    average_accuracy,
    confusion_and_f1,
    is_style_robust,
    map_fourway,
    strict_binary_outcomes,
)

__version__ = "0.1.0"
