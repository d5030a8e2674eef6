"""Review records, corpus files, cleaning, length filtering and splits.

Corpus files are JSON Lines with fields id, text, mode, generator,
editor (nullable), venue, year. Label vectors are derived from
provenance on load and never stored.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from random import Random
from typing import Callable, Iterable, Sequence

from .errors import ConfigError, EmptyAfterCleanError, ValidationError
from .taxonomy import CollaborationMode, LabelBundle, Provenance, SourceLabel

Tokenizer = Callable[[str], Sequence[str]]


def whitespace_tokenize(text: str) -> list[str]:
    """Adapter-free fallback tokenizer."""
    return text.split()


@dataclass
class ReviewRecord:
    """One review text with full provenance and derived labels."""

    id: str
    text: str
    provenance: Provenance
    venue: str = ""
    year: int = 0
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("record id must be nonempty")
        if not self.text.strip():
            raise ValidationError(f"record {self.id}: text must be nonempty")

    @cached_property
    def labels(self) -> LabelBundle:
        return LabelBundle.from_provenance(self.provenance)


_RECORD_FIELDS = ("id", "text", "mode", "generator", "editor", "venue", "year")


def record_to_row(record: ReviewRecord) -> dict:
    """Serialize a record to the corpus JSONL row shape."""
    p = record.provenance
    return {
        "id": record.id,
        "text": record.text,
        "mode": p.mode.value,
        "generator": p.generator.value,
        "editor": p.editor.value if p.editor is not None else None,
        "venue": record.venue,
        "year": record.year,
    }


def record_from_row(row: dict) -> ReviewRecord:
    """Parse a corpus JSONL row; unknown fields are rejected."""
    unknown = set(row) - set(_RECORD_FIELDS)
    if unknown:
        raise ValidationError(f"unknown corpus fields: {sorted(unknown)}")
    missing = {"id", "text", "mode", "generator"} - set(row)
    if missing:
        raise ValidationError(f"corpus row missing fields: {sorted(missing)}")
    try:
        mode = CollaborationMode(row["mode"])
        generator = SourceLabel(row["generator"])
        editor = SourceLabel(row["editor"]) if row.get("editor") is not None else None
    except ValueError as exc:
        raise ValidationError(f"record {row.get('id')}: {exc}") from exc
    return ReviewRecord(
        id=str(row["id"]),
        text=str(row["text"]),
        provenance=Provenance(mode=mode, generator=generator, editor=editor),
        venue=str(row.get("venue", "")),
        year=int(row.get("year", 0)),
    )


def read_corpus(path) -> list[ReviewRecord]:
    """Load a JSONL corpus file."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            records.append(record_from_row(row))
    return records


def write_corpus(records: Iterable[ReviewRecord], path) -> None:
    """Write records as JSONL, atomically (temp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_row(record), ensure_ascii=False) + "\n")
    tmp.replace(path)


# -- cleaning ----------------------------------------------------------------

def _load_default_patterns() -> list[re.Pattern]:
    text = resources.files("reviewdet").joinpath("data/chatter_patterns.txt").read_text("utf-8")
    patterns = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            patterns.append(re.compile(line, re.IGNORECASE))
    return patterns


_DEFAULT_PATTERNS: list[re.Pattern] | None = None


def default_chatter_patterns() -> list[re.Pattern]:
    global _DEFAULT_PATTERNS
    if _DEFAULT_PATTERNS is None:
        _DEFAULT_PATTERNS = _load_default_patterns()
    return _DEFAULT_PATTERNS


def clean(text: str, patterns: Sequence[re.Pattern] | None = None) -> str:
    """Strip leading/trailing assistant-chatter lines.

    Lines at either end matching the pattern list (canned openers such
    as "Here is ...", closers such as "Hope this helps", code-fence
    wrappers) are removed until a fixpoint; interior lines are never
    touched, so the operation is idempotent. Raises if nothing remains.
    """
    if patterns is None:
        patterns = default_chatter_patterns()
    lines = text.split("\n")

    def is_chatter(line: str) -> bool:
        stripped = line.strip()
        return any(p.fullmatch(stripped) for p in patterns)

    start, end = 0, len(lines)
    while start < end and (not lines[start].strip() or is_chatter(lines[start])):
        start += 1
    while end > start and (not lines[end - 1].strip() or is_chatter(lines[end - 1])):
        end -= 1
    result = "\n".join(lines[start:end]).strip()
    if not result:
        raise EmptyAfterCleanError("no review content left after stripping chatter")
    return result


# -- length filtering --------------------------------------------------------

@dataclass(frozen=True)
class LengthBounds:
    """Inclusive token-count window derived from the human-written set."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not 0 < self.lo <= self.hi:
            raise ValidationError(f"need 0 < lo <= hi, got ({self.lo}, {self.hi})")


def _nearest_rank(sorted_counts: Sequence[int], percent: int) -> int:
    rank = max(1, -((-percent * len(sorted_counts)) // 100))  # ceil(percent * n / 100)
    return sorted_counts[rank - 1]


def length_bounds(
    hw_records: Sequence[ReviewRecord], tokenizer: Tokenizer = whitespace_tokenize
) -> LengthBounds:
    """5th..95th percentile token counts of the human-written set,
    nearest-rank rule."""
    if not hw_records:
        raise ConfigError("length bounds need a nonempty human-written set")
    for r in hw_records:
        if r.provenance.mode is not CollaborationMode.HW:
            raise ValidationError(f"record {r.id} is {r.provenance.mode.value}, expected hw")
    counts = sorted(len(tokenizer(r.text)) for r in hw_records)
    return LengthBounds(lo=_nearest_rank(counts, 5), hi=_nearest_rank(counts, 95))


def filter_by_length(
    records: Sequence[ReviewRecord],
    bounds: LengthBounds,
    tokenizer: Tokenizer = whitespace_tokenize,
) -> tuple[list[ReviewRecord], dict[CollaborationMode, dict[str, int]]]:
    """Keep records whose token count lies inside the inclusive bounds.

    Returns the surviving records in their original order plus a
    per-mode report of how many were dropped short / long.
    """
    kept: list[ReviewRecord] = []
    dropped: dict[CollaborationMode, dict[str, int]] = {}
    for record in records:
        n = len(tokenizer(record.text))
        if n < bounds.lo:
            dropped.setdefault(record.provenance.mode, {"short": 0, "long": 0})["short"] += 1
        elif n > bounds.hi:
            dropped.setdefault(record.provenance.mode, {"short": 0, "long": 0})["long"] += 1
        else:
            kept.append(record)
    return kept, dropped


# -- stratified split --------------------------------------------------------

def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    total = sum(ratios)
    quotas = [n * r / total for r in ratios]
    counts = [int(q) for q in quotas]
    shortfall = n - sum(counts)
    by_fraction = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in by_fraction[:shortfall]:
        counts[i] += 1
    return counts


def stratified_split(
    records: Sequence[ReviewRecord],
    ratios: tuple[float, float, float] = (8, 1, 1),
    seed: int = 42,
) -> tuple[list[ReviewRecord], list[ReviewRecord], list[ReviewRecord]]:
    """Split into train/val/test, stratified by (mode, generator, editor).

    Each stratum is shuffled with its own seed-derived RNG and allotted
    by largest-remainder apportionment, so every stratum deviates from
    the exact ratios by at most one record per split. Strata smaller
    than 3 records go entirely to train (with a warning). Output order
    within each split follows the input order.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValidationError(f"ratios must be three positive numbers, got {ratios}")
    strata: dict[tuple, list[int]] = {}
    for i, record in enumerate(records):
        p = record.provenance
        key = (p.mode.value, p.generator.value, p.editor.value if p.editor else "")
        strata.setdefault(key, []).append(i)

    assignment = [0] * len(records)  # 0 train, 1 val, 2 test
    for key in sorted(strata):
        members = strata[key]
        if len(members) < 3:
            warnings.warn(
                f"stratum {key} has only {len(members)} record(s); assigning all to train",
                stacklevel=2,
            )
            continue
        rng = Random(f"{seed}|{key[0]}|{key[1]}|{key[2]}")
        shuffled = members[:]
        rng.shuffle(shuffled)
        n_train, n_val, _ = _largest_remainder(len(members), ratios)
        for pos, idx in enumerate(shuffled):
            assignment[idx] = 0 if pos < n_train else (1 if pos < n_train + n_val else 2)

    splits: tuple[list[ReviewRecord], list[ReviewRecord], list[ReviewRecord]] = ([], [], [])
    for i, record in enumerate(records):
        splits[assignment[i]].append(record)
    return splits
