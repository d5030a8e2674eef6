"""Synthetic corpora for exercising the pipeline end to end.

Generated records cover every valid (mode, generator, editor) stratum
and carry planted token-distribution signatures: disjoint content-word
pools per content class, marker words per mode, and marker words per
agent. The signals make classes separable by construction, which is
what the training smoke tests and the split-invariant tests need.
"""

from __future__ import annotations

from random import Random
from typing import Iterator

from .corpus import ReviewRecord
from .taxonomy import (
    MODES,
    CollaborationMode,
    ContentClass,
    Provenance,
    SourceLabel,
    mode_to_class,
)

_AI_MODELS = tuple(s for s in SourceLabel if s is not SourceLabel.HUMAN)

_VENUES = (("iclr", 2023), ("iclr", 2024), ("neurips", 2023), ("corl", 2024), ("emnlp", 2023))

# Disjoint word pools; suffixes keep crc32 buckets from colliding by luck.
_HUMAN_POOL = tuple(f"hand{c}{i}" for i, c in enumerate("abcdefghijklmnopqrst"))
_AI_POOL = tuple(f"synth{c}{i}" for i, c in enumerate("abcdefghijklmnopqrst"))
_COMMON_POOL = (
    "the", "paper", "method", "results", "section", "authors", "figure",
    "table", "baseline", "dataset", "clearly", "however", "overall",
)
_MODE_POOL = {m: tuple(f"{m.value}mark{i}" for i in range(8)) for m in MODES}
_AGENT_POOL = {
    s: tuple(f"{s.value.replace('.', '')}tok{i}" for i in range(6)) for s in SourceLabel
}


def _valid_provenances() -> list[Provenance]:
    out = [Provenance(CollaborationMode.HW, SourceLabel.HUMAN)]
    for mode in (CollaborationMode.HWMT, CollaborationMode.HWMP, CollaborationMode.HWMG):
        out.extend(Provenance(mode, SourceLabel.HUMAN, m) for m in _AI_MODELS)
    out.extend(Provenance(CollaborationMode.MG, m) for m in _AI_MODELS)
    out.extend(
        Provenance(CollaborationMode.MGMP, g, e)
        for g in _AI_MODELS
        for e in _AI_MODELS
        if e is not g
    )
    return out


ALL_PROVENANCES = tuple(_valid_provenances())


def _class_words(klass: ContentClass, rng: Random, k: int) -> list[str]:
    if klass is ContentClass.HUMAN:
        return rng.choices(_HUMAN_POOL, k=k)
    if klass is ContentClass.AI:
        return rng.choices(_AI_POOL, k=k)
    half = k // 2
    return rng.choices(_HUMAN_POOL, k=half) + rng.choices(_AI_POOL, k=k - half)


def _record_text(p: Provenance, rng: Random) -> str:
    n = rng.randint(60, 140)
    n_class = int(n * 0.55)
    n_mode = int(n * 0.15)
    n_agent = int(n * 0.15)
    n_common = n - n_class - n_mode - n_agent
    words = _class_words(mode_to_class(p.mode), rng, n_class)
    words += rng.choices(_MODE_POOL[p.mode], k=n_mode)
    agents = [p.generator] + ([p.editor] if p.editor is not None else [])
    pool = [w for a in agents for w in _AGENT_POOL[a]]
    words += rng.choices(pool, k=n_agent)
    words += rng.choices(_COMMON_POOL, k=n_common)
    rng.shuffle(words)
    return " ".join(words)


def _provenance_cycle(rng: Random) -> Iterator[Provenance]:
    """Yield provenances so the three classes stay balanced while every
    stratum keeps appearing."""
    by_mode = {m: [p for p in ALL_PROVENANCES if p.mode is m] for m in MODES}
    cursors = {m: 0 for m in MODES}
    # one draw per class: human picks among hw/hwmt/hwmp, ai between mg/mgmp
    human_modes = (CollaborationMode.HW, CollaborationMode.HWMT, CollaborationMode.HWMP)
    ai_modes = (CollaborationMode.MG, CollaborationMode.MGMP)
    turn = 0
    while True:
        if turn % 3 == 0:
            mode = human_modes[(turn // 3) % 3]
        elif turn % 3 == 1:
            mode = CollaborationMode.HWMG
        else:
            mode = ai_modes[(turn // 3) % 2]
        options = by_mode[mode]
        yield options[cursors[mode] % len(options)]
        cursors[mode] += 1
        turn += 1


def build_synthetic_corpus(n: int, seed: int = 42) -> list[ReviewRecord]:
    """Generate ``n`` records with planted class/mode/agent signatures."""
    rng = Random(seed)
    cycle = _provenance_cycle(rng)
    records = []
    for i in range(n):
        p = next(cycle)
        venue, year = _VENUES[i % len(_VENUES)]
        records.append(
            ReviewRecord(
                id=f"syn{i:05d}",
                text=_record_text(p, rng),
                provenance=p,
                venue=venue,
                year=year,
            )
        )
    return records
