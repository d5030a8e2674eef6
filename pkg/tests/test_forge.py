"""Forging: template rendering, provenance stamping, cleaning-in-the-
pipeline, retries, and byte-stable golden outputs under mock gateways."""

import json
from pathlib import Path

import pytest

from reviewdet.corpus import ReviewRecord, record_to_row
from reviewdet.errors import ForgeError, ValidationError
from reviewdet.forge import (
    TemplateSet,
    default_templates,
    extract_review,
    forge,
    forge_many,
    identity_review_mock,
    uppercase_review_mock,
)
from reviewdet.gateway import (
    FlakyGateway,
    GenerationParams,
    MockGateway,
    RetryPolicy,
    canned_mock,
)
from reviewdet.taxonomy import CollaborationMode, Provenance, SourceLabel

M, S = CollaborationMode, SourceLabel
GOLDEN = Path(__file__).parent / "golden" / "forged_all_modes.jsonl"

HW_TEXT = (
    "The paper proposes a margin-based detector for collaborative text.\n"
    "\n"
    "Strengths:\n"
    "1. The problem framing is clear and well motivated.\n"
    "2. Ablations cover every component.\n"
    "\n"
    "Weaknesses:\n"
    "1. The corpus is limited to one scientific domain.\n"
    "\n"
    "Could the split protocol leak near-duplicate reviews across folds?"
)

PAPER = (
    "We study detection of machine involvement in peer reviews. Our corpus "
    "covers six collaboration patterns and three content classes."
)

MG_REVIEW = (
    "Sure, here is the review:\n"
    "The submission tackles detector robustness with a cost-aware margin. "
    "The evaluation is broad and the gains are consistent. Some notation "
    "is dense, and the limitations section deserves more depth."
)


def hw_record() -> ReviewRecord:
    return ReviewRecord(
        id="hw0001", text=HW_TEXT, provenance=Provenance(M.HW, S.HUMAN),
        venue="iclr", year=2022,
    )


def hwmg_mock() -> MockGateway:
    def respond(prompt, params):
        review = extract_review(prompt)
        return (
            "Here is the elevated review:\n"
            + review
            + "\n\nAdded analysis: the reported gains persist across both corpora."
        )

    return MockGateway(model=S.QWEN3, respond=respond, name="mock-coauthor")


def paraphrase_mock() -> MockGateway:
    def respond(prompt, params):
        words = extract_review(prompt).split()
        return "Certainly! Here is the paraphrase:\n" + " ".join(reversed(words))

    return MockGateway(model=S.GEMINI, respond=respond, name="mock-paraphrase")


def forge_all_modes() -> list[ReviewRecord]:
    source = hw_record()
    hwmt = forge(source, M.HWMT, identity_review_mock(S.LLAMA))
    hwmp = forge(source, M.HWMP, uppercase_review_mock(S.GEMINI))
    hwmg = forge(source, M.HWMG, hwmg_mock(), paper_content=PAPER)
    mg = forge(
        source, M.MG, canned_mock(S.LLAMA, MG_REVIEW, name="mock-generator"),
        paper_content=PAPER, examples=(HW_TEXT, "Another short example review."),
    )
    mgmp = forge(mg, M.MGMP, paraphrase_mock())
    return [hwmt, hwmp, hwmg, mg, mgmp]


class TestModes:
    def test_hwmt_identity_round_trip(self):
        record = forge(hw_record(), M.HWMT, identity_review_mock(S.LLAMA))
        assert record.text == HW_TEXT
        assert record.provenance == Provenance(M.HWMT, S.HUMAN, S.LLAMA)

    def test_hwmp_uppercase_and_cleaned(self):
        record = forge(hw_record(), M.HWMP, uppercase_review_mock(S.GEMINI))
        assert record.text == HW_TEXT.upper()
        assert "Here is" not in record.text
        assert record.provenance == Provenance(M.HWMP, S.HUMAN, S.GEMINI)

    def test_hwmg_needs_paper_content(self):
        with pytest.raises(ValidationError, match="paper_content"):
            forge(hw_record(), M.HWMG, hwmg_mock())

    def test_hwmg_provenance(self):
        record = forge(hw_record(), M.HWMG, hwmg_mock(), paper_content=PAPER)
        assert record.provenance == Provenance(M.HWMG, S.HUMAN, S.QWEN3)
        assert record.text.startswith("The paper proposes")

    def test_mg_needs_examples_and_paper(self):
        gw = canned_mock(S.LLAMA, MG_REVIEW)
        with pytest.raises(ValidationError):
            forge(hw_record(), M.MG, gw, paper_content=PAPER)
        with pytest.raises(ValidationError):
            forge(hw_record(), M.MG, gw, examples=("a", "b"))

    def test_mg_provenance_no_editor(self):
        record = forge(
            hw_record(), M.MG, canned_mock(S.LLAMA, MG_REVIEW),
            paper_content=PAPER, examples=("a", "b"),
        )
        assert record.provenance == Provenance(M.MG, S.LLAMA)
        assert record.text.startswith("The submission tackles")  # chatter stripped

    def test_mgmp_needs_mg_source(self):
        with pytest.raises(ValidationError, match="mg source"):
            forge(hw_record(), M.MGMP, paraphrase_mock())

    def test_mgmp_rejects_same_model(self):
        mg = forge(
            hw_record(), M.MG, canned_mock(S.LLAMA, MG_REVIEW),
            paper_content=PAPER, examples=("a", "b"),
        )
        with pytest.raises(ValidationError, match="different model"):
            forge(mg, M.MGMP, canned_mock(S.LLAMA, "anything"))

    def test_mgmp_pair_name_matches_generator_editor(self):
        records = forge_all_modes()
        assert records[-1].provenance.pair_name() == "Llama-Gemini"

    def test_hw_target_rejected(self):
        with pytest.raises(ValidationError):
            forge(hw_record(), M.HW, identity_review_mock(S.LLAMA))

    def test_human_gateway_rejected(self):
        gw = canned_mock(S.HUMAN, "text")
        with pytest.raises(ValidationError):
            forge(hw_record(), M.HWMP, gw)

    def test_source_record_untouched(self):
        source = hw_record()
        row_before = record_to_row(source)
        forge(source, M.HWMP, uppercase_review_mock(S.GEMINI))
        assert record_to_row(source) == row_before

    def test_metadata_records_gateway_and_params(self):
        params = GenerationParams(temperature=0.7, top_p=0.9)
        record = forge(hw_record(), M.HWMP, uppercase_review_mock(S.GEMINI), params=params)
        assert record.meta["gateway"] == "mock-upper"
        assert record.meta["generation_params"]["temperature"] == 0.7
        assert record.meta["source_id"] == "hw0001"

    def test_all_forged_labels_derivable(self):
        for record in forge_all_modes():
            bundle = record.labels
            assert sum(bundle.sources) >= 1
            assert sum(bundle.styles) >= 1


class TestRetries:
    def test_recovers_within_budget(self):
        flaky = FlakyGateway(inner=uppercase_review_mock(S.GEMINI), failures=2)
        record = forge(
            hw_record(), M.HWMP, flaky,
            retry=RetryPolicy(max_attempts=3, base_delay=0.0), sleep=lambda s: None,
        )
        assert record.text == HW_TEXT.upper()
        assert flaky.calls == 3

    def test_exhaustion_raises_forge_error_with_context(self):
        flaky = FlakyGateway(inner=uppercase_review_mock(S.GEMINI), failures=5)
        with pytest.raises(ForgeError, match="hwmp.*hw0001"):
            forge(
                hw_record(), M.HWMP, flaky,
                retry=RetryPolicy(max_attempts=2, base_delay=0.0), sleep=lambda s: None,
            )


class TestForgeMany:
    def _sources(self, n=6):
        return [
            ReviewRecord(
                id=f"hw{i:04d}", text=f"{HW_TEXT}\nExtra note {i}.",
                provenance=Provenance(M.HW, S.HUMAN), venue="iclr", year=2022,
            )
            for i in range(n)
        ]

    def test_order_preserved_with_workers(self):
        records = self._sources()
        sequential = forge_many(records, M.HWMP, uppercase_review_mock(S.GEMINI), workers=1)
        threaded = forge_many(records, M.HWMP, uppercase_review_mock(S.GEMINI), workers=4)
        assert [r.id for r in threaded] == [r.id for r in sequential]
        assert [r.text for r in threaded] == [r.text for r in sequential]

    def test_per_record_paper_content(self):
        records = self._sources(2)
        papers = {records[0].id: "paper zero", records[1].id: "paper one"}
        seen = []

        def respond(prompt, params):
            seen.append(prompt)
            return extract_review(prompt)

        gw = MockGateway(model=S.QWEN3, respond=respond)
        forge_many(records, M.HWMG, gw, paper_content=papers)
        assert "paper zero" in seen[0] and "paper one" in seen[1]

    def test_missing_paper_content_rejected(self):
        records = self._sources(2)
        with pytest.raises(ValidationError, match="missing"):
            forge_many(records, M.HWMG, hwmg_mock(), paper_content={records[0].id: "only one"})


class TestTemplates:
    def test_packaged_set_complete(self):
        tpl = default_templates()
        for name in ("hwmt_en2cn", "hwmt_cn2en", "hwmp", "hwmg", "mg", "mgmp"):
            assert name in tpl.templates

    def test_placeholders_fill(self):
        tpl = default_templates()
        rendered = tpl.render("mg", example1="E1", example2="E2", paper_content="PC")
        assert "E1" in rendered and "E2" in rendered and "PC" in rendered
        assert "{" not in rendered

    def test_missing_placeholder_rejected(self):
        with pytest.raises(ValidationError):
            default_templates().render("hwmp")

    def test_custom_directory_must_be_complete(self, tmp_path):
        (tmp_path / "hwmp.txt").write_text("Polish: {review}")
        with pytest.raises(ValidationError, match="missing"):
            TemplateSet.load(tmp_path)

    def test_custom_directory_overrides(self, tmp_path):
        for name in ("hwmt_en2cn", "hwmt_cn2en", "hwmp", "hwmg", "mg", "mgmp"):
            (tmp_path / f"{name}.txt").write_text(f"custom {name}")
        tpl = TemplateSet.load(tmp_path)
        assert tpl.templates["hwmp"] == "custom hwmp"
        # detector prompts fall back to the packaged versions
        assert "expert AI generated peer review detector" in tpl.templates["detector_zero_shot"]

    def test_extract_review_from_each_layout(self):
        tpl = default_templates()
        assert extract_review(tpl.render("hwmp", review="BODY")) == "BODY"
        assert extract_review(tpl.render("mgmp", review="BODY")) == "BODY"
        assert extract_review(tpl.render("hwmg", review="BODY", paper_content="PC")) == "BODY"
        assert extract_review(tpl.render("hwmt_en2cn", en_review="BODY")) == "BODY"
        assert extract_review(tpl.render("hwmt_cn2en", cn_review="BODY")) == "BODY"


class TestGolden:
    def test_forged_records_match_golden_bytes(self):
        lines = [
            json.dumps(record_to_row(r), ensure_ascii=False) for r in forge_all_modes()
        ]
        produced = "\n".join(lines) + "\n"
        assert produced.encode("utf-8") == GOLDEN.read_bytes()
