"""Model: cosine head geometry, forward contract, training behavior,
checkpoint round trips, and inference."""

import zlib

import numpy as np
import pytest
import torch

from reviewdet.encoders import ToyEncoder, build_encoder
from reviewdet.errors import (
    CheckpointError,
    ConfigError,
    DegenerateEmbeddingError,
    DivergenceError,
    EncoderError,
    ValidationError,
)
from reviewdet.losses import LossConfig, collate_labels, composite_loss
from reviewdet.model import (
    Checkpoint,
    CosineHead,
    MultiTaskModel,
    TrainConfig,
    cosine_similarities,
    predict,
    train,
)
from reviewdet.synthetic import build_synthetic_corpus
from reviewdet.taxonomy import CLASSES

QUICK = TrainConfig(epochs=2, batch_size=16, max_seq_length=256)
SMALL_ENCODER = {"name": "toy", "dim": 16, "buckets": 256}


def small_corpus(n=120, seed=3):
    return build_synthetic_corpus(n, seed=seed)


class TestCosineSimilarities:
    def setup_method(self):
        torch.manual_seed(1)
        self.head = CosineHead(3, 8)

    def test_self_similarity_is_one(self):
        z = cosine_similarities(self.head.weight[0].detach(), self.head.weight.detach())
        assert z[0].item() == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal_is_zero(self):
        w = torch.eye(3, 8)
        x = torch.zeros(8)
        x[4] = 2.5
        z = cosine_similarities(x, w)
        assert torch.allclose(z, torch.zeros(3), atol=1e-7)

    def test_antipodal_is_minus_one(self):
        z = cosine_similarities(-3.0 * self.head.weight[2].detach(), self.head.weight.detach())
        assert z[2].item() == pytest.approx(-1.0, abs=1e-6)

    def test_range_bound(self):
        torch.manual_seed(7)
        x = torch.randn(32, 8) * 100
        z = cosine_similarities(x, self.head.weight.detach())
        assert (z >= -1).all() and (z <= 1).all()

    def test_zero_norm_rejected(self):
        with pytest.raises(DegenerateEmbeddingError):
            cosine_similarities(torch.zeros(8), self.head.weight.detach())

    def test_scale_invariance(self):
        x = torch.randn(8)
        z1 = cosine_similarities(x, self.head.weight.detach())
        z2 = cosine_similarities(7.3 * x, self.head.weight.detach())
        assert torch.allclose(z1, z2, atol=1e-6)


class TestCosineHead:
    def test_row_normalization_idempotent(self):
        torch.manual_seed(2)
        head = CosineHead(3, 16)
        with torch.no_grad():
            once = head.weight / head.weight.norm(dim=-1, keepdim=True)
            twice = once / once.norm(dim=-1, keepdim=True)
        assert torch.allclose(once, twice, atol=1e-7)

    def test_stored_scale_never_leaks(self):
        torch.manual_seed(2)
        head = CosineHead(3, 16)
        x = torch.randn(5, 16)
        z1 = head(x)
        with torch.no_grad():
            head.weight *= 11.0
        z2 = head(x)
        assert torch.allclose(z1, z2, atol=1e-6)


class TestToyEncoder:
    def test_hand_computable_embedding(self):
        enc = ToyEncoder(dim=4, buckets=8, init_std=0.0)
        with torch.no_grad():
            for b in range(8):
                enc.embedding.weight[b] = torch.arange(4, dtype=torch.float32) + b
        ida = zlib.crc32(b"aaa") % 8
        idb = zlib.crc32(b"bbb") % 8
        out = enc.encode(["aaa bbb aaa"])
        expected = (2 * (torch.arange(4.0) + ida) + (torch.arange(4.0) + idb)) / 3
        assert torch.allclose(out[0], expected, atol=1e-6)

    def test_case_and_truncation(self):
        enc = ToyEncoder(dim=4, buckets=64, max_length=2)
        assert enc.tokenize("Alpha BETA gamma") == ["alpha", "beta"]

    def test_deterministic(self):
        enc = ToyEncoder(dim=8, buckets=32)
        a = enc.encode(["some review text", "another"])
        b = enc.encode(["some review text", "another"])
        assert torch.equal(a, b)

    def test_spec_round_trip(self):
        enc = ToyEncoder(dim=8, buckets=32, max_length=10, init_std=0.5)
        clone = build_encoder(enc.spec())
        assert clone.spec() == enc.spec()

    def test_unknown_encoder_rejected(self):
        with pytest.raises(ValidationError):
            build_encoder({"name": "charcnn"})


class TestForward:
    def setup_method(self):
        torch.manual_seed(3)
        self.model = MultiTaskModel(ToyEncoder(dim=16, buckets=64))

    def test_shape_contract(self):
        out = self.model(["one review", "two reviews", "three"])
        assert out.z.shape == (3, 3)
        assert out.u.shape == (3, 8)
        assert out.v.shape == (3, 7)
        assert out.w.shape == (3, 6)

    def test_single_record_batch(self):
        out = self.model(["just one"])
        assert out.z.shape == (1, 3)

    def test_identical_texts_identical_rows(self):
        out = self.model(["same words here", "same words here"])
        for t in (out.z, out.u, out.v, out.w):
            assert torch.equal(t[0], t[1])

    def test_cosines_within_range(self):
        out = self.model(["alpha beta", "gamma delta epsilon"])
        assert (out.z >= -1).all() and (out.z <= 1).all()

    def test_empty_batch_rejected(self):
        with pytest.raises(ValidationError):
            self.model([])

    def test_hand_computed_cosines_on_toy_encoder(self):
        enc = ToyEncoder(dim=4, buckets=8, init_std=0.0)
        with torch.no_grad():
            for b in range(8):
                enc.embedding.weight[b] = torch.arange(4, dtype=torch.float32) + b
        model = MultiTaskModel(enc)
        with torch.no_grad():
            model.class_head.weight.copy_(torch.eye(3, 4))
        ida = zlib.crc32(b"aaa") % 8
        x = torch.arange(4.0) + ida  # single token -> mean is its embedding
        expected = x[:3] / x.norm()  # rows are unit basis vectors
        out = model(["aaa"])
        assert torch.allclose(out.z[0], expected, atol=1e-6)

    def test_encoder_failure_names_record(self):
        class Boomy(ToyEncoder):
            def encode(self, texts):
                if any("boom" in t for t in texts):
                    raise RuntimeError("kaput")
                return super().encode(texts)

        torch.manual_seed(0)
        model = MultiTaskModel(Boomy(dim=8, buckets=32))
        with pytest.raises(EncoderError, match="record 1"):
            model(["fine", "goes boom", "fine too"])


class TestTrain:
    def test_reaches_high_f1_on_separable_corpus(self):
        corpus = small_corpus(240)
        ckpt = train(corpus[:200], corpus[200:], QUICK, encoder=SMALL_ENCODER)
        assert ckpt.best_val_macro_f1 >= 0.9

    def test_deterministic_given_seed(self):
        corpus = small_corpus(90)
        runs = [
            train(corpus[:70], corpus[70:], QUICK, encoder=SMALL_ENCODER) for _ in range(2)
        ]
        assert runs[0].best_epoch == runs[1].best_epoch
        assert runs[0].best_val_macro_f1 == runs[1].best_val_macro_f1
        assert runs[0].history == runs[1].history
        for a, b in zip(runs[0].model.parameters(), runs[1].model.parameters()):
            assert torch.equal(a, b)

    def test_tie_break_earliest_epoch(self):
        corpus = small_corpus(150)
        cfg = TrainConfig(epochs=3, batch_size=16, max_seq_length=256)
        ckpt = train(corpus[:120], corpus[120:], cfg, encoder=SMALL_ENCODER)
        best = max(h["val_macro_f1"] for h in ckpt.history)
        first = min(h["epoch"] for h in ckpt.history if h["val_macro_f1"] == best)
        assert ckpt.best_epoch == first

    def test_ablation_reports_only_main_part(self):
        corpus = small_corpus(90)
        cfg = TrainConfig(
            epochs=1, batch_size=16, max_seq_length=256,
            loss=LossConfig(alpha=0, beta=0, gamma=0),
        )
        ckpt = train(corpus[:70], corpus[70:], cfg, encoder=SMALL_ENCODER)
        assert set(ckpt.history[0]["parts"]) == {"main"}

    def test_full_weights_report_all_parts(self):
        corpus = small_corpus(90)
        cfg = TrainConfig(epochs=1, batch_size=16, max_seq_length=256)
        ckpt = train(corpus[:70], corpus[70:], cfg, encoder=SMALL_ENCODER)
        assert set(ckpt.history[0]["parts"]) == {"main", "con", "sty", "mode"}

    def test_empty_split_rejected(self):
        corpus = small_corpus(30)
        with pytest.raises(ConfigError):
            train([], corpus, QUICK, encoder=SMALL_ENCODER)
        with pytest.raises(ConfigError):
            train(corpus, [], QUICK, encoder=SMALL_ENCODER)

    def test_divergence_names_batch(self):
        corpus = small_corpus(60)
        cfg = TrainConfig(epochs=1, batch_size=8, max_seq_length=256, learning_rate=1e30)
        with pytest.raises(DivergenceError, match=r"batch \d+"):
            train(corpus[:40], corpus[40:], cfg, encoder=SMALL_ENCODER)


class TestEndToEndGradient:
    def test_encoder_gradient_matches_finite_differences(self):
        """Analytic float32 gradients of the composite loss w.r.t. encoder
        parameters, checked against float64 central differences."""
        torch.manual_seed(11)
        corpus = small_corpus(4)
        model = MultiTaskModel(ToyEncoder(dim=6, buckets=48, init_std=0.05))
        texts = [r.text for r in corpus]
        batch = collate_labels([r.labels for r in corpus])
        cfg = LossConfig()

        total, _ = composite_loss(model(texts), batch, cfg)
        total.backward()
        analytic = model.encoder.embedding.weight.grad.detach().clone()

        double = MultiTaskModel(ToyEncoder(dim=6, buckets=48)).double()
        double.load_state_dict({k: v.double() for k, v in model.state_dict().items()})
        weight = double.encoder.embedding.weight
        fd = torch.zeros_like(weight)
        eps = 1e-5
        with torch.no_grad():
            flat, gflat = weight.reshape(-1), fd.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                for sign in (1, -1):
                    flat[i] = orig + sign * eps
                    val = composite_loss(double(texts), batch, cfg)[0].item()
                    gflat[i] += sign * val / (2 * eps)
                flat[i] = orig
        rel = (analytic.double() - fd).norm() / fd.norm()
        assert rel.item() < 1e-3


class TestCheckpoint:
    def _trained(self, tmp_path):
        corpus = small_corpus(90)
        cfg = TrainConfig(epochs=1, batch_size=16, max_seq_length=256)
        return train(corpus[:70], corpus[70:], cfg, encoder=SMALL_ENCODER), corpus[70:]

    def test_round_trip_bit_for_bit(self, tmp_path):
        ckpt, holdout = self._trained(tmp_path)
        path = ckpt.save(tmp_path / "ckpt")
        loaded = Checkpoint.load(path)
        texts = [r.text for r in holdout]
        before = predict(texts, ckpt)
        after = predict(texts, loaded)
        for a, b in zip(before, after):
            assert a.klass is b.klass and a.mode is b.mode
            assert a.scores == b.scores

    def test_manifest_detects_corruption(self, tmp_path):
        ckpt, _ = self._trained(tmp_path)
        path = ckpt.save(tmp_path / "ckpt")
        blob = (path / "heads.pt").read_bytes()
        (path / "heads.pt").write_bytes(blob[:-1] + bytes([blob[-1] ^ 0xFF]))
        with pytest.raises(CheckpointError, match="corrupt"):
            Checkpoint.load(path)

    def test_missing_part_detected(self, tmp_path):
        ckpt, _ = self._trained(tmp_path)
        path = ckpt.save(tmp_path / "ckpt")
        (path / "encoder.pt").unlink()
        with pytest.raises(CheckpointError, match="missing"):
            Checkpoint.load(path)

    def test_save_overwrites_atomically(self, tmp_path):
        ckpt, _ = self._trained(tmp_path)
        path = ckpt.save(tmp_path / "ckpt")
        ckpt.save(tmp_path / "ckpt")  # second save over the same path
        assert Checkpoint.load(path).best_epoch == ckpt.best_epoch


class TestPredict:
    def setup_method(self):
        torch.manual_seed(5)
        self.model = MultiTaskModel(ToyEncoder(dim=16, buckets=64, init_std=0.3))

    def test_klass_is_argmax_of_raw_cosines(self):
        preds = predict(["alpha beta gamma", "delta epsilon"], self.model)
        for p in preds:
            assert p.klass is CLASSES[int(np.argmax(p.scores["class_cosines"]))]

    def test_margin_settings_cannot_affect_inference(self):
        # predict has no loss-config parameter at all; raw cosines decide
        import inspect

        params = inspect.signature(predict).parameters
        assert "cfg" not in params and all("loss" not in name for name in params)

    def test_below_threshold_sets_low_confidence(self):
        with torch.no_grad():
            self.model.source_head.weight.zero_()
            self.model.source_head.bias.fill_(-50.0)
        preds = predict(["whatever text"], self.model)
        assert preds[0].sources == ()
        assert preds[0].low_confidence["sources"] is True

    def test_threshold_validated(self):
        with pytest.raises(ValidationError):
            predict(["x"], self.model, threshold=1.5)

    def test_mode_head_feeds_involvement_analysis(self):
        preds = predict(["alpha beta"], self.model)
        assert preds[0].mode.value in {"hw", "hwmt", "hwmp", "hwmg", "mg", "mgmp"}
        probs = preds[0].scores["mode_probs"]
        assert preds[0].mode.index == int(np.argmax(probs))
        assert sum(probs) == pytest.approx(1.0, abs=1e-5)

    def test_hw_mode_prediction_counts_as_no_involvement(self):
        from reviewdet.metrics import any_ai_involvement

        with torch.no_grad():
            self.model.mode_head.weight.zero_()
            self.model.mode_head.bias.copy_(
                torch.tensor([50.0, 0.0, 0.0, 0.0, 0.0, 0.0])
            )
        preds = predict(["any text at all"], self.model)
        assert preds[0].mode.value == "hw"
        assert any_ai_involvement([p.mode for p in preds]) == 0.0
