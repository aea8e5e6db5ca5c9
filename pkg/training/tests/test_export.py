import json

import numpy as np
import pytest
import torch
from torch import nn

from handcursor_export.export import (
    ExportValidationError,
    IncompatibleCheckpointError,
    export_classifier,
    export_detector,
)

# The runtime package is the consumer of every exported file; its loader is
# the contract check.
from handcursor.references import load_references
from handcursor.runtime import load_model
from handcursor import classifier as runtime_classifier
from handcursor import detector as runtime_detector
from handcursor.detector import Frame


@pytest.fixture(scope="module")
def exported(trained, tmp_path_factory, toy_dataset):
    model, _ = trained
    out_dir = tmp_path_factory.mktemp("export")
    model_path, references_path = export_classifier(
        model, out_dir, dataset_dir=str(toy_dataset)
    )
    return model, model_path, references_path


class TestClassifierExport:
    def test_runtime_contract(self, exported):
        _, model_path, _ = exported
        handle = load_model(model_path)
        assert handle.input_specs[0].shape == (1, 70, 70, 3)
        by_name = {s.name: s.shape for s in handle.output_specs}
        assert by_name == {"embedding": (1, 1280), "logits": (1, 4)}

    def test_roundtrip_fidelity(self, exported):
        model, model_path, _ = exported
        handle = load_model(model_path)
        from handcursor_export.model import DeployClassifier

        deploy = DeployClassifier(model).eval()
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(10):
            probe = rng.random((1, 70, 70, 3)).astype(np.float32)
            got = handle.forward({"image": probe})
            with torch.no_grad():
                want = deploy(torch.from_numpy(probe))
            for key in ("embedding", "logits"):
                worst = max(worst, float(np.abs(got[key] - want[key].numpy()).max()))
        assert worst <= 1e-4

    def test_embedding_taps_first_dense_layer_input(self, exported):
        model, model_path, _ = exported
        handle = load_model(model_path)
        captured = {}

        def hook(module, inputs, output):
            captured["value"] = inputs[0].detach()

        first_dense = next(m for m in model.head if isinstance(m, nn.Linear))
        handle_id = first_dense.register_forward_hook(hook)
        try:
            probe = np.random.default_rng(4).random((1, 70, 70, 3)).astype(np.float32)
            exported_embedding = handle.forward({"image": probe})["embedding"]
            with torch.no_grad():
                model(torch.from_numpy(probe).permute(0, 3, 1, 2))
        finally:
            handle_id.remove()
        np.testing.assert_allclose(
            exported_embedding, captured["value"].numpy(), atol=1e-5
        )

    def test_references_load_in_runtime(self, exported):
        _, _, references_path = exported
        refs = load_references(references_path)
        assert refs.embedding_dim == 1280
        assert refs.means.shape == (4, 1280)
        assert all(t >= 0 for t in refs.thresholds)
        # val+test = 2 held-out samples per class in the toy dataset.
        assert refs.sample_counts == (2, 2, 2, 2)

    def test_exported_model_runs_through_pipeline_ops(self, exported):
        _, model_path, references_path = exported
        handle = load_model(model_path)
        refs = load_references(references_path)
        image = np.random.default_rng(5).integers(0, 256, size=(70, 70, 3), dtype=np.uint8)
        tensor = runtime_classifier.preprocess_crop(image)
        embedding, scores = runtime_classifier.embed_and_classify(tensor, handle)
        decision = runtime_classifier.open_set_decide(embedding, scores, refs)
        assert decision.nearest_distance >= 0.0


class TinyHandSSD(nn.Module):
    """Minimal stand-in for a single-class hand SSD: one box centered on
    the intensity centroid, score from mean brightness."""

    def forward(self, x: torch.Tensor):
        intensity = x.mean(dim=1)[0]
        total = intensity.sum() + 1e-6
        coords = torch.arange(300, dtype=torch.float32)
        cx = (intensity.sum(dim=0) * coords).sum() / total
        cy = (intensity.sum(dim=1) * coords).sum() / total
        half = torch.tensor(40.0)
        box = torch.stack([cx - half, cy - half, cx + half, cy + half]).unsqueeze(0)
        score = intensity.mean().clamp(0.0, 1.0).reshape(1)
        return box, score


class NotADetector(nn.Module):
    def forward(self, x):
        return x.mean()


class TestDetectorExport:
    def test_checkpoint_to_runtime_contract(self, tmp_path):
        ckpt = tmp_path / "hand_ssd.ckpt.pt"
        torch.jit.save(torch.jit.script(TinyHandSSD()), str(ckpt))
        model_path = export_detector(ckpt, tmp_path / "out")
        handle = load_model(model_path)
        assert handle.input_specs[0].shape == (1, 300, 300, 3)
        assert {s.name for s in handle.output_specs} == {"boxes", "scores"}

    def test_high_contrast_blob_detected(self, tmp_path):
        ckpt = tmp_path / "hand_ssd.ckpt.pt"
        torch.jit.save(torch.jit.script(TinyHandSSD()), str(ckpt))
        model_path = export_detector(ckpt, tmp_path / "out")
        handle = load_model(model_path)
        pixels = np.zeros((300, 300, 3), dtype=np.uint8)
        pixels[100:180, 120:200] = 255  # bright hand-like blob
        tensor = runtime_detector.preprocess_frame(Frame(pixels=pixels, seq=0, timestamp_ms=0.0))
        outputs = handle.forward({"image": tensor})
        assert outputs["boxes"].shape[0] >= 1
        assert float(outputs["scores"].max()) > 0.0
        detection = runtime_detector.detect_hand(tensor, handle, min_score=0.01)
        assert detection is not None
        cx, cy = detection.center
        assert 120 <= cx <= 200 and 100 <= cy <= 180

    def test_corrupt_checkpoint(self, tmp_path):
        ckpt = tmp_path / "corrupt.ckpt"
        ckpt.write_bytes(b"\x00\x01 definitely not a checkpoint")
        with pytest.raises(IncompatibleCheckpointError):
            export_detector(ckpt, tmp_path / "out")

    def test_wrong_module_shape(self, tmp_path):
        ckpt = tmp_path / "notdet.ckpt.pt"
        torch.jit.save(torch.jit.script(NotADetector()), str(ckpt))
        with pytest.raises(IncompatibleCheckpointError):
            export_detector(ckpt, tmp_path / "out")


class TestCli:
    def test_train_command_end_to_end(self, toy_dataset, tmp_path):
        from click.testing import CliRunner

        from handcursor_export.cli import main

        result = CliRunner().invoke(
            main,
            [
                "train",
                "--data", str(toy_dataset),
                "--epochs", "1",
                "--batch-size", "16",
                "--out", str(tmp_path / "out"),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "test_accuracy" in result.output
        handle = load_model(tmp_path / "out" / "classifier.pt")
        assert handle.metadata["name"] == "gesture-classifier"
        refs = load_references(tmp_path / "out" / "references.json")
        assert refs.embedding_dim == 1280

    def test_export_detector_command(self, tmp_path):
        from click.testing import CliRunner

        from handcursor_export.cli import main

        ckpt = tmp_path / "hand_ssd.ckpt.pt"
        torch.jit.save(torch.jit.script(TinyHandSSD()), str(ckpt))
        result = CliRunner().invoke(
            main,
            ["export-detector", "--ckpt", str(ckpt), "--out", str(tmp_path / "out")],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "detector.pt").exists()
