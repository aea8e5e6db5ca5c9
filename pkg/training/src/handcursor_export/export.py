"""Export trained models to the runtime's file contracts.

Classifier: TorchScript `classifier.pt` taking a 1x70x70x3 [0,1]
channels-last image and returning named `embedding` (1x1280) and `logits`
(1x4) outputs, plus an initial `references.json` built from the held-out
embeddings. Detector: wraps a pretrained single-class hand SSD checkpoint
into `detector.pt` emitting normalized-corner `boxes` (Nx4) and `scores`
(Nx1) at 1x300x300x3.

Tensor specs travel inside each TorchScript archive as a
``tensorspecs.json`` extra entry.
"""

import json
import os
from typing import Dict

import numpy as np
import torch
from torch import nn

from .datasets import CLASS_NAMES, load_image_tensor, scan_dataset
from .model import DeployClassifier, EMBEDDING_DIM, GestureClassifier

SPEC_ARCHIVE_ENTRY = "tensorspecs.json"
DETECTOR_SIZE = 300
FIDELITY_TOLERANCE = 1e-4


class ExportValidationError(RuntimeError):
    """Exported model disagrees with the framework forward pass."""


class IncompatibleCheckpointError(RuntimeError):
    """Checkpoint is not a usable single-class hand detector."""


def _save_with_specs(module, path, inputs, outputs, metadata):
    doc = {"inputs": inputs, "outputs": outputs, "metadata": metadata}
    torch.jit.save(module, os.fspath(path), _extra_files={SPEC_ARCHIVE_ENTRY: json.dumps(doc)})


def export_classifier(model: GestureClassifier, out_dir, dataset_dir=None):
    """Write classifier.pt (and references.json when a dataset is given).

    The exported module is verified against the framework model on random
    inputs; max abs difference above 1e-4 fails the export. Reference means
    use every sample, thresholds use the val+test embeddings (all samples
    when the dataset has no splits).
    """
    os.makedirs(out_dir, exist_ok=True)
    model.eval()
    deploy = DeployClassifier(model).eval()
    example = torch.rand(1, 70, 70, 3)
    with torch.no_grad():
        scripted = torch.jit.trace(deploy, example, strict=False)

    model_path = os.path.join(out_dir, "classifier.pt")
    _save_with_specs(
        scripted,
        model_path,
        inputs=[{"name": "image", "shape": [1, 70, 70, 3]}],
        outputs=[
            {"name": "embedding", "shape": [1, EMBEDDING_DIM]},
            {"name": "logits", "shape": [1, len(CLASS_NAMES)]},
        ],
        metadata={
            "name": "gesture-classifier",
            **{k: str(v) for k, v in model.parameter_counts().items()},
        },
    )

    reloaded = torch.jit.load(model_path)
    worst = 0.0
    with torch.no_grad():
        for _ in range(10):
            probe = torch.rand(1, 70, 70, 3)
            want = deploy(probe)
            got = reloaded(probe)
            for key in ("embedding", "logits"):
                worst = max(worst, float((want[key] - got[key]).abs().max()))
    if worst > FIDELITY_TOLERANCE:
        raise ExportValidationError(
            f"round-trip forward mismatch {worst:.2e} > {FIDELITY_TOLERANCE:.0e}"
        )

    references_path = None
    if dataset_dir is not None:
        references_path = os.path.join(out_dir, "references.json")
        _write_references(model, dataset_dir, references_path)
    return model_path, references_path


def _embed(model, paths):
    rows = []
    with torch.no_grad():
        for path in paths:
            x = load_image_tensor(path).unsqueeze(0)
            rows.append(model.embed(x)[0].numpy().astype(np.float64))
    return np.asarray(rows)


def _write_references(model, dataset_dir, out_path):
    samples = scan_dataset(dataset_dir)
    model.eval()
    classes = {}
    for index, name in enumerate(CLASS_NAMES):
        of_class = [s for s in samples if s.class_index == index]
        if not of_class:
            raise ValueError(f"dataset has no samples for class {name!r}")
        all_embeddings = _embed(model, [s.path for s in of_class])
        held_out = [s for s in of_class if s.split in ("val", "test")]
        if held_out:
            calibration = _embed(model, [s.path for s in held_out])
        else:
            calibration = all_embeddings
        mean = all_embeddings.mean(axis=0)
        distances = np.sqrt(((calibration - mean) ** 2).sum(axis=1))
        classes[name] = {
            "mean": [float(v) for v in mean],
            "threshold": float(distances.max()),
            "sample_count": int(calibration.shape[0]),
        }
    doc = {
        "version": 1,
        "embedding_dim": EMBEDDING_DIM,
        "class_order": list(CLASS_NAMES),
        "threshold_scale": 1.0,
        "classes": classes,
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


class DeployDetector(nn.Module):
    """Adapter from a raw SSD module to the runtime detector contract.

    The wrapped module maps a 1x3x300x300 [0,1] image to a (boxes, scores)
    pair with boxes as absolute pixel corners.
    """

    def __init__(self, raw):
        super().__init__()
        self.raw = raw

    def forward(self, image: torch.Tensor) -> Dict[str, torch.Tensor]:
        x = image.permute(0, 3, 1, 2)
        boxes, scores = self.raw(x)
        return {
            "boxes": boxes / DETECTOR_SIZE,
            "scores": scores.reshape(-1, 1),
        }


def export_detector(checkpoint_path, out_dir):
    """Convert a hand-SSD checkpoint into detector.pt.

    Accepts a TorchScript file or a pickled nn.Module whose forward maps a
    1x3x300x300 [0,1] tensor to (boxes Nx4 absolute pixel corners,
    scores N). Anything else raises IncompatibleCheckpointError.
    """
    checkpoint_path = os.fspath(checkpoint_path)
    if not os.path.isfile(checkpoint_path):
        raise FileNotFoundError(f"checkpoint missing: {checkpoint_path}")
    raw = None
    try:
        raw = torch.jit.load(checkpoint_path, map_location="cpu")
    except Exception:
        try:
            raw = torch.load(checkpoint_path, map_location="cpu", weights_only=False)
        except Exception as exc:
            raise IncompatibleCheckpointError(
                f"{checkpoint_path}: not a TorchScript or pickled module: {exc}"
            ) from exc
    if not isinstance(raw, (nn.Module, torch.jit.ScriptModule)):
        raise IncompatibleCheckpointError(
            f"{checkpoint_path}: checkpoint holds {type(raw).__name__}, not a module"
        )
    if hasattr(raw, "eval"):
        raw.eval()
    deploy = DeployDetector(raw).eval()
    probe = torch.rand(1, 300, 300, 3)
    try:
        with torch.no_grad():
            out = deploy(probe)
        boxes, scores = out["boxes"], out["scores"]
        if boxes.ndim != 2 or boxes.shape[1] != 4 or scores.shape != (boxes.shape[0], 1):
            raise IncompatibleCheckpointError(
                f"{checkpoint_path}: outputs {tuple(boxes.shape)}/{tuple(scores.shape)} "
                "do not form (Nx4 boxes, Nx1 scores)"
            )
    except IncompatibleCheckpointError:
        raise
    except Exception as exc:
        raise IncompatibleCheckpointError(f"{checkpoint_path}: forward failed: {exc}") from exc

    os.makedirs(out_dir, exist_ok=True)
    with torch.no_grad():
        scripted = torch.jit.trace(deploy, probe, strict=False)
    model_path = os.path.join(out_dir, "detector.pt")
    n = int(boxes.shape[0])
    _save_with_specs(
        scripted,
        model_path,
        inputs=[{"name": "image", "shape": [1, DETECTOR_SIZE, DETECTOR_SIZE, 3]}],
        outputs=[
            {"name": "boxes", "shape": [n, 4]},
            {"name": "scores", "shape": [n, 1]},
        ],
        metadata={"name": "hand-detector"},
    )
    return model_path
