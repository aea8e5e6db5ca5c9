"""Gesture classification with open-set rejection.

The classifier network has two heads behind one forward pass: a 1280-wide
embedding (the truncated network acting as a feature encoder) and 4-way
logits. Classification is "4 + 1": the argmax names one of the four trained
gestures, and a distance gate against per-class reference vectors decides
whether to trust it or answer Unknown.
"""

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import cv2
import numpy as np

from .detector import CroppedHand
from .errors import MissingClassError, ModelContractError
from .gestures import CLASS_ORDER, GestureLabel
from .references import ReferenceSet
from .runtime import ModelHandle

CLASSIFIER_SIZE = 70
EMBEDDING_DIM = 1280


@dataclass(frozen=True)
class ClassScores:
    """Raw 4-way logits; argmax ties break to the lowest class index."""

    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64).reshape(-1)
        if logits.shape[0] != len(CLASS_ORDER):
            raise ValueError(f"expected {len(CLASS_ORDER)} logits, got {logits.shape[0]}")
        logits.setflags(write=False)
        object.__setattr__(self, "logits", logits)

    @property
    def label(self) -> GestureLabel:
        return CLASS_ORDER[int(np.argmax(self.logits))]


@dataclass(frozen=True)
class GestureDecision:
    """Outcome of the open-set gate for one crop."""

    label: GestureLabel
    classifier_label: GestureLabel
    nearest_class: GestureLabel
    nearest_distance: float
    accepted: bool
    distances: np.ndarray  # per class, same order as CLASS_ORDER


def preprocess_crop(crop) -> np.ndarray:
    """Resize a hand crop to the classifier input tensor (1x70x70x3 float32).

    Accepts a CroppedHand or a bare HxWx3 image. Bilinear with half-pixel
    centers. uint8 crops are scaled to [0, 1]; float crops (already
    detector-space scaled) pass through unscaled.
    """
    px = np.asarray(crop.pixels if isinstance(crop, CroppedHand) else crop)
    if px.size == 0:
        raise ValueError("empty crop")
    if px.dtype == np.uint8:
        scaled = px.astype(np.float32) / 255.0
    else:
        scaled = px.astype(np.float32)
    if scaled.shape[0] != CLASSIFIER_SIZE or scaled.shape[1] != CLASSIFIER_SIZE:
        scaled = cv2.resize(
            scaled, (CLASSIFIER_SIZE, CLASSIFIER_SIZE), interpolation=cv2.INTER_LINEAR
        )
    return scaled.reshape(1, CLASSIFIER_SIZE, CLASSIFIER_SIZE, 3)


def embed_and_classify(tensor: np.ndarray, model: ModelHandle):
    """One forward pass producing (embedding, ClassScores).

    The model must emit `embedding` (1 x 1280) and `logits` (1 x 4).
    """
    outputs = model.forward({model.input_specs[0].name: tensor})
    try:
        embedding = np.asarray(outputs["embedding"], dtype=np.float64).reshape(-1)
        logits = np.asarray(outputs["logits"], dtype=np.float64).reshape(-1)
    except KeyError as exc:
        raise ModelContractError(f"classifier output missing {exc}") from exc
    if logits.shape[0] != len(CLASS_ORDER):
        raise ModelContractError(f"expected {len(CLASS_ORDER)} logits, got {logits.shape[0]}")
    if not np.all(np.isfinite(embedding)):
        raise ModelContractError("classifier produced a non-finite embedding")
    return embedding, ClassScores(logits=logits)


def _samples_by_class(samples: Mapping) -> dict:
    by_class = {}
    for cls in CLASS_ORDER:
        entries = samples.get(cls)
        if entries is None:
            entries = samples.get(cls.value)
        if entries is None or len(entries) == 0:
            raise MissingClassError(cls.value)
        by_class[cls] = np.asarray(entries, dtype=np.float64)
    return by_class


def build_references(samples: Mapping) -> np.ndarray:
    """Coordinate-wise mean embedding per class.

    `samples` maps each defined gesture (label or name) to its encoded
    samples; every class needs at least one. Returns a (4, dim) array in
    CLASS_ORDER.
    """
    by_class = _samples_by_class(samples)
    return np.stack([by_class[cls].mean(axis=0) for cls in CLASS_ORDER])


def calibrate_thresholds(references: np.ndarray, calibration_samples: Mapping) -> ReferenceSet:
    """Set each class's acceptance radius to the largest distance any of its
    calibration samples has from the class reference.

    Calibration samples should come from held-out (validation/test) splits,
    not from the samples that built the references. The scale starts at 1.0.
    """
    references = np.asarray(references, dtype=np.float64)
    by_class = _samples_by_class(calibration_samples)
    thresholds = []
    counts = []
    for i, cls in enumerate(CLASS_ORDER):
        distances = np.linalg.norm(by_class[cls] - references[i], axis=1)
        thresholds.append(float(distances.max()))
        counts.append(by_class[cls].shape[0])
    return ReferenceSet(
        means=references,
        thresholds=np.asarray(thresholds),
        sample_counts=tuple(counts),
        threshold_scale=1.0,
    )


def class_distances(embedding: np.ndarray, refs: ReferenceSet) -> np.ndarray:
    embedding = np.asarray(embedding, dtype=np.float64).reshape(-1)
    if embedding.shape[0] != refs.embedding_dim:
        raise ValueError(
            f"embedding length {embedding.shape[0]} != references dim {refs.embedding_dim}"
        )
    return np.linalg.norm(refs.means - embedding, axis=1)


def open_set_decide(
    embedding: np.ndarray,
    scores: ClassScores,
    refs: ReferenceSet,
    strict_agreement: bool = False,
) -> GestureDecision:
    """Validate the classifier's label against the reference vectors.

    The nearest reference is chosen (ties to the lowest class index) and the
    query is accepted only when that distance is strictly below the class's
    effective threshold. An accepted decision carries the classifier argmax
    label; the gate validates, the classifier names. Disagreement between
    nearest class and argmax is recorded but only rejects when
    `strict_agreement` is set.
    """
    distances = class_distances(embedding, refs)
    nearest_idx = int(np.argmin(distances))
    nearest = CLASS_ORDER[nearest_idx]
    nearest_distance = float(distances[nearest_idx])
    accepted = nearest_distance < float(refs.effective_thresholds[nearest_idx])
    classifier_label = scores.label
    if strict_agreement and nearest is not classifier_label:
        accepted = False
    distances.setflags(write=False)
    return GestureDecision(
        label=classifier_label if accepted else GestureLabel.UNKNOWN,
        classifier_label=classifier_label,
        nearest_class=nearest,
        nearest_distance=nearest_distance,
        accepted=accepted,
        distances=distances,
    )


def embed_samples(
    images: Sequence[np.ndarray],
    model: ModelHandle,
    labels: Optional[Sequence[GestureLabel]] = None,
):
    """Encode raw crop images; returns (embeddings, logits_list) or, when
    labels are given, a per-class mapping of embeddings."""
    embeddings = []
    logit_rows = []
    for image in images:
        tensor = preprocess_crop(image)
        embedding, scores = embed_and_classify(tensor, model)
        embeddings.append(embedding)
        logit_rows.append(scores.logits)
    if labels is None:
        return np.asarray(embeddings), np.asarray(logit_rows)
    grouped = {cls: [] for cls in CLASS_ORDER}
    for embedding, label in zip(embeddings, labels):
        grouped[label].append(embedding)
    return {cls: np.asarray(rows) for cls, rows in grouped.items() if rows}
