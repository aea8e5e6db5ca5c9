"""Hand detection: frame preprocessing, box selection, and cropping.

The detector works in a fixed 300x300 coordinate space. Crops are taken in
that same space so the crop and its center coordinate stay consistent with
the later screen mapping.
"""

from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np

from .errors import ModelContractError
from .runtime import ModelHandle

DETECTOR_SIZE = 300


@dataclass(frozen=True)
class Frame:
    """One RGB frame from a camera or a replay directory.

    `pixels` is HxWx3 uint8; sequence numbers strictly increase within a
    session and `timestamp_ms` is the capture time.
    """

    pixels: np.ndarray
    seq: int
    timestamp_ms: float

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"frame pixels must be HxWx3, got {px.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Detection:
    """Best hand box in detector space: integer bbox, score, and center."""

    bbox: tuple  # (x, y, w, h), clamped inside [0, 300) x [0, 300)
    score: float
    center: tuple  # (cx, cy) = (x + w/2, y + h/2)


@dataclass(frozen=True)
class CroppedHand:
    """Sub-image of the detector-space frame at the detection's bbox."""

    pixels: np.ndarray
    detection: Detection


def preprocess_frame(frame: Frame) -> np.ndarray:
    """Resize a frame to the detector input tensor (1x300x300x3 float32).

    Plain bilinear resize with half-pixel centers (aspect ratio not
    preserved); pixel values scaled to [0, 1]. A 300x300 frame is only
    rescaled, its geometry untouched.
    """
    px = frame.pixels
    if px.size == 0:
        raise ValueError("empty frame")
    scaled = px.astype(np.float32) / 255.0
    if px.shape[0] != DETECTOR_SIZE or px.shape[1] != DETECTOR_SIZE:
        scaled = cv2.resize(
            scaled, (DETECTOR_SIZE, DETECTOR_SIZE), interpolation=cv2.INTER_LINEAR
        )
    return scaled.reshape(1, DETECTOR_SIZE, DETECTOR_SIZE, 3)


def _clamp_box(x0: float, y0: float, x1: float, y1: float) -> Optional[tuple]:
    """Round a denormalized corner box to an integer (x, y, w, h) inside
    the detector space, or None when nothing of it remains."""
    x = int(np.floor(x0))
    y = int(np.floor(y0))
    xe = int(np.ceil(x1))
    ye = int(np.ceil(y1))
    x = min(max(x, 0), DETECTOR_SIZE - 1)
    y = min(max(y, 0), DETECTOR_SIZE - 1)
    xe = min(max(xe, x + 1), DETECTOR_SIZE)
    ye = min(max(ye, y + 1), DETECTOR_SIZE)
    if x1 <= 0 or y1 <= 0 or x0 >= DETECTOR_SIZE or y0 >= DETECTOR_SIZE:
        return None
    return (x, y, xe - x, ye - y)


def detect_hand(
    tensor: np.ndarray, model: ModelHandle, min_score: float = 0.5
) -> Optional[Detection]:
    """Pick the single best hand candidate, or None so the caller skips
    to the next frame.

    The model must emit `boxes` (N x 4 normalized corners x_min, y_min,
    x_max, y_max in [0, 1]) and `scores` (N x 1). Among candidates with
    score >= min_score the highest score wins, ties going to the smaller
    box index. Boxes are denormalized to 300x300 integer space and clamped;
    scores are clipped to [0, 1] after thresholding.
    """
    if not 0.0 <= min_score <= 1.0:
        raise ValueError(f"min_score must be in [0, 1], got {min_score}")
    outputs = model.forward({model.input_specs[0].name: tensor})
    try:
        boxes = np.asarray(outputs["boxes"], dtype=np.float64)
        scores = np.asarray(outputs["scores"], dtype=np.float64)
    except KeyError as exc:
        raise ModelContractError(f"detector output missing {exc}") from exc
    if boxes.ndim != 2 or boxes.shape[1] != 4:
        raise ModelContractError(f"detector boxes must be Nx4, got {boxes.shape}")
    scores = scores.reshape(-1)
    if scores.shape[0] != boxes.shape[0]:
        raise ModelContractError(
            f"detector scores count {scores.shape[0]} != boxes count {boxes.shape[0]}"
        )

    best = None  # (score, index)
    for i, score in enumerate(scores):
        if score >= min_score and (best is None or score > best[0]):
            best = (score, i)
    if best is None:
        return None
    score, i = best
    corners = boxes[i] * DETECTOR_SIZE
    bbox = _clamp_box(corners[0], corners[1], corners[2], corners[3])
    if bbox is None:
        return None
    x, y, w, h = bbox
    return Detection(
        bbox=bbox,
        score=float(min(max(score, 0.0), 1.0)),
        center=(x + w / 2.0, y + h / 2.0),
    )


def crop_hand(detector_space_frame: np.ndarray, detection: Detection) -> CroppedHand:
    """Cut the exact bbox sub-image out of the 300x300 detector-space frame."""
    x, y, w, h = detection.bbox
    if w < 1 or h < 1:
        raise ValueError(f"degenerate bbox {detection.bbox}")
    frame = np.asarray(detector_space_frame)
    crop = frame[y : y + h, x : x + w]
    return CroppedHand(pixels=crop, detection=detection)
