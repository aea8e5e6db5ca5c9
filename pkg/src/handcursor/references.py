"""Reference vectors and calibrated distance thresholds.

A ReferenceSet is the calibration artifact: one mean embedding per gesture
class plus the per-class acceptance radius. The JSON layout is a shared
contract with the training export and the dashboard:

    {
      "version": 1,
      "embedding_dim": 1280,
      "class_order": ["fist", "palm", "point_left", "point_right"],
      "threshold_scale": 1.0,
      "classes": {
        "<name>": {"mean": [floats], "threshold": float, "sample_count": int}
      }
    }

`sample_count` records how many calibration samples defined the class
threshold. The stored thresholds are immutable; the global
`threshold_scale` is the one runtime knob (effective threshold =
threshold * scale).
"""

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import MissingClassError, ReferenceFileError, VersionMismatchError
from .gestures import CLASS_NAMES, CLASS_ORDER

REFERENCES_VERSION = 1


@dataclass(frozen=True)
class ReferenceSet:
    """Per-class mean vectors, thresholds and provenance counts."""

    means: np.ndarray  # (4, dim) float64
    thresholds: np.ndarray  # (4,) float64, >= 0
    sample_counts: tuple  # per class, calibration samples used
    threshold_scale: float = 1.0

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        thresholds = np.asarray(self.thresholds, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] != len(CLASS_ORDER):
            raise ValueError(f"means must be ({len(CLASS_ORDER)}, dim), got {means.shape}")
        if thresholds.shape != (len(CLASS_ORDER),):
            raise ValueError(f"need one threshold per class, got {thresholds.shape}")
        if not np.all(np.isfinite(means)):
            raise ValueError("reference means must be finite")
        if np.any(thresholds < 0) or not np.all(np.isfinite(thresholds)):
            raise ValueError("thresholds must be finite and >= 0")
        # Scale 0 is allowed: it turns the gate into reject-everything.
        if not self.threshold_scale >= 0:
            raise ValueError(f"threshold_scale must be >= 0, got {self.threshold_scale}")
        means.setflags(write=False)
        thresholds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "sample_counts", tuple(self.sample_counts))

    @property
    def embedding_dim(self) -> int:
        return self.means.shape[1]

    @property
    def effective_thresholds(self) -> np.ndarray:
        return self.thresholds * self.threshold_scale

    def with_scale(self, scale: float) -> "ReferenceSet":
        """Copy with a new threshold scale; stored thresholds untouched."""
        return replace(self, threshold_scale=float(scale))

    def to_json(self) -> dict:
        return {
            "version": REFERENCES_VERSION,
            "embedding_dim": self.embedding_dim,
            "class_order": list(CLASS_NAMES),
            "threshold_scale": self.threshold_scale,
            "classes": {
                name: {
                    "mean": [float(v) for v in self.means[i]],
                    "threshold": float(self.thresholds[i]),
                    "sample_count": int(self.sample_counts[i]),
                }
                for i, name in enumerate(CLASS_NAMES)
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ReferenceSet":
        if not isinstance(doc, dict) or "version" not in doc:
            raise ReferenceFileError("references document missing version field")
        if doc["version"] != REFERENCES_VERSION:
            raise VersionMismatchError(
                f"references version {doc['version']} unsupported (want {REFERENCES_VERSION})"
            )
        classes = doc.get("classes")
        if not isinstance(classes, dict):
            raise ReferenceFileError("references document missing classes map")
        for name in CLASS_NAMES:
            if name not in classes:
                raise MissingClassError(name)
        dim = int(doc.get("embedding_dim", 0))
        means = []
        thresholds = []
        counts = []
        for name in CLASS_NAMES:
            entry = classes[name]
            try:
                mean = np.asarray(entry["mean"], dtype=np.float64)
                thresholds.append(float(entry["threshold"]))
                counts.append(int(entry.get("sample_count", 0)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ReferenceFileError(f"class {name!r}: {exc}") from exc
            if mean.ndim != 1 or (dim and mean.shape[0] != dim):
                raise ReferenceFileError(
                    f"class {name!r}: mean length {mean.shape} != embedding_dim {dim}"
                )
            means.append(mean)
        try:
            return cls(
                means=np.stack(means),
                thresholds=np.asarray(thresholds),
                sample_counts=tuple(counts),
                threshold_scale=float(doc.get("threshold_scale", 1.0)),
            )
        except ValueError as exc:
            raise ReferenceFileError(str(exc)) from exc


def save_references(refs: ReferenceSet, path) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(refs.to_json(), fh)
        fh.write("\n")


def load_references(path) -> ReferenceSet:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"references file missing: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ReferenceFileError(f"{path}: not valid JSON: {exc}") from exc
    return ReferenceSet.from_json(doc)
