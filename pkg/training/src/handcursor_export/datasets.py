"""Gesture dataset loading for training.

Same on-disk layout the pipeline consumes: one folder per class plus an
optional ``splits.json`` (``{"val": [...], "test": [...]}``, everything
else train).
"""

import json
import os
from dataclasses import dataclass

import cv2
import numpy as np
import torch

CLASS_NAMES = ("fist", "palm", "point_left", "point_right")
INPUT_SIZE = 70


@dataclass
class Sample:
    path: str
    class_index: int
    split: str


def scan_dataset(root):
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise FileNotFoundError(f"dataset root missing: {root}")
    split_of = {}
    splits_path = os.path.join(root, "splits.json")
    if os.path.isfile(splits_path):
        with open(splits_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        for name in ("val", "test"):
            for rel in doc.get(name, []):
                split_of[os.path.normpath(rel)] = name
    samples = []
    for index, class_name in enumerate(CLASS_NAMES):
        class_dir = os.path.join(root, class_name)
        if not os.path.isdir(class_dir):
            continue
        for filename in sorted(os.listdir(class_dir)):
            path = os.path.join(class_dir, filename)
            if not os.path.isfile(path):
                continue
            rel = os.path.normpath(os.path.join(class_name, filename))
            samples.append(Sample(path, index, split_of.get(rel, "train")))
    if not samples:
        raise FileNotFoundError(f"no samples under {root}")
    return samples


def load_image_tensor(path):
    """Read an image as a [0,1] float CHW tensor at the training size."""
    bgr = cv2.imread(path)
    if bgr is None:
        raise IOError(f"unreadable image: {path}")
    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
    if rgb.shape[:2] != (INPUT_SIZE, INPUT_SIZE):
        rgb = cv2.resize(rgb, (INPUT_SIZE, INPUT_SIZE), interpolation=cv2.INTER_LINEAR)
    array = rgb.astype(np.float32) / 255.0
    return torch.from_numpy(array).permute(2, 0, 1)


def load_split(samples, split):
    rows = [s for s in samples if s.split == split]
    if not rows:
        return None, None
    images = torch.stack([load_image_tensor(s.path) for s in rows])
    labels = torch.tensor([s.class_index for s in rows], dtype=torch.long)
    return images, labels
