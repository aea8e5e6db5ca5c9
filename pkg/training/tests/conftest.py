import json

import cv2
import numpy as np
import pytest

from handcursor_export.datasets import CLASS_NAMES
from handcursor_export.train import TrainConfig, train_classifier

BASE_COLORS = {
    "fist": (200, 40, 40),
    "palm": (40, 200, 40),
    "point_left": (40, 40, 200),
    "point_right": (200, 200, 40),
}


def write_toy_dataset(root, per_class=10):
    rng = np.random.default_rng(99)
    val, test = [], []
    for name in CLASS_NAMES:
        class_dir = root / name
        class_dir.mkdir(parents=True)
        for j in range(per_class):
            base = np.array(BASE_COLORS[name], dtype=np.float64)
            image = base[None, None, :] + rng.normal(scale=18, size=(70, 70, 3))
            image = np.clip(image, 0, 255).astype(np.uint8)
            cv2.imwrite(str(class_dir / f"img{j:02d}.png"), cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
            if j == per_class - 2:
                val.append(f"{name}/img{j:02d}.png")
            elif j == per_class - 1:
                test.append(f"{name}/img{j:02d}.png")
    (root / "splits.json").write_text(json.dumps({"val": val, "test": test}))
    return root


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    return write_toy_dataset(tmp_path_factory.mktemp("toy") / "dataset")


@pytest.fixture(scope="session")
def trained(toy_dataset):
    config = TrainConfig(data_dir=str(toy_dataset), epochs=2, batch_size=16)
    return train_classifier(config)
