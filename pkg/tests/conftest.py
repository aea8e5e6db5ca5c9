import numpy as np
import pytest

from handcursor.runtime import StubNetworkConfig, TensorSpec, make_stub


def detector_stub_config(seed=1234, candidates=8):
    return StubNetworkConfig(
        seed=seed,
        input_spec=TensorSpec("image", (1, 300, 300, 3)),
        output_specs=(
            TensorSpec("boxes", (candidates, 4)),
            TensorSpec("scores", (candidates, 1)),
        ),
        metadata={"name": "stub-detector"},
    )


def classifier_stub_config(seed=5678):
    return StubNetworkConfig(
        seed=seed,
        input_spec=TensorSpec("image", (1, 70, 70, 3)),
        output_specs=(
            TensorSpec("embedding", (1, 1280)),
            TensorSpec("logits", (1, 4)),
        ),
        metadata={"name": "stub-classifier"},
    )


@pytest.fixture
def detector_stub():
    return make_stub(detector_stub_config())


@pytest.fixture
def classifier_stub():
    return make_stub(classifier_stub_config())


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
