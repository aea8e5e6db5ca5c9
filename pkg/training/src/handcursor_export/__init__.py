"""Training and export glue for the handcursor gesture models."""

from .export import (
    ExportValidationError,
    IncompatibleCheckpointError,
    export_classifier,
    export_detector,
)
from .model import DEFAULT_HEAD_WIDTHS, DeployClassifier, GestureClassifier
from .train import TrainConfig, train_classifier

__version__ = "0.1.0"
