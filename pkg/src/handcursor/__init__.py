"""Real-time hand-gesture cursor control.

Detects a hand in webcam frames, classifies its gesture with an open-set
rejection gate built from reference embeddings and calibrated distance
thresholds, and drives the OS cursor through an explicit on/off state
machine. Includes calibration, replay, evaluation, and a telemetry channel
for the operator dashboard.
"""

from .classifier import (
    ClassScores,
    GestureDecision,
    build_references,
    calibrate_thresholds,
    embed_and_classify,
    open_set_decide,
    preprocess_crop,
)
from .controller import (
    CommandKind,
    ControllerState,
    CursorCommand,
    Mode,
    ScreenGeometry,
    SimulatedCursorBackend,
    apply,
    map_coordinate,
    smooth,
    step,
)
from .detector import (
    CroppedHand,
    Detection,
    Frame,
    crop_hand,
    detect_hand,
    preprocess_frame,
)
from .gestures import CLASS_NAMES, CLASS_ORDER, GestureLabel
from .openset import OpenSetNearestMean
from .pipeline import PipelineConfig, RunSummary, measure_fps, record, run
from .references import ReferenceSet, load_references, save_references
from .runtime import (
    ModelHandle,
    StubNetworkConfig,
    TensorSpec,
    load_model,
    make_stub,
)

__version__ = "0.1.0"
