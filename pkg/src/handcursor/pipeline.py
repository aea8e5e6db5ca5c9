"""Frame-loop orchestration: capture, detect, classify, gate, control.

One logical loop owns all mutable state. Per frame it runs
preprocess -> detect -> (skip or) crop -> classify -> open-set gate ->
controller -> backend, emits exactly one telemetry event, then applies any
queued control messages before touching the next frame.

Controller time is the frame's own capture timestamp, which makes replayed
sessions fully deterministic: a recording plus a config plus model files
determine the command log bit for bit.
"""

import dataclasses
import json
import logging
import os
import queue
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import classifier as clf
from . import controller as ctl
from . import detector as det
from .errors import (
    BackendUnavailableError,
    InsufficientEventsError,
    MissingClassError,
)
from .gestures import CLASS_NAMES
from .recording import CameraSource, ReplaySource, SessionRecording
from .references import ReferenceSet, load_references
from .runtime import load_model_pair
from .telemetry import (
    TelemetryEvent,
    TelemetryServer,
    ack_reply,
    encode_thumbnail,
    error_reply,
)

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    """Every runtime knob; mirrors the CLI flags and the config file keys."""

    models_dir: str = "models"
    references_path: str = "references.json"
    camera_index: Optional[int] = None
    replay_dir: Optional[str] = None
    min_score: float = 0.5
    debounce_frames: int = ctl.DEFAULT_DEBOUNCE_FRAMES
    cooldown_ms: float = ctl.DEFAULT_COOLDOWN_MS
    alpha: float = ctl.DEFAULT_ALPHA
    mirror_x: bool = True
    dry_run: bool = False
    serve_port: Optional[int] = None
    strict_agreement: bool = False
    target_fps: Optional[float] = None
    screen_width: int = 1920
    screen_height: int = 1080
    max_frames: Optional[int] = None
    thumbnail_every: int = 3
    static_dir: Optional[str] = None

    def validate(self):
        if (self.camera_index is None) == (self.replay_dir is None):
            raise ValueError("exactly one frame source: set camera_index or replay_dir")
        if not 0.0 <= self.min_score <= 1.0:
            raise ValueError(f"min_score must be in [0, 1], got {self.min_score}")
        if self.debounce_frames < 1:
            raise ValueError("debounce_frames must be >= 1")
        if self.cooldown_ms < 0:
            raise ValueError("cooldown_ms must be >= 0")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.screen_width < 1 or self.screen_height < 1:
            raise ValueError("screen dimensions must be >= 1")
        if self.target_fps is not None and self.target_fps <= 0:
            raise ValueError("target_fps must be positive")
        if self.thumbnail_every < 1:
            raise ValueError("thumbnail_every must be >= 1")
        return self

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        """Load a flat key/value JSON config; keyword overrides win."""
        with open(os.fspath(path), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc)

    def geometry(self) -> ctl.ScreenGeometry:
        return ctl.ScreenGeometry(
            width=self.screen_width,
            height=self.screen_height,
            mirror_x=self.mirror_x,
            alpha=self.alpha,
        )


@dataclass
class FpsStats:
    mean_fps: float
    p95_interval_ms: float
    mean_interval_ms: float


def measure_fps(events) -> FpsStats:
    """Frame-rate statistics from telemetry timestamps only."""
    timestamps = []
    for event in events:
        if isinstance(event, dict):
            timestamps.append(float(event["timestamp_ms"]))
        else:
            timestamps.append(float(event.timestamp_ms))
    if len(timestamps) < 2:
        raise InsufficientEventsError(
            f"need at least 2 events to measure FPS, got {len(timestamps)}"
        )
    intervals = np.diff(np.asarray(timestamps, dtype=np.float64))
    mean_interval = float(intervals.mean())
    if mean_interval <= 0:
        raise InsufficientEventsError("event timestamps do not advance")
    return FpsStats(
        mean_fps=1000.0 / mean_interval,
        p95_interval_ms=float(np.percentile(intervals, 95)),
        mean_interval_ms=mean_interval,
    )


@dataclass
class RunSummary:
    frames: int = 0
    commands: int = 0
    moves: int = 0
    clicks: int = 0
    right_clicks: int = 0
    skipped_no_detection: int = 0
    rejected_unknown: int = 0
    mean_fps: Optional[float] = None
    command_log: str = ""
    events: list = field(default_factory=list)
    wall_seconds: float = 0.0


def open_source(config: PipelineConfig):
    if config.replay_dir is not None:
        return ReplaySource(config.replay_dir)
    return CameraSource(config.camera_index)


def _make_backend(config: PipelineConfig):
    """Returns (backend, dry_run_effective)."""
    if config.dry_run:
        return ctl.SimulatedCursorBackend(), True
    try:
        return ctl.SystemCursorBackend(), False
    except BackendUnavailableError as exc:
        logger.warning("cursor backend unavailable, degrading to dry run: %s", exc)
        return ctl.SimulatedCursorBackend(), True


class _ControlState:
    """Mutable run-scoped state that control messages may adjust."""

    def __init__(self, config: PipelineConfig, refs: ReferenceSet, backend, dry_run: bool):
        self.refs = refs
        self.backend = backend
        self.dry_run = dry_run
        self.debounce_frames = config.debounce_frames
        self.cooldown_ms = config.cooldown_ms
        self.snapshots = {name: [] for name in CLASS_NAMES}
        self.last_embedding = None

    def handle(self, doc: dict) -> dict:
        kind = doc.get("type")
        try:
            if kind == "set_threshold_scale":
                value = float(doc["value"])
                if value < 0:
                    raise ValueError("threshold scale must be >= 0")
                self.refs = self.refs.with_scale(value)
                return ack_reply(kind, value=value)
            if kind == "set_dry_run":
                value = bool(doc["value"])
                if value and not self.dry_run:
                    self.backend = ctl.SimulatedCursorBackend()
                    self.dry_run = True
                elif not value and self.dry_run:
                    self.backend = ctl.SystemCursorBackend()
                    self.dry_run = False
                return ack_reply(kind, value=self.dry_run)
            if kind == "set_debounce":
                if "n" in doc:
                    n = int(doc["n"])
                    if n < 1:
                        raise ValueError("debounce n must be >= 1")
                    self.debounce_frames = n
                if "cooldown_ms" in doc:
                    cooldown = float(doc["cooldown_ms"])
                    if cooldown < 0:
                        raise ValueError("cooldown_ms must be >= 0")
                    self.cooldown_ms = cooldown
                return ack_reply(
                    kind, n=self.debounce_frames, cooldown_ms=self.cooldown_ms
                )
            if kind == "snapshot":
                name = doc["class"]
                if name not in CLASS_NAMES:
                    raise ValueError(f"unknown class {name!r}")
                if self.last_embedding is None:
                    raise ValueError("no embedding captured yet")
                self.snapshots[name].append(np.array(self.last_embedding))
                return ack_reply(kind, **{"class": name, "count": len(self.snapshots[name])})
            if kind == "rebuild_references":
                samples = {
                    name: rows for name, rows in self.snapshots.items() if rows
                }
                means = clf.build_references(samples)
                self.refs = clf.calibrate_thresholds(means, samples)
                return ack_reply(
                    kind,
                    sample_counts={
                        name: len(self.snapshots[name]) for name in CLASS_NAMES
                    },
                )
            return error_reply(kind or "?", "unknown control type")
        except MissingClassError as exc:
            return error_reply(kind, f"missing class: {exc.class_name}")
        except BackendUnavailableError as exc:
            return error_reply(kind, str(exc))
        except (KeyError, TypeError, ValueError) as exc:
            return error_reply(kind, f"bad control message: {exc}")


def run(
    config: PipelineConfig,
    source=None,
    backend=None,
    collect_events: bool = False,
    server: Optional[TelemetryServer] = None,
) -> RunSummary:
    """Run the full loop until the source ends or max_frames is reached.

    Model, reference and source failures are fatal at startup; nothing
    mid-run is. Pass `source`/`backend`/`server` to substitute test doubles
    for the camera, the OS cursor, or the network channel.
    """
    config.validate()
    detector_model, classifier_model = load_model_pair(config.models_dir)
    refs = load_references(config.references_path)
    own_source = source is None
    if own_source:
        source = open_source(config)
    if backend is None:
        backend, dry_run = _make_backend(config)
    else:
        dry_run = True
    own_server = False
    if server is None and config.serve_port is not None:
        server = TelemetryServer(config.serve_port, static_dir=config.static_dir)
        own_server = True

    control = _ControlState(config, refs, backend, dry_run)
    geom = config.geometry()
    state = ctl.ControllerState()
    summary = RunSummary()
    events = []
    last_wall_ms = None
    start = time.perf_counter()
    frame_interval = 1.0 / config.target_fps if config.target_fps else None

    try:
        while True:
            if config.max_frames is not None and summary.frames >= config.max_frames:
                break
            frame = source.read()
            if frame is None:
                break
            wall_ms = time.monotonic() * 1000.0

            tensor = det.preprocess_frame(frame)
            detection = det.detect_hand(tensor, detector_model, config.min_score)

            decision = None
            command = ctl.none_command(frame.seq)
            if detection is None:
                summary.skipped_no_detection += 1
            else:
                crop = det.crop_hand(tensor[0], detection)
                crop_tensor = clf.preprocess_crop(crop)
                embedding, scores = clf.embed_and_classify(crop_tensor, classifier_model)
                control.last_embedding = embedding
                decision = clf.open_set_decide(
                    embedding, scores, control.refs, config.strict_agreement
                )
                if not decision.accepted:
                    summary.rejected_unknown += 1
                state, command = ctl.step(
                    state,
                    decision,
                    detection.center,
                    geom,
                    now_ms=frame.timestamp_ms,
                    debounce_frames=control.debounce_frames,
                    cooldown_ms=control.cooldown_ms,
                    seq=frame.seq,
                )
                if command.is_action:
                    ctl.apply(command, control.backend, timestamp_ms=frame.timestamp_ms)
                    summary.commands += 1
                    if command.kind is ctl.CommandKind.MOVE:
                        summary.moves += 1
                    elif command.kind is ctl.CommandKind.CLICK:
                        summary.clicks += 1
                    elif command.kind is ctl.CommandKind.RIGHT_CLICK:
                        summary.right_clicks += 1

            fps = 1000.0 / (wall_ms - last_wall_ms) if last_wall_ms is not None and wall_ms > last_wall_ms else None
            last_wall_ms = wall_ms
            thumbnail = None
            if server is not None and summary.frames % config.thumbnail_every == 0:
                thumbnail = encode_thumbnail(frame.pixels)
            event = TelemetryEvent(
                seq=frame.seq,
                timestamp_ms=wall_ms,
                frame_timestamp_ms=frame.timestamp_ms,
                mode=state.mode,
                decision=decision,
                bbox=detection.bbox if detection else None,
                center=detection.center if detection else None,
                command=command if command.is_action else None,
                fps=fps,
                thumbnail=thumbnail,
                effective_thresholds=tuple(control.refs.effective_thresholds),
            )
            event_json = event.to_json()
            if collect_events:
                events.append(event_json)
            if server is not None:
                server.broadcast(event_json)
                while True:
                    try:
                        connection, doc = server.control_queue.get_nowait()
                    except queue.Empty:
                        break
                    reply = control.handle(doc)
                    server.send(connection, reply)

            summary.frames += 1
            if frame_interval is not None:
                elapsed = time.perf_counter() - start
                target = summary.frames * frame_interval
                if target > elapsed:
                    time.sleep(target - elapsed)
    finally:
        if own_source:
            source.close()
        if own_server and server is not None:
            server.close()

    summary.wall_seconds = time.perf_counter() - start
    if summary.frames >= 2 and summary.wall_seconds > 0:
        summary.mean_fps = summary.frames / summary.wall_seconds
    if isinstance(control.backend, ctl.SimulatedCursorBackend):
        summary.command_log = control.backend.to_text()
    summary.events = events
    return summary


def record(output_dir, seconds: float, camera_index: int = 0, source=None) -> SessionRecording:
    """Capture frames for `seconds` and persist them as a recording.

    Zero seconds produces an empty recording with a valid manifest. Pass
    `source` to capture from something other than a live camera.
    """
    if seconds < 0:
        raise ValueError("duration must be >= 0")
    own_source = source is None
    if own_source:
        source = CameraSource(camera_index)
    frames = []
    try:
        deadline = time.monotonic() + seconds
        while time.monotonic() < deadline:
            frame = source.read()
            if frame is None:
                break
            frames.append(frame)
    finally:
        if own_source:
            source.close()
    return SessionRecording.write(output_dir, frames)


def serve_telemetry(config: PipelineConfig) -> TelemetryServer:
    """Bind the telemetry channel for a run; raises OSError if the port is taken."""
    if config.serve_port is None:
        raise ValueError("config.serve_port is not set")
    return TelemetryServer(config.serve_port, static_dir=config.static_dir)


def calibrate_from_dataset(
    dataset, model, use_all_for_thresholds_fallback: bool = True
) -> ReferenceSet:
    """Build references from all samples, thresholds from val+test samples.

    Datasets without held-out splits fall back to calibrating on everything
    (with a warning) unless the fallback is disabled.
    """
    from .evaluation import read_sample_image

    all_embeddings = {name: [] for name in CLASS_NAMES}
    calib_embeddings = {name: [] for name in CLASS_NAMES}
    for sample in dataset.samples:
        image = read_sample_image(sample)
        tensor = clf.preprocess_crop(image)
        embedding, _ = clf.embed_and_classify(tensor, model)
        all_embeddings[sample.label.value].append(embedding)
        if sample.split in ("val", "test"):
            calib_embeddings[sample.label.value].append(embedding)

    if not any(rows for rows in calib_embeddings.values()):
        if not use_all_for_thresholds_fallback:
            raise MissingClassError("val/test")
        logger.warning(
            "dataset has no val/test split; calibrating thresholds on all samples"
        )
        calib_embeddings = all_embeddings
    means = clf.build_references(all_embeddings)
    return clf.calibrate_thresholds(means, calib_embeddings)
