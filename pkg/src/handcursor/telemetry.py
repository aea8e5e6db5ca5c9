"""Telemetry channel: per-frame events out, control messages in.

Wire protocol (version 1). Every message is a single UTF-8 JSON object
with a ``type`` field and ``"v": 1``.

Event, one per processed frame, in sequence order::

    {"type": "frame", "v": 1, "seq": 12, "timestamp_ms": 123.4,
     "frame_timestamp_ms": 1792.0, "state": "on",
     "bbox": [x, y, w, h] | null, "center": [cx, cy] | null,
     "decision": {"label": "palm", "classifier_label": "palm",
                  "nearest_class": "palm", "nearest_distance": 1.2,
                  "accepted": true, "distances": {class: float},
                  "effective_thresholds": {class: float}} | null,
     "command": {"kind": "move", "x": 10, "y": 20} | null,
     "fps": 15.2 | null, "thumbnail": "<base64 jpeg>" | null}

Control messages (client to pipeline); each is answered with
``{"type": "ack", "v": 1, "of": <type>}`` or
``{"type": "error", "v": 1, "of": <type>, "message": ...}``::

    {"type": "set_threshold_scale", "v": 1, "value": 1.5}
    {"type": "set_dry_run", "v": 1, "value": true}
    {"type": "set_debounce", "v": 1, "n": 3, "cooldown_ms": 700}
    {"type": "snapshot", "v": 1, "class": "palm"}
    {"type": "rebuild_references", "v": 1}

A malformed message gets an error reply and the stream continues; control
is applied by the frame loop between frames, never mid-frame. Subscribers
joining mid-run receive events from the next frame onward (no backfill).
"""

import base64
import json
import logging
import queue
import threading
from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np

from .controller import CommandKind, CursorCommand, Mode
from .gestures import CLASS_NAMES

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

CONTROL_TYPES = (
    "set_threshold_scale",
    "set_dry_run",
    "set_debounce",
    "snapshot",
    "rebuild_references",
)

#: Event fields that vary run to run even on identical inputs.
VOLATILE_EVENT_FIELDS = ("timestamp_ms", "fps")


@dataclass(frozen=True)
class TelemetryEvent:
    seq: int
    timestamp_ms: float
    frame_timestamp_ms: float
    mode: Mode
    decision: Optional[object] = None
    bbox: Optional[tuple] = None
    center: Optional[tuple] = None
    command: Optional[CursorCommand] = None
    fps: Optional[float] = None
    thumbnail: Optional[str] = None
    # Effective thresholds ride along outside GestureDecision so the event
    # shows the gate exactly as configured at that frame.
    effective_thresholds: tuple = ()

    def to_json(self) -> dict:
        decision = None
        if self.decision is not None:
            d = self.decision
            decision = {
                "label": d.label.value,
                "classifier_label": d.classifier_label.value,
                "nearest_class": d.nearest_class.value,
                "nearest_distance": d.nearest_distance,
                "accepted": d.accepted,
                "distances": dict(zip(CLASS_NAMES, (float(v) for v in d.distances))),
                "effective_thresholds": dict(
                    zip(CLASS_NAMES, (float(v) for v in self.effective_thresholds))
                ),
            }
        command = None
        if self.command is not None and self.command.kind is not CommandKind.NONE:
            command = {"kind": self.command.kind.value}
            if self.command.x is not None:
                command["x"] = self.command.x
                command["y"] = self.command.y
        return {
            "type": "frame",
            "v": PROTOCOL_VERSION,
            "seq": self.seq,
            "timestamp_ms": self.timestamp_ms,
            "frame_timestamp_ms": self.frame_timestamp_ms,
            "state": self.mode.value,
            "bbox": list(self.bbox) if self.bbox is not None else None,
            "center": list(self.center) if self.center is not None else None,
            "decision": decision,
            "command": command,
            "fps": self.fps,
            "thumbnail": self.thumbnail,
        }


def strip_volatile(event_json: dict) -> dict:
    """Drop wall-clock fields so replayed streams can be compared."""
    return {k: v for k, v in event_json.items() if k not in VOLATILE_EVENT_FIELDS}


def encode_thumbnail(rgb_image: np.ndarray, max_side: int = 150) -> str:
    """Downscale and JPEG-encode a frame for the event stream."""
    h, w = rgb_image.shape[:2]
    scale = max_side / max(h, w)
    if scale < 1.0:
        rgb_image = cv2.resize(rgb_image, (max(1, int(w * scale)), max(1, int(h * scale))))
    if rgb_image.dtype != np.uint8:
        rgb_image = np.clip(rgb_image * 255.0, 0, 255).astype(np.uint8)
    ok, buf = cv2.imencode(".jpg", cv2.cvtColor(rgb_image, cv2.COLOR_RGB2BGR))
    if not ok:
        raise RuntimeError("thumbnail encoding failed")
    return base64.b64encode(buf.tobytes()).decode("ascii")


def error_reply(of: str, message: str) -> dict:
    return {"type": "error", "v": PROTOCOL_VERSION, "of": of, "message": message}


def ack_reply(of: str, **extra) -> dict:
    return {"type": "ack", "v": PROTOCOL_VERSION, "of": of, **extra}


class TelemetryServer:
    """WebSocket fan-out of frame events plus a control-message intake queue.

    The frame loop calls `broadcast` and drains `control_queue` between
    frames; connection handling lives on server threads. When `static_dir`
    is set, plain HTTP GETs are answered with files from it so the operator
    dashboard can be served off the same port.
    """

    def __init__(self, port: int, host: str = "127.0.0.1", static_dir=None):
        from websockets.sync.server import serve

        self.port = port
        self.host = host
        self.static_dir = static_dir
        self.control_queue = queue.Queue()
        self._connections = set()
        self._lock = threading.Lock()
        # Raises OSError when the port is already in use.
        self._server = serve(
            self._handler, host, port, process_request=self._process_request
        )
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def _process_request(self, connection, request):
        if self.static_dir is None:
            return None
        if "Upgrade" in request.headers.get("Connection", ""):
            return None
        return self._serve_static(connection, request)

    def _serve_static(self, connection, request):
        import os

        from websockets.http11 import Response

        path = request.path.split("?")[0]
        if path.endswith("/"):
            path += "index.html"
        full = os.path.realpath(os.path.join(self.static_dir, path.lstrip("/")))
        root = os.path.realpath(self.static_dir)
        if not full.startswith(root) or not os.path.isfile(full):
            body = b"not found"
            return Response(404, "Not Found", headers_from({}, body), body)
        content_types = {
            ".html": "text/html",
            ".js": "text/javascript",
            ".css": "text/css",
            ".json": "application/json",
        }
        ctype = content_types.get(os.path.splitext(full)[1], "application/octet-stream")
        with open(full, "rb") as fh:
            body = fh.read()
        return Response(200, "OK", headers_from({"Content-Type": ctype}, body), body)

    def _handler(self, connection):
        with self._lock:
            self._connections.add(connection)
        try:
            for message in connection:
                try:
                    doc = json.loads(message)
                    if not isinstance(doc, dict) or "type" not in doc:
                        raise ValueError("message must be an object with a type field")
                except (json.JSONDecodeError, ValueError, UnicodeDecodeError) as exc:
                    self.send(connection, error_reply("?", f"malformed message: {exc}"))
                    continue
                if doc.get("v", PROTOCOL_VERSION) != PROTOCOL_VERSION:
                    self.send(connection, error_reply(doc["type"], f"unsupported version {doc.get('v')}"))
                    continue
                if doc["type"] not in CONTROL_TYPES:
                    self.send(connection, error_reply(doc["type"], "unknown control type"))
                    continue
                self.control_queue.put((connection, doc))
        except Exception:
            pass
        finally:
            with self._lock:
                self._connections.discard(connection)

    def send(self, connection, doc: dict):
        try:
            connection.send(json.dumps(doc))
        except Exception:
            with self._lock:
                self._connections.discard(connection)

    def broadcast(self, doc: dict):
        payload = json.dumps(doc)
        with self._lock:
            connections = list(self._connections)
        for connection in connections:
            try:
                connection.send(payload)
            except Exception:
                with self._lock:
                    self._connections.discard(connection)

    @property
    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._connections)

    def close(self):
        self._server.shutdown()
        self._thread.join(timeout=5.0)


def headers_from(mapping: dict, body: bytes = b""):
    from websockets.datastructures import Headers

    headers = Headers()
    for key, value in mapping.items():
        headers[key] = value
    headers["Content-Length"] = str(len(body))
    return headers
