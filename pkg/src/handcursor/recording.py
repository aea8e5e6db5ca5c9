"""Session recordings and frame sources.

A recording is a directory of ``frame_%06d.png`` images plus a
``manifest.json`` with capture geometry and per-frame timestamps. The same
directory serves as replay input and as raw material for datasets.
"""

import json
import os
import time

import cv2
import numpy as np

from .detector import Frame
from .errors import SourceUnavailableError

MANIFEST_NAME = "manifest.json"
FRAME_PATTERN = "frame_%06d.png"
MANIFEST_VERSION = 1


class SessionRecording:
    """Handle to a recording directory; validates the manifest on open."""

    def __init__(self, directory, manifest):
        self.directory = os.fspath(directory)
        self.manifest = manifest
        timestamps = manifest["timestamps_ms"]
        if len(timestamps) != manifest["frame_count"]:
            raise ValueError("manifest frame_count does not match timestamps")
        if any(b < a for a, b in zip(timestamps, timestamps[1:])):
            raise ValueError("manifest timestamps must be nondecreasing")
        for i in range(manifest["frame_count"]):
            if not os.path.isfile(self.frame_path(i)):
                raise SourceUnavailableError(f"recording missing frame {i}")

    @property
    def frame_count(self) -> int:
        return self.manifest["frame_count"]

    def frame_path(self, index: int) -> str:
        return os.path.join(self.directory, FRAME_PATTERN % index)

    def read_frame(self, index: int) -> Frame:
        bgr = cv2.imread(self.frame_path(index))
        if bgr is None:
            raise SourceUnavailableError(f"unreadable frame {self.frame_path(index)}")
        return Frame(
            pixels=cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB),
            seq=index,
            timestamp_ms=float(self.manifest["timestamps_ms"][index]),
        )

    def __iter__(self):
        for i in range(self.frame_count):
            yield self.read_frame(i)

    @classmethod
    def open(cls, directory) -> "SessionRecording":
        directory = os.fspath(directory)
        manifest_path = os.path.join(directory, MANIFEST_NAME)
        if not os.path.isfile(manifest_path):
            raise SourceUnavailableError(f"no {MANIFEST_NAME} in {directory}")
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("version") != MANIFEST_VERSION:
            raise SourceUnavailableError(
                f"unsupported manifest version {manifest.get('version')}"
            )
        return cls(directory, manifest)

    @classmethod
    def write(cls, directory, frames) -> "SessionRecording":
        """Persist frames (RGB uint8) and build the manifest."""
        directory = os.fspath(directory)
        os.makedirs(directory, exist_ok=True)
        timestamps = []
        width = height = None
        for i, frame in enumerate(frames):
            if width is None:
                height, width = frame.pixels.shape[:2]
            bgr = cv2.cvtColor(np.ascontiguousarray(frame.pixels), cv2.COLOR_RGB2BGR)
            if not cv2.imwrite(os.path.join(directory, FRAME_PATTERN % i), bgr):
                raise IOError(f"failed to write frame {i} under {directory}")
            timestamps.append(float(frame.timestamp_ms))
        manifest = {
            "version": MANIFEST_VERSION,
            "frame_count": len(timestamps),
            "width": width or 0,
            "height": height or 0,
            "timestamps_ms": timestamps,
        }
        with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh)
            fh.write("\n")
        return cls(directory, manifest)


class ReplaySource:
    """Frame source that walks a recording in order."""

    def __init__(self, directory):
        self.recording = SessionRecording.open(directory)
        self._index = 0

    def read(self):
        if self._index >= self.recording.frame_count:
            return None
        frame = self.recording.read_frame(self._index)
        self._index += 1
        return frame

    def close(self):
        pass


class CameraSource:
    """Frame source backed by a webcam.

    Keeps the capture buffer at one frame where the driver allows it, so a
    slow consumer reads the newest frame rather than a backlog.
    """

    def __init__(self, camera_index: int):
        self._capture = cv2.VideoCapture(camera_index)
        if not self._capture.isOpened():
            raise SourceUnavailableError(f"camera {camera_index} did not open")
        self._capture.set(cv2.CAP_PROP_BUFFERSIZE, 1)
        self._seq = 0

    def read(self):
        ok, bgr = self._capture.read()
        if not ok or bgr is None:
            return None
        frame = Frame(
            pixels=cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB),
            seq=self._seq,
            timestamp_ms=time.monotonic() * 1000.0,
        )
        self._seq += 1
        return frame

    def close(self):
        self._capture.release()


class ArraySource:
    """In-memory frame source for tests and synthetic sessions."""

    def __init__(self, frames):
        self._frames = list(frames)
        self._index = 0

    def read(self):
        if self._index >= len(self._frames):
            return None
        frame = self._frames[self._index]
        self._index += 1
        return frame

    def close(self):
        pass
