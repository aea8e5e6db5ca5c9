"""On/off cursor control state machine and cursor backends.

Transition table (labels are accepted open-set decisions; Unknown means the
gate rejected the crop):

    Off + Palm        -> On, Move(mapped center)      turn-on frame also moves
    Off + anything    -> Off, no command, state untouched
    On  + Palm        -> On, Move(smoothed mapped center)
    On  + PointLeft   -> Click   after N consecutive PointLeft frames and
    On  + PointRight  -> RClick  per-button cooldown, else no command
    On  + Fist        -> Off, no command
    On  + Unknown     -> On, no command, click streak reset

Frames without any detection never reach `step`, so a detection gap leaves
the streak counter alone; a rejected (Unknown) frame resets it. `step` is a
pure transition function: it returns a new state and never mutates its
arguments, which is what makes session replay deterministic.
"""

import enum
import logging
from dataclasses import dataclass, replace
from typing import Optional

from .detector import DETECTOR_SIZE
from .errors import BackendUnavailableError
from .gestures import GestureLabel

logger = logging.getLogger(__name__)

DEFAULT_DEBOUNCE_FRAMES = 3
DEFAULT_COOLDOWN_MS = 700.0
DEFAULT_ALPHA = 0.6


class Mode(enum.Enum):
    OFF = "off"
    ON = "on"


class CommandKind(enum.Enum):
    MOVE = "move"
    CLICK = "click"
    RIGHT_CLICK = "right_click"
    NONE = "none"


@dataclass(frozen=True)
class CursorCommand:
    kind: CommandKind
    x: Optional[int] = None
    y: Optional[int] = None
    seq: int = -1

    @property
    def is_action(self) -> bool:
        return self.kind is not CommandKind.NONE


def none_command(seq: int = -1) -> CursorCommand:
    return CursorCommand(kind=CommandKind.NONE, seq=seq)


@dataclass(frozen=True)
class ScreenGeometry:
    """Target screen plus the mapping knobs from detector space."""

    width: int
    height: int
    mirror_x: bool = True
    alpha: float = DEFAULT_ALPHA  # smoothing factor in (0, 1]; 1 disables

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"screen must be at least 1x1, got {self.width}x{self.height}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class ControllerState:
    """FSM state: mode, click-debounce streak, per-button cooldown clocks."""

    mode: Mode = Mode.OFF
    streak_label: Optional[GestureLabel] = None
    streak_count: int = 0
    last_click_ms: float = float("-inf")
    last_right_click_ms: float = float("-inf")
    cursor: Optional[tuple] = None  # last emitted screen position


def map_coordinate(center, geom: ScreenGeometry):
    """Map a detector-space center (cx, cy in [0, 300]) to screen pixels.

    Linear scale x = cx/300 * width (same for y), mirrored horizontally when
    `mirror_x`, clamped to the screen, floored to integers.
    """
    cx, cy = center
    x = cx / DETECTOR_SIZE * geom.width
    y = cy / DETECTOR_SIZE * geom.height
    if geom.mirror_x:
        x = (geom.width - 1) - x
    x = min(max(x, 0.0), geom.width - 1)
    y = min(max(y, 0.0), geom.height - 1)
    return (int(x), int(y))


def smooth(previous, target, alpha: float):
    """Exponential moving average p + alpha * (t - p), rounded to pixels."""
    px, py = previous
    tx, ty = target
    return (
        int(round(px + alpha * (tx - px))),
        int(round(py + alpha * (ty - py))),
    )


def _update_streak(state: ControllerState, label: GestureLabel) -> ControllerState:
    if state.streak_label is label:
        return replace(state, streak_count=state.streak_count + 1)
    return replace(state, streak_label=label, streak_count=1)


def step(
    state: ControllerState,
    decision,
    center,
    geom: ScreenGeometry,
    now_ms: float,
    debounce_frames: int = DEFAULT_DEBOUNCE_FRAMES,
    cooldown_ms: float = DEFAULT_COOLDOWN_MS,
    seq: int = -1,
):
    """Advance the FSM one accepted-or-rejected frame.

    `decision` is the open-set gate's output; `center` is the detection
    center and must be present whenever the decision was accepted. Returns
    (new state, command).
    """
    label = decision.label
    if decision.accepted and center is None:
        raise ValueError("accepted decision requires a detection center")

    if state.mode is Mode.OFF:
        if label is GestureLabel.PALM:
            position = map_coordinate(center, geom)
            new_state = replace(
                state,
                mode=Mode.ON,
                streak_label=GestureLabel.PALM,
                streak_count=1,
                cursor=position,
            )
            return new_state, CursorCommand(CommandKind.MOVE, *position, seq=seq)
        # Anything else, including Fist and Unknown, leaves Off untouched.
        return state, none_command(seq)

    # Mode.ON
    if label is GestureLabel.UNKNOWN:
        return replace(state, streak_label=None, streak_count=0), none_command(seq)

    if label is GestureLabel.FIST:
        new_state = replace(state, mode=Mode.OFF, streak_label=None, streak_count=0)
        return new_state, none_command(seq)

    new_state = _update_streak(state, label)

    if label is GestureLabel.PALM:
        target = map_coordinate(center, geom)
        position = smooth(state.cursor, target, geom.alpha) if state.cursor else target
        new_state = replace(new_state, cursor=position)
        return new_state, CursorCommand(CommandKind.MOVE, *position, seq=seq)

    if label is GestureLabel.POINT_LEFT:
        if (
            new_state.streak_count >= debounce_frames
            and now_ms - state.last_click_ms >= cooldown_ms
        ):
            new_state = replace(new_state, last_click_ms=now_ms)
            return new_state, CursorCommand(CommandKind.CLICK, seq=seq)
        return new_state, none_command(seq)

    if label is GestureLabel.POINT_RIGHT:
        if (
            new_state.streak_count >= debounce_frames
            and now_ms - state.last_right_click_ms >= cooldown_ms
        ):
            new_state = replace(new_state, last_right_click_ms=now_ms)
            return new_state, CursorCommand(CommandKind.RIGHT_CLICK, seq=seq)
        return new_state, none_command(seq)

    raise AssertionError(f"unhandled label {label}")


class SimulatedCursorBackend:
    """Records commands instead of touching the OS; used by dry runs and tests.

    The log is an ordered list of ``seq,timestamp_ms,command,x,y`` records.
    Click records carry the tracked cursor position at click time.
    """

    def __init__(self):
        self._log = []
        self._position = None

    def move(self, x: int, y: int, seq: int, timestamp_ms: float):
        self._position = (x, y)
        self._log.append((seq, timestamp_ms, "move", x, y))

    def click(self, seq: int, timestamp_ms: float):
        x, y = self._position if self._position else ("", "")
        self._log.append((seq, timestamp_ms, "click", x, y))

    def right_click(self, seq: int, timestamp_ms: float):
        x, y = self._position if self._position else ("", "")
        self._log.append((seq, timestamp_ms, "right_click", x, y))

    def snapshot(self):
        return list(self._log)

    def to_text(self) -> str:
        lines = [",".join(str(field) for field in record) for record in self._log]
        return "\n".join(lines) + ("\n" if lines else "")

    def export_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


class SystemCursorBackend:
    """Injects real OS cursor events via pynput or pyautogui.

    Raises BackendUnavailableError when neither library can drive a display
    (headless session, missing dependency); callers degrade to dry-run.
    """

    def __init__(self):
        self._impl = None
        try:
            from pynput.mouse import Button, Controller

            self._mouse = Controller()
            self._button = Button
            self._impl = "pynput"
        except Exception:
            try:
                import pyautogui

                self._pyautogui = pyautogui
                self._impl = "pyautogui"
            except Exception as exc:
                raise BackendUnavailableError(
                    f"no usable cursor backend (no display session?): {exc}"
                ) from exc

    def move(self, x: int, y: int, seq: int, timestamp_ms: float):
        if self._impl == "pynput":
            self._mouse.position = (x, y)
        else:
            self._pyautogui.moveTo(x, y)

    def click(self, seq: int, timestamp_ms: float):
        if self._impl == "pynput":
            self._mouse.click(self._button.left)
        else:
            self._pyautogui.click()

    def right_click(self, seq: int, timestamp_ms: float):
        if self._impl == "pynput":
            self._mouse.click(self._button.right)
        else:
            self._pyautogui.rightClick()


def apply(command: CursorCommand, backend, timestamp_ms: float = 0.0):
    """Dispatch one command to a backend; NONE is a no-op everywhere."""
    if command.kind is CommandKind.NONE:
        return
    if command.kind is CommandKind.MOVE:
        backend.move(command.x, command.y, command.seq, timestamp_ms)
    elif command.kind is CommandKind.CLICK:
        backend.click(command.seq, timestamp_ms)
    elif command.kind is CommandKind.RIGHT_CLICK:
        backend.right_click(command.seq, timestamp_ms)
