from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from handcursor.controller import (
    CommandKind,
    ControllerState,
    CursorCommand,
    Mode,
    ScreenGeometry,
    SimulatedCursorBackend,
    apply,
    map_coordinate,
    none_command,
    smooth,
    step,
)
from handcursor.gestures import GestureLabel

FHD = ScreenGeometry(width=1920, height=1080, mirror_x=False, alpha=1.0)


@dataclass(frozen=True)
class FakeDecision:
    label: GestureLabel

    @property
    def accepted(self):
        return self.label is not GestureLabel.UNKNOWN


PALM = FakeDecision(GestureLabel.PALM)
FIST = FakeDecision(GestureLabel.FIST)
LEFT = FakeDecision(GestureLabel.POINT_LEFT)
RIGHT = FakeDecision(GestureLabel.POINT_RIGHT)
UNKNOWN = FakeDecision(GestureLabel.UNKNOWN)
ALL_LABELS = (PALM, FIST, LEFT, RIGHT, UNKNOWN)

CENTER = (150.0, 150.0)


class TestMapCoordinate:
    def test_midpoint(self):
        assert map_coordinate((150, 150), FHD) == (960, 540)

    def test_corners_clamp(self):
        assert map_coordinate((0, 0), FHD) == (0, 0)
        assert map_coordinate((300, 300), FHD) == (1919, 1079)

    def test_mirror_case(self):
        geom = ScreenGeometry(width=1280, height=720, mirror_x=True, alpha=1.0)
        # 75/300*1280 = 320, mirrored to 1279-320 = 959; 225/300*720 = 540.
        assert map_coordinate((75, 225), geom) == (959, 540)

    def test_monotone_and_in_bounds(self):
        previous_x = previous_y = -1
        for c in range(0, 301, 7):
            x, y = map_coordinate((c, c), FHD)
            assert 0 <= x < 1920 and 0 <= y < 1080
            assert x >= previous_x and y >= previous_y
            previous_x, previous_y = x, y


class TestSmooth:
    def test_alpha_one_is_target(self):
        assert smooth((3, 4), (100, 200), 1.0) == (100, 200)

    def test_fixed_point(self):
        assert smooth((42, 17), (42, 17), 0.3) == (42, 17)

    def test_half_alpha(self):
        assert smooth((0, 0), (100, 100), 0.5) == (50, 50)


class TestStepTable:
    def test_off_palm_turns_on_and_moves(self):
        state, command = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        assert state.mode is Mode.ON
        assert command.kind is CommandKind.MOVE
        assert (command.x, command.y) == (960, 540)

    def test_off_ignores_everything_else(self):
        for decision in (FIST, LEFT, RIGHT, UNKNOWN):
            before = ControllerState()
            after, command = step(before, decision, CENTER, FHD, now_ms=0.0)
            assert after == before  # state untouched, Fist included
            assert command.kind is CommandKind.NONE

    def test_on_palm_moves_smoothed(self):
        geom = ScreenGeometry(width=1920, height=1080, mirror_x=False, alpha=0.5)
        state, _ = step(ControllerState(), PALM, (0.0, 0.0), geom, now_ms=0.0)
        state, command = step(state, PALM, (300.0, 300.0), geom, now_ms=66.0)
        # Previous (0,0), target (1919,1079), alpha 0.5.
        assert command.kind is CommandKind.MOVE
        assert (command.x, command.y) == (960, 540)
        assert state.cursor == (960, 540)

    def test_on_fist_turns_off(self):
        state, _ = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        state, command = step(state, FIST, CENTER, FHD, now_ms=66.0)
        assert state.mode is Mode.OFF
        assert command.kind is CommandKind.NONE

    def test_on_unknown_keeps_on_resets_streak(self):
        state, _ = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        state, _ = step(state, LEFT, CENTER, FHD, now_ms=66.0)
        assert state.streak_count == 1
        state, command = step(state, UNKNOWN, None, FHD, now_ms=132.0)
        assert state.mode is Mode.ON
        assert command.kind is CommandKind.NONE
        assert state.streak_count == 0

    def test_click_debounce_three_frames(self):
        state, _ = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        now = 0.0
        commands = []
        for _ in range(3):
            now += 66.0
            state, command = step(state, LEFT, CENTER, FHD, now_ms=now)
            commands.append(command.kind)
        assert commands == [CommandKind.NONE, CommandKind.NONE, CommandKind.CLICK]

    def test_click_cooldown_blocks_repeat(self):
        state, _ = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        now = 0.0
        kinds = []
        for _ in range(18):
            now += 66.0
            state, command = step(state, LEFT, CENTER, FHD, now_ms=now)
            kinds.append(command.kind)
        clicks = [i for i, k in enumerate(kinds) if k is CommandKind.CLICK]
        assert clicks[0] == 2
        # Next click only after >= 700 ms: 66 ms frames mean 11 frames later.
        assert len(clicks) == 2 and clicks[1] - clicks[0] == 11

    def test_right_click_independent_cooldown(self):
        state, _ = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        now = 0.0
        for _ in range(3):
            now += 66.0
            state, command = step(state, LEFT, CENTER, FHD, now_ms=now)
        assert command.kind is CommandKind.CLICK
        for _ in range(3):
            now += 66.0
            state, command = step(state, RIGHT, CENTER, FHD, now_ms=now)
        # Left's recent click does not consume right's cooldown.
        assert command.kind is CommandKind.RIGHT_CLICK

    def test_streak_broken_by_other_label(self):
        state, _ = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        state, _ = step(state, LEFT, CENTER, FHD, now_ms=66.0)
        state, _ = step(state, LEFT, CENTER, FHD, now_ms=132.0)
        state, _ = step(state, PALM, CENTER, FHD, now_ms=198.0)
        state, command = step(state, LEFT, CENTER, FHD, now_ms=264.0)
        assert command.kind is CommandKind.NONE
        assert state.streak_count == 1

    def test_missing_center_for_accepted_decision(self):
        with pytest.raises(ValueError):
            step(ControllerState(), PALM, None, FHD, now_ms=0.0)

    def test_step_is_pure(self):
        state, _ = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        first = step(state, LEFT, CENTER, FHD, now_ms=66.0)
        second = step(state, LEFT, CENTER, FHD, now_ms=66.0)
        assert first == second

    def test_exhaustive_state_label_pairs(self):
        # Every (mode, label) pair honors the table's command alphabet.
        on_state, _ = step(ControllerState(), PALM, CENTER, FHD, now_ms=0.0)
        for start in (ControllerState(), on_state):
            for decision in ALL_LABELS:
                center = CENTER if decision.accepted else None
                state, command = step(start, decision, center, FHD, now_ms=1e6)
                if start.mode is Mode.OFF:
                    if decision is PALM:
                        assert state.mode is Mode.ON
                        assert command.kind is CommandKind.MOVE
                    else:
                        assert state == start
                        assert command.kind is CommandKind.NONE
                else:
                    if decision is FIST:
                        assert state.mode is Mode.OFF
                    else:
                        assert state.mode is Mode.ON
                    if decision is PALM:
                        assert command.kind is CommandKind.MOVE
                    elif decision in (FIST, UNKNOWN):
                        assert command.kind is CommandKind.NONE


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_random_sequences_respect_safety(data):
    labels = data.draw(
        st.lists(st.sampled_from(ALL_LABELS), min_size=1, max_size=60)
    )
    debounce = data.draw(st.integers(min_value=1, max_value=4))
    cooldown = data.draw(st.sampled_from([0.0, 100.0, 700.0]))
    state = ControllerState()
    now = 0.0
    click_times = {"left": [], "right": []}
    streak = (None, 0)
    for decision in labels:
        now += data.draw(st.integers(min_value=1, max_value=200))
        mode_before = state.mode
        center = CENTER if decision.accepted else None
        state, command = step(
            state, decision, center, FHD, now_ms=now,
            debounce_frames=debounce, cooldown_ms=cooldown,
        )
        # Independent streak bookkeeping (only meaningful in On mode).
        if mode_before is Mode.ON and decision.accepted:
            streak = (decision.label, streak[1] + 1 if streak[0] is decision.label else 1)
        elif mode_before is Mode.ON:
            streak = (None, 0)
        if mode_before is Mode.OFF:
            streak = (GestureLabel.PALM, 1) if decision is PALM else (None, 0)
            # Safety: no click or plain move ever leaves Off mode.
            if decision is PALM:
                assert command.kind is CommandKind.MOVE
            else:
                assert command.kind is CommandKind.NONE
        if command.kind is CommandKind.CLICK:
            assert mode_before is Mode.ON
            assert streak[0] is GestureLabel.POINT_LEFT and streak[1] >= debounce
            assert all(now - t >= cooldown for t in click_times["left"])
            click_times["left"].append(now)
        if command.kind is CommandKind.RIGHT_CLICK:
            assert mode_before is Mode.ON
            assert streak[0] is GestureLabel.POINT_RIGHT and streak[1] >= debounce
            assert all(now - t >= cooldown for t in click_times["right"])
            click_times["right"].append(now)


class TestApply:
    def test_simulated_log_order(self):
        backend = SimulatedCursorBackend()
        apply(CursorCommand(CommandKind.MOVE, 10, 10, seq=0), backend, timestamp_ms=1.0)
        apply(CursorCommand(CommandKind.CLICK, seq=1), backend, timestamp_ms=2.0)
        assert backend.snapshot() == [(0, 1.0, "move", 10, 10), (1, 2.0, "click", 10, 10)]
        assert backend.to_text() == "0,1.0,move,10,10\n1,2.0,click,10,10\n"

    def test_none_is_noop(self):
        backend = SimulatedCursorBackend()
        apply(none_command(), backend)
        assert backend.snapshot() == []

    def test_hundred_random_commands_order_preserved(self, rng):
        backend = SimulatedCursorBackend()
        kinds = [CommandKind.MOVE, CommandKind.CLICK, CommandKind.RIGHT_CLICK]
        issued = []
        for i in range(100):
            kind = kinds[rng.integers(0, 3)]
            if kind is CommandKind.MOVE:
                command = CursorCommand(kind, int(rng.integers(0, 1920)), int(rng.integers(0, 1080)), seq=i)
            else:
                command = CursorCommand(kind, seq=i)
            issued.append(command)
            apply(command, backend, timestamp_ms=float(i))
        log = backend.snapshot()
        assert len(log) == 100
        assert [record[0] for record in log] == list(range(100))
        assert [record[2] for record in log] == [c.kind.value for c in issued]

    def test_export_log(self, tmp_path):
        backend = SimulatedCursorBackend()
        apply(CursorCommand(CommandKind.MOVE, 5, 6, seq=3), backend, timestamp_ms=9.0)
        path = tmp_path / "log.csv"
        backend.export_log(path)
        assert path.read_text() == "3,9.0,move,5,6\n"
