import json
import os

import cv2
import pytest
from click.testing import CliRunner

from handcursor.cli import main
from handcursor.recording import SessionRecording
from handcursor.references import load_references

from test_pipeline import DATA, MODELS, REFERENCES, REPLAY

GOLDEN = os.path.join(DATA, "replay50_golden_commands.txt")


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def crop_dataset(tmp_path):
    """Dataset of class crops cut out of the bundled replay frames."""
    recording = SessionRecording.open(REPLAY)
    crops = {"palm": (2, 40, 40), "point_left": (7, 140, 90),
             "point_right": (14, 160, 110), "fist": (17, 170, 120)}
    root = tmp_path / "dataset"
    val_entries = []
    for name, (frame_no, bx, by) in crops.items():
        frame = recording.read_frame(frame_no)
        crop = frame.pixels[by : by + 70, bx : bx + 70]
        class_dir = root / name
        class_dir.mkdir(parents=True)
        for j in range(3):
            cv2.imwrite(str(class_dir / f"img{j}.png"), cv2.cvtColor(crop, cv2.COLOR_RGB2BGR))
        val_entries.append(f"{name}/img2.png")
    (root / "splits.json").write_text(json.dumps({"val": val_entries, "test": []}))
    return root


def test_run_replay_writes_command_log(runner, tmp_path):
    log_path = tmp_path / "commands.txt"
    result = runner.invoke(
        main,
        [
            "run",
            "--models", MODELS,
            "--references", REFERENCES,
            "--replay", REPLAY,
            "--dry-run",
            "--command-log", str(log_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "frames=50" in result.output
    assert log_path.read_text() == open(GOLDEN).read()


def test_run_requires_one_source(runner):
    result = runner.invoke(
        main,
        ["run", "--models", MODELS, "--references", REFERENCES],
    )
    assert result.exit_code != 0
    assert "exactly one frame source" in result.output


def test_run_with_config_file(runner, tmp_path):
    config_path = tmp_path / "pipeline.json"
    config_path.write_text(json.dumps({"replay_dir": REPLAY, "dry_run": True, "max_frames": 5}))
    result = runner.invoke(
        main,
        [
            "run",
            "--models", MODELS,
            "--references", REFERENCES,
            "--config", str(config_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "frames=5" in result.output


def test_cli_flag_overrides_config_file(runner, tmp_path):
    config_path = tmp_path / "pipeline.json"
    config_path.write_text(json.dumps({"replay_dir": REPLAY, "dry_run": True, "max_frames": 5}))
    result = runner.invoke(
        main,
        [
            "run",
            "--models", MODELS,
            "--references", REFERENCES,
            "--config", str(config_path),
            "--max-frames", "9",
        ],
    )
    assert result.exit_code == 0, result.output
    assert "frames=9" in result.output


def test_calibrate_then_eval(runner, tmp_path, crop_dataset):
    refs_path = tmp_path / "references.json"
    result = runner.invoke(
        main,
        ["calibrate", "--dataset", str(crop_dataset), "--models", MODELS, "--out", str(refs_path)],
    )
    assert result.exit_code == 0, result.output
    refs = load_references(refs_path)
    assert refs.embedding_dim == 1280
    # All three copies per class went into the mean, one per class into
    # the val split used for thresholds.
    assert refs.sample_counts == (1, 1, 1, 1)

    report_path = tmp_path / "report.json"
    result = runner.invoke(
        main,
        [
            "eval",
            "--dataset", str(crop_dataset),
            "--models", MODELS,
            "--references", str(refs_path),
            "--report", str(report_path),
        ],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(report_path.read_text())
    # The stub classifier argmaxes each crop's intended class by design.
    assert report["classifier_accuracy"] == 1.0
    assert "aggregate accuracy" in result.output


def test_screen_and_fps_cap_flags(runner, tmp_path):
    log_path = tmp_path / "commands.txt"
    result = runner.invoke(
        main,
        [
            "run",
            "--models", MODELS,
            "--references", REFERENCES,
            "--replay", REPLAY,
            "--dry-run",
            "--screen", "1280x720",
            "--no-mirror",
            "--max-frames", "3",
            "--fps-cap", "200",
            "--command-log", str(log_path),
        ],
    )
    assert result.exit_code == 0, result.output
    # Frame 2 is the turn-on palm at center (75, 75): no mirror on a
    # 1280x720 screen puts the cursor at (320, 180).
    assert "2,1132.0,move,320,180" in log_path.read_text()


def test_record_without_camera_fails_cleanly(runner, tmp_path):
    result = runner.invoke(
        main,
        ["record", "--out", str(tmp_path / "rec"), "--seconds", "1", "--camera", "99"],
    )
    assert result.exit_code != 0
    assert "99" in result.output
