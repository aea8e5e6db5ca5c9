#!/usr/bin/env python3
"""Regenerate the bundled 50-frame synthetic replay fixture.

Builds, under tests/data/:

* models_stub/            deterministic stub model configs
* replay50/               manifest + 50 PNG frames
* replay50_references.json
* replay50_golden_commands.txt

The stub networks are linear maps of the frame pixels, so frames can be
*constructed* to produce chosen detector scores, box corners and classifier
logits: paint a per-class texture at the box location, then solve a small
least-squares system over the pixels the constrained outputs actually tap
(minimum-norm solution, pixels inside the texture held fixed). A greedy
one-pixel repair pass absorbs uint8 quantization so every gesture frame
yields exactly the intended integer bounding box.

The golden command log is derived here by an independent scratch trace of
the controller transition table over the per-frame decisions; the pipeline
never touches it. Every intent (detection, label, accept/reject margins)
is asserted before anything is written.
"""

import json
import os
import sys

import cv2
import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from handcursor import classifier as clf
from handcursor import detector as det
from handcursor.runtime import StubNetworkConfig, TensorSpec, make_stub

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "data")

DETECTOR_SEED = 1234
CLASSIFIER_SEED = 5678
N_CANDIDATES = 8
BOX = 70          # crop size in detector pixels
MARGIN = 10       # texture painted this far beyond the box on every side
BACKGROUND = 0.45
SCORE_HIT = 0.9
SCORE_MISS = 0.15
MIN_SCORE = 0.5

CLASSES = ("fist", "palm", "point_left", "point_right")
# Intended argmax index per texture; unknown gets a palm argmax but the
# gate must reject it.
INTENDED_ARGMAX = {"fist": 0, "palm": 1, "point_left": 2, "point_right": 3, "unknown": 1}
LOGIT_MARGIN = 1.2

# (kind, box_x, box_y); None position means an empty background frame.
SCENARIO = [
    ("none", None, None),
    ("unknown", 115, 115),
    ("palm", 40, 40),
    ("palm", 60, 50),
    ("palm", 80, 60),
    ("palm", 100, 70),
    ("palm", 120, 80),
    ("point_left", 140, 90),
    ("point_left", 140, 90),
    ("point_left", 140, 90),   # click fires (3rd consecutive)
    ("point_left", 140, 90),   # blocked by cooldown
    ("palm", 150, 100),
    ("none", None, None),
    ("unknown", 115, 115),
    ("point_right", 160, 110),
    ("point_right", 160, 110),
    ("point_right", 160, 110),  # right-click fires
    ("fist", 170, 120),         # off
    ("point_left", 140, 90),    # ignored while off
    ("palm", 60, 120),          # back on
    ("palm", 80, 130),
    ("palm", 100, 140),
    ("point_left", 120, 150),
    ("point_left", 120, 150),
    ("point_left", 120, 150),   # click fires (cooldown elapsed)
    ("palm", 140, 160),
    ("palm", 160, 170),
    ("point_right", 180, 180),
    ("point_right", 180, 180),
    ("unknown", 115, 115),      # resets the debounce streak
    ("point_right", 180, 180),
    ("point_right", 180, 180),
    ("point_right", 180, 180),  # right-click fires
    ("palm", 40, 170),
    ("none", None, None),
    ("palm", 60, 160),
    ("palm", 80, 150),
    ("point_left", 100, 140),
    ("point_left", 100, 140),
    ("point_left", 100, 140),   # click fires
    ("point_left", 100, 140),   # cooldown blocked
    ("point_left", 100, 140),   # cooldown blocked
    ("palm", 120, 130),
    ("palm", 140, 120),
    ("fist", 160, 110),         # off
    ("palm", 180, 100),         # on again
    ("palm", 170, 90),
    ("unknown", 115, 115),
    ("palm", 150, 80),
    ("fist", 140, 70),          # off at the end
]

TIMESTAMP_BASE = 1000.0
FRAME_INTERVAL = 66.0

SCREEN_W, SCREEN_H = 1920, 1080
MIRROR_X = True
ALPHA = 0.6
DEBOUNCE_N = 3
COOLDOWN_MS = 700.0

JITTERS_PER_CLASS = 6
JITTER_AMPLITUDE = 0.08


def stub_configs():
    detector = StubNetworkConfig(
        seed=DETECTOR_SEED,
        input_spec=TensorSpec("image", (1, 300, 300, 3)),
        output_specs=(
            TensorSpec("boxes", (N_CANDIDATES, 4)),
            TensorSpec("scores", (N_CANDIDATES, 1)),
        ),
        metadata={"name": "stub-detector"},
    )
    classifier = StubNetworkConfig(
        seed=CLASSIFIER_SEED,
        input_spec=TensorSpec("image", (1, 70, 70, 3)),
        output_specs=(
            TensorSpec("embedding", (1, 1280)),
            TensorSpec("logits", (1, 4)),
        ),
        metadata={"name": "stub-classifier"},
    )
    return detector, classifier


def make_textures(rng):
    """Smooth per-class textures: low spatial frequency keeps embeddings
    stable under one-pixel box shifts."""
    side = BOX + 2 * MARGIN
    textures = {}
    for name in CLASSES + ("unknown",):
        raw = rng.random((side, side, 3))
        blurred = cv2.blur(raw, (15, 15))
        lo, hi = blurred.min(), blurred.max()
        textures[name] = 0.15 + 0.7 * (blurred - lo) / (hi - lo)
    return textures


def solve_texture_logits(texture, cls_tables):
    """Adjust texture pixels until the interior crop argmaxes the intended
    class by a wide margin.

    Absolute logit levels are hard to reach (each row's tap weights skew
    negative), but relative margins are easy because the rows tap mostly
    disjoint pixels: push the intended row's taps up and the runner-up's
    taps down, projected back into a safe pixel range.
    """
    name = texture["name"]
    canvas = texture["pixels"]
    idx, wts = cls_tables  # logits tap table: (4, k)
    crop = canvas[MARGIN : MARGIN + BOX, MARGIN : MARGIN + BOX].copy()
    flat = crop.reshape(-1)
    intended = INTENDED_ARGMAX[name]

    def logits():
        values = np.zeros(4)
        for j in range(4):
            for i, w in zip(idx[j], wts[j]):
                values[j] += w * flat[int(i)]
        return values

    for _ in range(2000):
        values = logits()
        others = [j for j in range(4) if j != intended]
        runner_up = max(others, key=lambda j: values[j])
        margin = values[intended] - values[runner_up]
        if margin >= LOGIT_MARGIN:
            break
        direction = np.zeros_like(flat)
        for i, w in zip(idx[intended], wts[intended]):
            direction[int(i)] += w
        for i, w in zip(idx[runner_up], wts[runner_up]):
            direction[int(i)] -= w
        norm_sq = float((direction**2).sum())
        flat += (0.1 / norm_sq) * direction
        np.clip(flat, 0.05, 0.95, out=flat)
    values = logits()
    others = [j for j in range(4) if j != intended]
    margin = values[intended] - max(values[j] for j in others)
    assert margin >= LOGIT_MARGIN, f"{name}: margin stuck at {margin:.3f}"
    canvas[MARGIN : MARGIN + BOX, MARGIN : MARGIN + BOX] = flat.reshape(BOX, BOX, 3)
    return canvas


def detector_constraints(bx, by):
    """(output_no, element, lo, hi) goal windows.

    Output 0 is boxes, 1 is scores. Box corners get tight windows around
    the half-pixel target (the uint8 repair pass finishes the job); scores
    just need to sit clearly on the right side of the detection cut.
    """
    goals = []
    if bx is not None:
        corners = [bx + 0.5, by + 0.5, bx + BOX - 0.5, by + BOX - 0.5]
        for c, value in enumerate(corners):
            goals.append((0, c, (value - 0.3) / 300.0, (value + 0.3) / 300.0))
        goals.append((1, 0, SCORE_HIT - 0.05, SCORE_HIT + 0.05))
    for cand in range(1 if bx is not None else 0, N_CANDIDATES):
        goals.append((1, cand, SCORE_MISS - 0.1, SCORE_MISS + 0.05))
    return goals


def solve_frame(frame, tables, goals, painted_mask):
    """Nudge free pixels until every goal value lands in its window.

    One projected-gradient step per iteration on the worst violating goal;
    pixels inside the painted texture stay fixed, everything clips to a
    safe range. Goals tap mostly disjoint pixels so this converges fast.
    """
    flat = frame.reshape(-1)
    mask = painted_mask.reshape(-1)

    directions = []
    for out_no, elem, lo, hi in goals:
        idx, wts = tables[out_no]
        taps = [(int(i), float(w)) for i, w in zip(idx[elem], wts[elem]) if not mask[int(i)]]
        assert taps, "all taps of a goal fell inside the texture"
        directions.append(taps)

    def value_of(goal_no):
        out_no, elem, _, _ = goals[goal_no]
        idx, wts = tables[out_no]
        return float(sum(w * flat[int(i)] for i, w in zip(idx[elem], wts[elem])))

    for _ in range(20000):
        worst = None
        for n, (out_no, elem, lo, hi) in enumerate(goals):
            v = value_of(n)
            violation = lo - v if v < lo else (v - hi if v > hi else 0.0)
            if violation > 0 and (worst is None or violation > worst[1]):
                worst = (n, violation, v, (lo + hi) / 2.0)
        if worst is None:
            return frame
        n, _, v, target = worst
        taps = directions[n]
        norm_sq = sum(w * w for _, w in taps)
        step = (target - v) / norm_sq
        step = float(np.clip(step, -0.2, 0.2))
        for i, w in taps:
            flat[i] = float(np.clip(flat[i] + step * w, 0.01, 0.99))
    raise AssertionError("frame solve did not converge")


def quantize(frame):
    return np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)


def detector_outputs(det_stub, frame_u8):
    x = frame_u8.astype(np.float32) / 255.0
    return det_stub.forward({"image": x.reshape(1, 300, 300, 3)})


def repair_box(frame_u8, det_stub, tables, bx, by, painted_mask):
    """Nudge free pixels one uint8 step at a time until the denormalized
    candidate-0 box floors/ceils to exactly (bx, by, BOX, BOX)."""
    windows = [  # pixel-space safe windows per corner value
        (bx + 0.15, bx + 0.85),
        (by + 0.15, by + 0.85),
        (bx + BOX - 0.85, bx + BOX - 0.15),
        (by + BOX - 0.85, by + BOX - 0.15),
    ]
    idx, wts = tables[0]
    mask = painted_mask.reshape(-1)
    flat = frame_u8.reshape(-1)
    for _ in range(400):
        corners = detector_outputs(det_stub, frame_u8)["boxes"][0].astype(np.float64) * 300.0
        bad = None
        for c in range(4):
            lo, hi = windows[c]
            if not lo <= corners[c] <= hi:
                bad = (c, corners[c], (lo + hi) / 2.0)
                break
        if bad is None:
            return True
        c, value, want = bad
        error = value - want  # in detector pixels; one uint8 step moves w*300/255
        taps = [
            (int(i), float(w))
            for i, w in zip(idx[c], wts[c])
            if not mask[int(i)] and abs(w) > 1e-3
        ]
        # Smallest step that still reduces the error, for fine control.
        taps.sort(key=lambda t: abs(t[1]))
        step_px = None
        for i, w in taps:
            move = w * 300.0 / 255.0
            direction = -1 if (move > 0) == (error > 0) else 1
            new_value = int(flat[i]) + direction
            if 0 <= new_value <= 255 and abs(move) <= abs(error) * 2 + 0.5:
                step_px = (i, new_value)
                break
        if step_px is None:
            i, w = taps[0]
            move = w * 300.0 / 255.0
            direction = -1 if (move > 0) == (error > 0) else 1
            step_px = (i, int(np.clip(int(flat[i]) + direction, 0, 255)))
        flat[step_px[0]] = step_px[1]
    return False


def classify(cls_stub, crop01):
    tensor = clf.preprocess_crop(crop01.astype(np.float32))
    out = cls_stub.forward({"image": tensor})
    return out["embedding"][0].astype(np.float64), out["logits"][0].astype(np.float64)


def build_frames(det_stub, cls_stub, det_tables, textures, rng):
    frames = []
    records = []
    for index, (kind, bx, by) in enumerate(SCENARIO):
        frame = np.full((300, 300, 3), BACKGROUND, dtype=np.float64)
        painted = np.zeros((300, 300, 3), dtype=bool)
        if kind != "none":
            x0, y0 = bx - MARGIN, by - MARGIN
            side = BOX + 2 * MARGIN
            frame[y0 : y0 + side, x0 : x0 + side] = textures[kind]["pixels"]
            painted[y0 : y0 + side, x0 : x0 + side] = True
        frame = solve_frame(frame, det_tables, detector_constraints(bx, by), painted)
        frame_u8 = quantize(frame)
        if kind != "none":
            assert repair_box(frame_u8, det_stub, det_tables, bx, by, painted), (
                f"frame {index}: box repair did not converge"
            )
        frames.append(frame_u8)
        records.append({"kind": kind, "bx": bx, "by": by})
    return frames, records


def scratch_select_candidate(outputs):
    """Independent re-derivation of the detection outcome."""
    boxes = outputs["boxes"].astype(np.float64)
    scores = outputs["scores"].astype(np.float64).reshape(-1)
    best = None
    for i, s in enumerate(scores):
        if s >= MIN_SCORE and (best is None or s > scores[best]):
            best = i
    if best is None:
        return None
    corners = boxes[best] * 300.0
    x = int(np.floor(corners[0]))
    y = int(np.floor(corners[1]))
    xe = int(np.ceil(corners[2]))
    ye = int(np.ceil(corners[3]))
    x = min(max(x, 0), 299)
    y = min(max(y, 0), 299)
    xe = min(max(xe, x + 1), 300)
    ye = min(max(ye, y + 1), 300)
    return (x, y, xe - x, ye - y, float(scores[best]))


def verify_and_embed(frames, records, det_stub, cls_stub):
    for frame_u8, record in zip(frames, records):
        outputs = detector_outputs(det_stub, frame_u8)
        picked = scratch_select_candidate(outputs)
        if record["kind"] == "none":
            assert picked is None, f"background frame got detected: {picked}"
            record["detected"] = False
            continue
        assert picked is not None, f"{record} not detected"
        x, y, w, h, score = picked
        assert (x, y, w, h) == (record["bx"], record["by"], BOX, BOX), (
            f"{record}: realized box {(x, y, w, h)}"
        )
        record["detected"] = True
        record["bbox"] = (x, y, w, h)
        record["center"] = (x + w / 2.0, y + h / 2.0)
        crop = frame_u8.astype(np.float32)[y : y + h, x : x + w] / 255.0
        embedding, logits = classify(cls_stub, crop)
        record["embedding"] = embedding
        record["logits"] = logits
        argmax = int(np.argmax(logits))
        assert argmax == INTENDED_ARGMAX[record["kind"]], (
            f"{record['kind']}: argmax {argmax}, logits {logits}"
        )
        margin = sorted(logits)[-1] - sorted(logits)[-2]
        assert margin > 0.5, f"{record['kind']}: weak argmax margin {margin}"


def build_references(records, cls_stub, textures, rng):
    """Per class: canonical texture crop + jittered variants calibrate the
    thresholds; replay crops must land strictly inside, unknown far outside."""
    means = {}
    thresholds = {}
    counts = {}
    per_class_samples = {}
    for name in CLASSES:
        canonical = textures[name]["pixels"][
            MARGIN : MARGIN + BOX, MARGIN : MARGIN + BOX
        ]
        samples = []
        canonical_u8 = quantize(canonical)
        emb, _ = classify(cls_stub, canonical_u8.astype(np.float32) / 255.0)
        samples.append(emb)
        for _ in range(JITTERS_PER_CLASS):
            noisy = canonical + rng.uniform(-JITTER_AMPLITUDE, JITTER_AMPLITUDE, canonical.shape)
            noisy_u8 = quantize(np.clip(noisy, 0.0, 1.0))
            emb, _ = classify(cls_stub, noisy_u8.astype(np.float32) / 255.0)
            samples.append(emb)
        rows = np.asarray(samples)
        means[name] = rows.mean(axis=0)
        distances = np.sqrt(((rows - means[name]) ** 2).sum(axis=1))
        thresholds[name] = float(distances.max())
        counts[name] = len(samples)
        per_class_samples[name] = rows

    # Margin checks: replay embeddings strictly inside their class radius,
    # everything else far outside every radius.
    for record in records:
        if not record.get("detected"):
            continue
        kind = record["kind"]
        distances = {
            name: float(np.sqrt(((record["embedding"] - means[name]) ** 2).sum()))
            for name in CLASSES
        }
        nearest = min(CLASSES, key=lambda n: distances[n])
        if kind in CLASSES:
            assert nearest == kind, f"{kind}: nearest is {nearest}"
            ratio = distances[kind] / thresholds[kind]
            assert ratio < 0.85, f"{kind}: replay distance ratio {ratio:.3f}"
            record["accepted"] = True
            record["label"] = kind
        else:
            worst = min(distances[n] / thresholds[n] for n in CLASSES)
            assert worst > 1.3, f"unknown frame too close: ratio {worst:.3f}"
            record["accepted"] = False
            record["label"] = "unknown"
        record["distances"] = distances

    doc = {
        "version": 1,
        "embedding_dim": 1280,
        "class_order": list(CLASSES),
        "threshold_scale": 1.0,
        "classes": {
            name: {
                "mean": [float(v) for v in means[name]],
                "threshold": thresholds[name],
                "sample_count": counts[name],
            }
            for name in CLASSES
        },
    }
    return doc


def scratch_map(cx, cy):
    x = cx / 300.0 * SCREEN_W
    y = cy / 300.0 * SCREEN_H
    if MIRROR_X:
        x = (SCREEN_W - 1) - x
    x = min(max(x, 0.0), SCREEN_W - 1)
    y = min(max(y, 0.0), SCREEN_H - 1)
    return (int(x), int(y))


def scratch_trace(records, timestamps):
    """Independent trace of the controller table -> golden log lines."""
    mode = "off"
    streak_label, streak_count = None, 0
    last_left = float("-inf")
    last_right = float("-inf")
    cursor = None
    lines = []

    def emit(seq, t, kind, x, y):
        lines.append(f"{seq},{t},{kind},{x},{y}")

    for seq, record in enumerate(records):
        if not record.get("detected"):
            continue
        t = timestamps[seq]
        label = record["label"]
        accepted = record["accepted"]
        if mode == "off":
            if accepted and label == "palm":
                mode = "on"
                cursor = scratch_map(*record["center"])
                streak_label, streak_count = "palm", 1
                emit(seq, t, "move", cursor[0], cursor[1])
            continue
        if not accepted:
            streak_label, streak_count = None, 0
            continue
        if label == "fist":
            mode = "off"
            streak_label, streak_count = None, 0
            continue
        if label == streak_label:
            streak_count += 1
        else:
            streak_label, streak_count = label, 1
        if label == "palm":
            target = scratch_map(*record["center"])
            if cursor is None:
                cursor = target
            else:
                cursor = (
                    int(round(cursor[0] + ALPHA * (target[0] - cursor[0]))),
                    int(round(cursor[1] + ALPHA * (target[1] - cursor[1]))),
                )
            emit(seq, t, "move", cursor[0], cursor[1])
        elif label == "point_left":
            if streak_count >= DEBOUNCE_N and t - last_left >= COOLDOWN_MS:
                last_left = t
                emit(seq, t, "click", cursor[0], cursor[1])
        elif label == "point_right":
            if streak_count >= DEBOUNCE_N and t - last_right >= COOLDOWN_MS:
                last_right = t
                emit(seq, t, "right_click", cursor[0], cursor[1])
    return lines


def main():
    rng = np.random.default_rng(777)
    det_cfg, cls_cfg = stub_configs()
    det_stub = make_stub(det_cfg)
    cls_stub = make_stub(cls_cfg)
    det_tables = det_stub._tables
    cls_tables = cls_stub._tables[1]  # logits table

    textures = {}
    for name in CLASSES + ("unknown",):
        textures[name] = {"name": name}
    raw = make_textures(rng)
    for name, pixels in raw.items():
        textures[name]["pixels"] = pixels
    for name in textures:
        textures[name]["pixels"] = solve_texture_logits(textures[name], cls_tables)

    frames, records = build_frames(det_stub, cls_stub, det_tables, textures, rng)
    verify_and_embed(frames, records, det_stub, cls_stub)
    references_doc = build_references(records, cls_stub, textures, rng)

    timestamps = [TIMESTAMP_BASE + FRAME_INTERVAL * i for i in range(len(frames))]
    golden = scratch_trace(records, timestamps)

    expected_kinds = [line.split(",")[2] for line in golden]
    n_clicks = expected_kinds.count("click")
    n_right = expected_kinds.count("right_click")
    n_moves = expected_kinds.count("move")
    assert n_clicks == 3, f"expected 3 clicks, traced {n_clicks}"
    assert n_right == 2, f"expected 2 right clicks, traced {n_right}"
    print(f"golden: {n_moves} moves, {n_clicks} clicks, {n_right} right clicks")

    models_dir = os.path.join(DATA_DIR, "models_stub")
    replay_dir = os.path.join(DATA_DIR, "replay50")
    os.makedirs(models_dir, exist_ok=True)
    os.makedirs(replay_dir, exist_ok=True)
    with open(os.path.join(models_dir, "detector.stub.json"), "w") as fh:
        json.dump(det_cfg.to_json(), fh, indent=2)
    with open(os.path.join(models_dir, "classifier.stub.json"), "w") as fh:
        json.dump(cls_cfg.to_json(), fh, indent=2)
    for i, frame_u8 in enumerate(frames):
        path = os.path.join(replay_dir, "frame_%06d.png" % i)
        assert cv2.imwrite(path, cv2.cvtColor(frame_u8, cv2.COLOR_RGB2BGR))
    with open(os.path.join(replay_dir, "manifest.json"), "w") as fh:
        json.dump(
            {
                "version": 1,
                "frame_count": len(frames),
                "width": 300,
                "height": 300,
                "timestamps_ms": timestamps,
            },
            fh,
        )
    with open(os.path.join(DATA_DIR, "replay50_references.json"), "w") as fh:
        json.dump(references_doc, fh)
        fh.write("\n")
    with open(os.path.join(DATA_DIR, "replay50_golden_commands.txt"), "w") as fh:
        fh.write("\n".join(golden) + "\n")
    print(f"wrote {len(frames)} frames, {len(golden)} golden commands")


if __name__ == "__main__":
    main()
