import json

import numpy as np
import pytest

from handcursor.errors import (
    MissingClassError,
    ReferenceFileError,
    VersionMismatchError,
)
from handcursor.references import ReferenceSet, load_references, save_references


def sample_refs(dim=16, scale=1.25):
    rng = np.random.default_rng(7)
    return ReferenceSet(
        means=rng.normal(size=(4, dim)),
        thresholds=rng.random(4) * 3,
        sample_counts=(5, 6, 7, 8),
        threshold_scale=scale,
    )


class TestRoundTrip:
    def test_save_load_identical(self, tmp_path):
        refs = sample_refs()
        path = tmp_path / "references.json"
        save_references(refs, path)
        loaded = load_references(path)
        np.testing.assert_array_equal(loaded.means, refs.means)
        np.testing.assert_array_equal(loaded.thresholds, refs.thresholds)
        assert loaded.sample_counts == refs.sample_counts
        assert loaded.threshold_scale == refs.threshold_scale

    def test_schema_layout(self, tmp_path):
        path = tmp_path / "references.json"
        save_references(sample_refs(), path)
        doc = json.loads(path.read_text())
        assert doc["version"] == 1
        assert doc["embedding_dim"] == 16
        assert doc["class_order"] == ["fist", "palm", "point_left", "point_right"]
        assert set(doc["classes"]) == set(doc["class_order"])
        entry = doc["classes"]["palm"]
        assert set(entry) == {"mean", "threshold", "sample_count"}
        assert len(entry["mean"]) == 16

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "references.json"
        save_references(sample_refs(), path)
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(ReferenceFileError):
            load_references(path)

    def test_missing_class_named(self, tmp_path):
        path = tmp_path / "references.json"
        save_references(sample_refs(), path)
        doc = json.loads(path.read_text())
        del doc["classes"]["point_left"]
        path.write_text(json.dumps(doc))
        with pytest.raises(MissingClassError) as exc:
            load_references(path)
        assert exc.value.class_name == "point_left"

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "references.json"
        save_references(sample_refs(), path)
        doc = json.loads(path.read_text())
        doc["version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(VersionMismatchError):
            load_references(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_references(tmp_path / "nope.json")


class TestInvariants:
    def test_effective_thresholds(self):
        refs = sample_refs(scale=2.0)
        np.testing.assert_allclose(refs.effective_thresholds, refs.thresholds * 2.0)

    def test_with_scale_replaces_atomically(self):
        refs = sample_refs(scale=1.0)
        scaled = refs.with_scale(0.5)
        assert scaled is not refs
        assert refs.threshold_scale == 1.0
        np.testing.assert_array_equal(scaled.thresholds, refs.thresholds)

    def test_arrays_read_only(self):
        refs = sample_refs()
        with pytest.raises(ValueError):
            refs.means[0, 0] = 99.0

    def test_rejects_negative_thresholds(self):
        with pytest.raises(ValueError):
            ReferenceSet(
                means=np.zeros((4, 4)),
                thresholds=np.array([1.0, -0.1, 1.0, 1.0]),
                sample_counts=(1, 1, 1, 1),
            )

    def test_rejects_wrong_class_count(self):
        with pytest.raises(ValueError):
            ReferenceSet(
                means=np.zeros((3, 4)),
                thresholds=np.zeros(3),
                sample_counts=(1, 1, 1),
            )
