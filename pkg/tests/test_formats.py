"""Tests for the descriptor file format, model JSON, and report writers."""

import json
import struct

import numpy as np
import pytest

from fisherpool import GaussianMixture, LinearSvm, PCA
from fisherpool.formats import (CorruptionError, DataError, FormatError,
                                load_model, model_metadata, read_descriptors,
                                read_labels, save_model, write_descriptors,
                                write_labels, write_report, write_summary)
from fisherpool.synth import random_mixture


class TestDescriptorFile:
    def test_declared_layout(self, tmp_path):
        path = tmp_path / "a.fvd"
        write_descriptors(path, np.array([[1.5, -2.0]]))
        raw = path.read_bytes()
        assert raw[:4] == b"FVD1"
        version, n, d = struct.unpack("<III", raw[4:16])
        assert (version, n, d) == (1, 1, 2)
        values = struct.unpack("<2f", raw[16:])
        assert values == (1.5, -2.0)

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        X = rng.normal(0.0, 100.0, (40, 25)).astype(np.float32).astype(
            np.float64)
        path = tmp_path / "b.fvd"
        write_descriptors(path, X)
        back = read_descriptors(path)
        assert back.dtype == np.float64
        np.testing.assert_array_equal(back, X)

    def test_load_widens_exactly(self, tmp_path):
        value = np.float32(0.1)  # not representable in binary; float32 rounded
        path = tmp_path / "c.fvd"
        write_descriptors(path, np.array([[float(value)]]))
        back = read_descriptors(path)
        assert back[0, 0] == float(value)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.fvd"
        path.write_bytes(b"XXXX" + b"\0" * 12)
        with pytest.raises(FormatError, match="magic"):
            read_descriptors(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v9.fvd"
        path.write_bytes(b"FVD1" + struct.pack("<III", 9, 0, 0))
        with pytest.raises(FormatError, match="version"):
            read_descriptors(path)

    def test_truncated_payload_names_byte_offset(self, tmp_path):
        path = tmp_path / "trunc.fvd"
        write_descriptors(path, np.ones((3, 4)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(CorruptionError, match=str(len(raw) - 5)):
            read_descriptors(path)

    def test_non_finite_value_names_index(self, tmp_path):
        path = tmp_path / "nan.fvd"
        payload = np.array([1.0, np.nan, 2.0], dtype="<f4").tobytes()
        path.write_bytes(b"FVD1" + struct.pack("<III", 1, 1, 3) + payload)
        with pytest.raises(DataError, match="index 1"):
            read_descriptors(path)

    def test_writes_are_deterministic(self, tmp_path):
        X = np.random.default_rng(1).normal(size=(10, 3))
        p1, p2 = tmp_path / "x1.fvd", tmp_path / "x2.fvd"
        write_descriptors(p1, X)
        write_descriptors(p2, X)
        assert p1.read_bytes() == p2.read_bytes()


class TestModelFiles:
    def test_gmm_round_trip_probe(self, tmp_path):
        mix = random_mixture(5, 4, seed=0)
        path = tmp_path / "gmm.json"
        save_model(path, mix, metadata={"seed": 0, "iterations": 12,
                                        "final_log_likelihood": -3.5})
        back = load_model(path)
        probe = np.random.default_rng(2).normal(size=4)
        np.testing.assert_allclose(back.posteriors(probe),
                                   mix.posteriors(probe), rtol=1e-12)
        np.testing.assert_allclose(back.log_density(probe),
                                   mix.log_density(probe), rtol=1e-12)
        assert model_metadata(path)["iterations"] == 12

    def test_hand_written_gmm_fixture(self, tmp_path):
        doc = {
            "type": "gmm",
            "version": 1,
            "weights": [0.25, 0.75],
            "means": [[0.0], [4.0]],
            "variances": [[1.0], [2.0]],
            "metadata": {},
        }
        path = tmp_path / "hand.json"
        path.write_text(json.dumps(doc))
        mix = load_model(path)
        assert mix.n_components == 2 and mix.n_features == 1
        np.testing.assert_array_equal(mix.weights, [0.25, 0.75])
        np.testing.assert_array_equal(mix.means, [[0.0], [4.0]])
        np.testing.assert_array_equal(mix.variances, [[1.0], [2.0]])

    def test_pca_round_trip(self, tmp_path):
        X = np.random.default_rng(3).normal(size=(50, 6))
        model = PCA(n_components=3).fit(X)
        path = tmp_path / "pca.json"
        save_model(path, model)
        back = load_model(path)
        probe = np.random.default_rng(4).normal(size=(5, 6))
        np.testing.assert_allclose(back.transform(probe),
                                   model.transform(probe), rtol=1e-12)

    def test_svm_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        X = np.vstack([rng.normal(0, 1, (20, 3)), rng.normal(5, 1, (20, 3))])
        y = np.array([0] * 20 + [1] * 20)
        model = LinearSvm(epochs=10, seed=0).fit(X, y)
        path = tmp_path / "svm.json"
        save_model(path, model)
        back = load_model(path)
        np.testing.assert_array_equal(back.predict(X), model.predict(X))
        np.testing.assert_allclose(back.decision_function(X),
                                   model.decision_function(X), rtol=1e-12)

    def test_unknown_type_rejected(self, tmp_path):
        path = tmp_path / "unk.json"
        path.write_text(json.dumps({"type": "tree", "version": 1}))
        with pytest.raises(FormatError, match="unknown model type"):
            load_model(path)

    def test_wrong_version_rejected(self, tmp_path):
        path = tmp_path / "old.json"
        path.write_text(json.dumps({"type": "gmm", "version": 0}))
        with pytest.raises(FormatError, match="version"):
            load_model(path)

    def test_garbage_json_rejected(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("{not json")
        with pytest.raises(FormatError, match="JSON"):
            load_model(path)

    def test_unserializable_model_rejected(self, tmp_path):
        with pytest.raises(TypeError, match="serialize"):
            save_model(tmp_path / "x.json", object())

    def test_json_bytes_identical_across_saves(self, tmp_path):
        mix = random_mixture(3, 2, seed=6)
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        save_model(p1, mix, metadata={"seed": 1})
        save_model(p2, mix, metadata={"seed": 1})
        assert p1.read_bytes() == p2.read_bytes()


class TestReports:
    def test_empty_table_is_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_report(path, ("a", "b"), [])
        assert path.read_bytes() == b"a,b\n"

    def test_numeric_rendering_uses_dot_decimal(self, tmp_path):
        path = tmp_path / "nums.csv"
        write_report(path, ("x", "y", "label"), [(0.5, 7, "fv")])
        lines = path.read_text().strip().splitlines()
        assert lines[1] == "0.5,7,fv"

    def test_float_repr_round_trips(self, tmp_path):
        value = 0.1234567890123456789
        path = tmp_path / "prec.csv"
        write_report(path, ("v",), [(value,)])
        text = path.read_text().strip().splitlines()[1]
        assert float(text) == value

    def test_summary_carries_schema_version(self, tmp_path):
        path = tmp_path / "s.json"
        write_summary(path, {"hello": [1, 2]})
        doc = json.loads(path.read_text())
        assert doc["schema_version"] == 1
        assert doc["hello"] == [1, 2]

    def test_labels_round_trip(self, tmp_path):
        path = tmp_path / "labels.txt"
        write_labels(path, ["cat", "dog", "7"])
        assert read_labels(path) == ["cat", "dog", "7"]

    def test_empty_labels_rejected(self, tmp_path):
        path = tmp_path / "none.txt"
        path.write_text("\n\n")
        with pytest.raises(DataError, match="no labels"):
            read_labels(path)
