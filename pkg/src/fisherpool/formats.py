"""Bit-exact file formats: binary descriptor matrices, JSON models, reports.

Descriptor file layout (".fvd"), all little-endian:

    bytes 0..3    magic "FVD1"
    bytes 4..7    format version, uint32 (currently 1)
    bytes 8..11   N, uint32 (row count)
    bytes 12..15  D, uint32 (column count)
    bytes 16..    N*D float32 values, row-major

Values are float32 on disk and widened exactly to float64 on load.
Models are versioned UTF-8 JSON with a fixed key order; json round-trips
CPython float64 values bit-exactly via repr.
"""

import csv
import json

import numpy as np

from .base import as_matrix
from .gmm import GaussianMixture

MAGIC = b"FVD1"
FORMAT_VERSION = 1
MODEL_VERSION = 1
REPORT_SCHEMA_VERSION = 1
_HEADER_SIZE = 16


class FormatError(ValueError):
    """The file is not in the expected format (bad magic or version)."""


class CorruptionError(ValueError):
    """The payload is shorter than the header promises."""


class DataError(ValueError):
    """The payload parses but contains invalid values."""


def write_descriptors(path, X):
    """Write a matrix as an FVD file (float32 payload)."""
    X = as_matrix(X, "X")
    n, d = X.shape
    payload = np.ascontiguousarray(X, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.array([FORMAT_VERSION, n, d], dtype="<u4").tobytes())
        fh.write(payload.tobytes())


def read_descriptors(path):
    """Load an FVD file, widening float32 values exactly to float64."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER_SIZE or raw[:4] != MAGIC:
        raise FormatError(
            f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, n, d = np.frombuffer(raw, dtype="<u4", count=3, offset=4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    expected = _HEADER_SIZE + int(n) * int(d) * 4
    if len(raw) < expected:
        raise CorruptionError(
            f"{path}: truncated payload, file ends at byte {len(raw)} "
            f"but {expected} bytes were expected")
    values = np.frombuffer(raw, dtype="<f4", count=int(n) * int(d),
                           offset=_HEADER_SIZE)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DataError(
            f"{path}: non-finite value at flat index {int(bad[0])}")
    return values.astype(np.float64).reshape(int(n), int(d))


def save_model(path, model, metadata=None):
    """Serialize a GaussianMixture, PCA, or LinearSvm to versioned JSON."""
    # local imports keep formats importable without the heavier modules
    from .classify import LinearSvm
    from .pca import PCA

    meta = dict(metadata or {})
    if isinstance(model, GaussianMixture):
        doc = {
            "type": "gmm",
            "version": MODEL_VERSION,
            "weights": model.weights.tolist(),
            "means": model.means.tolist(),
            "variances": model.variances.tolist(),
            "metadata": meta,
        }
    elif isinstance(model, PCA):
        doc = {
            "type": "pca",
            "version": MODEL_VERSION,
            "mean": model.mean_.tolist(),
            "projection": model.projection_.tolist(),
            "output_dim": int(model.projection_.shape[1]),
            "metadata": meta,
        }
    elif isinstance(model, LinearSvm):
        doc = {
            "type": "svm",
            "version": MODEL_VERSION,
            "classes": [_jsonable(c) for c in model.classes_],
            "weights": model.weights_.tolist(),
            "biases": model.biases_.tolist(),
            "hyperparameters": {"reg": model.reg, "epochs": model.epochs,
                                "seed": model.seed},
            "metadata": meta,
        }
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Load a model saved by save_model; returns the reconstructed object."""
    from .classify import LinearSvm
    from .pca import PCA

    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    kind = doc.get("type")
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version!r}")
    if kind == "gmm":
        return GaussianMixture(np.array(doc["weights"]),
                               np.array(doc["means"]),
                               np.array(doc["variances"]))
    if kind == "pca":
        model = PCA(n_components=int(doc["output_dim"]))
        projection = np.array(doc["projection"])
        model.mean_ = np.array(doc["mean"])
        model.projection_ = projection
        gram = projection.T @ projection
        if np.abs(gram - np.eye(projection.shape[1])).max() > 1e-8:
            raise DataError(f"{path}: projection columns are not orthonormal")
        return model
    if kind == "svm":
        hp = doc.get("hyperparameters", {})
        model = LinearSvm(reg=hp.get("reg", 1e-4), epochs=hp.get("epochs", 50),
                          seed=hp.get("seed", 0))
        model.classes_ = np.array(doc["classes"])
        model.weights_ = np.array(doc["weights"])
        model.biases_ = np.array(doc["biases"])
        return model
    raise FormatError(f"{path}: unknown model type {kind!r}")


def model_metadata(path):
    """Return just the metadata dict of a saved model."""
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh).get("metadata", {})


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.str_,)):
        return str(value)
    return value


def write_report(path, header, rows):
    """Write a CSV table with a declared header row.

    Floats are rendered with repr (always '.' decimal separator); an
    empty rows list produces a header-only file.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_render(cell) for cell in row])


def _render(cell):
    if isinstance(cell, (float, np.floating)):
        return repr(float(cell))
    if isinstance(cell, (int, np.integer)):
        return str(int(cell))
    return str(cell)


def write_summary(path, payload):
    """Write a JSON summary with the report schema version stamped in."""
    doc = {"schema_version": REPORT_SCHEMA_VERSION}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, default=_jsonable)
        fh.write("\n")


def read_labels(path):
    """Read one label per line; returns a list of stripped strings."""
    with open(path, "r", encoding="utf-8") as fh:
        labels = [line.strip() for line in fh if line.strip()]
    if not labels:
        raise DataError(f"{path}: no labels found")
    return labels


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(f"{label}\n")
