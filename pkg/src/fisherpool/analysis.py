"""Benchmark harness, operation-count model, and similarity correspondence."""

import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .base import as_matrix
from .encode import FisherVectorEncoder, SparseFisherVectorEncoder

# per-element operation counts of the two encoding stages: computing all M
# posteriors costs ~3 passes over an (M, D) layout per descriptor, and each
# gradient block costs ~8 elementwise operations per (cluster, dimension).
POSTERIOR_OPS = 3
GRADIENT_OPS = 8

TIMING_CSV_HEADER = ("encoder", "M", "D", "k", "N", "images",
                     "median_seconds_per_image", "iqr_seconds", "repetitions",
                     "threads")


@dataclass
class ComplexityEstimate:
    """Predicted per-descriptor operation counts for one encoder."""
    encoder: str
    M: int
    D: int
    k: int
    posterior_ops: int
    gradient_ops: int

    @property
    def total_ops(self):
        return self.posterior_ops + self.gradient_ops


def complexity_predict(M, D, k, encoder):
    """Operation-count model: full encoding is (3+8)*M*D per descriptor,
    sparse encoding 3*M*D + 8*k*D."""
    if not 1 <= k <= M:
        raise ValueError(f"k={k} must satisfy 1 <= k <= M={M}")
    if encoder == "fv":
        grad = GRADIENT_OPS * M * D
    elif encoder == "sfv":
        grad = GRADIENT_OPS * k * D
    else:
        raise ValueError(f"encoder must be 'fv' or 'sfv', got {encoder!r}")
    return ComplexityEstimate(encoder=encoder, M=M, D=D, k=k,
                              posterior_ops=POSTERIOR_OPS * M * D,
                              gradient_ops=grad)


def predicted_speedup(M, D, k):
    """Predicted full/sparse time ratio from the operation-count model."""
    fv = complexity_predict(M, D, k, "fv").total_ops
    sfv = complexity_predict(M, D, k, "sfv").total_ops
    return fv / sfv


@dataclass
class TimingReport:
    """Median per-image wall time for one encoder configuration."""
    encoder: str
    M: int
    D: int
    k: int
    N: int
    images: int
    median_seconds_per_image: float
    iqr_seconds: float
    repetitions: int
    threads: int
    per_repetition_seconds: list = field(default_factory=list)

    def to_row(self):
        return (self.encoder, self.M, self.D, self.k, self.N, self.images,
                self.median_seconds_per_image, self.iqr_seconds,
                self.repetitions, self.threads)


def _make_encoder(mixture, encoder, k):
    if encoder == "fv":
        return FisherVectorEncoder(mixture, normalize=False)
    if encoder == "sfv":
        return SparseFisherVectorEncoder(mixture, top_k=k, normalize=False)
    raise ValueError(f"encoder must be 'fv' or 'sfv', got {encoder!r}")


def bench_encode(mixture, descriptor_sets, encoder="fv", k=5, repetitions=5,
                 threads=1):
    """Median-of-repetitions per-image encoding time on a monotonic clock.

    One warmup pass over all sets runs first and is excluded from the
    statistics. BLAS thread pools are pinned to `threads` for the
    duration of the measurement.
    """
    sets = [as_matrix(X, "descriptor_set") for X in descriptor_sets]
    if not sets:
        raise ValueError("descriptor_sets is empty")
    if repetitions < 3:
        raise ValueError(f"repetitions must be >= 3, got {repetitions}")
    enc = _make_encoder(mixture, encoder, k)
    times = []
    with threadpool_limits(limits=threads):
        for X in sets:  # warmup, excluded
            enc.encode(X)
        for _ in range(repetitions):
            start = time.perf_counter()
            for X in sets:
                enc.encode(X)
            times.append((time.perf_counter() - start) / len(sets))
    q1, med, q3 = np.percentile(times, [25, 50, 75])
    return TimingReport(
        encoder=encoder, M=mixture.n_components, D=mixture.n_features,
        k=(k if encoder == "sfv" else mixture.n_components),
        N=int(round(np.mean([X.shape[0] for X in sets]))), images=len(sets),
        median_seconds_per_image=float(med), iqr_seconds=float(q3 - q1),
        repetitions=repetitions, threads=threads,
        per_repetition_seconds=[float(t) for t in times])


def compare_encoders(mixture, descriptor_sets, k=5, repetitions=5, threads=1):
    """Benchmark both encoders on identical inputs; report measured and
    predicted full/sparse ratios side by side.

    The two encoders are timed in interleaved repetitions (fv, sfv, fv,
    sfv, ...) so slow load drift on the host affects both equally.
    """
    sets = [as_matrix(X, "descriptor_set") for X in descriptor_sets]
    if not sets:
        raise ValueError("descriptor_sets is empty")
    if repetitions < 3:
        raise ValueError(f"repetitions must be >= 3, got {repetitions}")
    encoders = {"fv": _make_encoder(mixture, "fv", k),
                "sfv": _make_encoder(mixture, "sfv", k)}
    times = {"fv": [], "sfv": []}
    with threadpool_limits(limits=threads):
        for enc in encoders.values():  # warmup, excluded
            for X in sets:
                enc.encode(X)
        for _ in range(repetitions):
            for name, enc in encoders.items():
                start = time.perf_counter()
                for X in sets:
                    enc.encode(X)
                times[name].append((time.perf_counter() - start) / len(sets))
    reports = {}
    for name in ("fv", "sfv"):
        q1, med, q3 = np.percentile(times[name], [25, 50, 75])
        reports[name] = TimingReport(
            encoder=name, M=mixture.n_components, D=mixture.n_features,
            k=(k if name == "sfv" else mixture.n_components),
            N=int(round(np.mean([X.shape[0] for X in sets]))),
            images=len(sets), median_seconds_per_image=float(med),
            iqr_seconds=float(q3 - q1), repetitions=repetitions,
            threads=threads,
            per_repetition_seconds=[float(t) for t in times[name]])
    measured = (reports["fv"].median_seconds_per_image
                / reports["sfv"].median_seconds_per_image)
    return {
        "fv": reports["fv"],
        "sfv": reports["sfv"],
        "measured_ratio": measured,
        "predicted_ratio": predicted_speedup(mixture.n_components,
                                             mixture.n_features, k),
    }


def pearson_r(x, y):
    """Pearson correlation by the two-pass covariance formula; nan when
    either side has zero variance or fewer than 2 samples."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        return float("nan")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.sum(dx * dx) * np.sum(dy * dy))
    if denom == 0.0:
        return float("nan")
    return float(np.sum(dx * dy) / denom)


@dataclass
class SimilarityReport:
    """Paired (descriptor cosine, code cosine) samples and their Pearson r."""
    encoder: str
    k: int
    n_descriptors: int
    n_pairs: int
    n_excluded: int
    pearson: float
    descriptor_similarity: np.ndarray
    code_similarity: np.ndarray

    @property
    def r_defined(self):
        return bool(np.isfinite(self.pearson))


def similarity_correspondence(mixture, descriptors, encoder="fv", k=5):
    """Cosine similarity of all descriptor pairs against the cosine
    similarity of their unnormalized per-descriptor codes.

    Pairs involving a zero-norm code (or descriptor) are excluded and
    counted. Pearson r is nan when fewer than two valid pairs remain or
    a side is constant.
    """
    X = as_matrix(descriptors, "descriptors")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 descriptors to form a pair")
    enc = _make_encoder(mixture, encoder, k)
    rows = enc.code_rows(X)

    iu, ju = np.triu_indices(X.shape[0], 1)
    desc_sim, desc_ok = _cosine(X, iu, ju)
    code_sim, code_ok = _cosine(rows, iu, ju)
    valid = desc_ok & code_ok
    excluded = int(np.sum(~valid))
    desc_sim = desc_sim[valid]
    code_sim = code_sim[valid]
    return SimilarityReport(
        encoder=encoder, k=(k if encoder == "sfv" else mixture.n_components),
        n_descriptors=X.shape[0], n_pairs=int(valid.sum()),
        n_excluded=excluded, pearson=pearson_r(desc_sim, code_sim),
        descriptor_similarity=desc_sim, code_similarity=code_sim)


def _cosine(A, iu, ju):
    norms = np.linalg.norm(A, axis=1)
    ok = (norms[iu] > 0) & (norms[ju] > 0)
    safe = np.where(norms == 0, 1.0, norms)
    G = (A @ A.T) / np.outer(safe, safe)
    return G[iu, ju], ok
