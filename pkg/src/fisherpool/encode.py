"""Fisher codes, sparse Fisher codes, BOW baseline, and normalizations.

A Fisher code is laid out as M consecutive blocks of
[mean-gradient (D) | sigma-gradient (D)], giving 2*M*D values. Block m of
the code for descriptor x is

    mean block:  gamma_m * (x - mu_m) / sigma_m / sqrt(w_m)
    sigma block: gamma_m * (((x - mu_m) / sigma_m)^2 - 1) / sqrt(2 w_m)

i.e. the log-likelihood gradients with respect to mean and standard
deviation, scaled by the diagonal Fisher-information normalizers.

The full and sparse encoders share one gradient kernel parameterized by
the selected clusters: the full encoder selects all M, the sparse encoder
the top-k posterior clusters per descriptor. The per-element gradient
work is therefore proportional to M*D and k*D respectively, and timing
comparisons between the two isolate the truncation effect.
"""

import warnings

import numpy as np

from .base import ParamsMixin, as_matrix, as_vector, check_fitted
from .cluster import assign_nearest, kmeans
from .gmm import GaussianMixture

# target element count for (rows, clusters, dim) gradient temporaries;
# sized so a chunk's working set stays cache-resident (measured optimum)
_CHUNK_ELEMENTS = 128_000


def power_normalize(v, exponent=0.5):
    """Signed power normalization sign(z) * |z|**exponent, elementwise."""
    if not 0.0 < exponent <= 1.0:
        raise ValueError(f"exponent must be in (0, 1], got {exponent}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.abs(v) ** exponent


def l2_normalize(v):
    """Scale v to unit L2 norm; a zero vector is returned unchanged with a warning."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        warnings.warn("l2_normalize received a zero vector; returned unchanged",
                      RuntimeWarning, stacklevel=2)
        return v.copy()
    return v / norm


def top_k_indices(gamma, k):
    """Per-row indices of the k largest entries, ties broken by lower index.

    gamma is (N, M); the result is (N, k) with each row's selected indices
    in ascending index order. Costs O(N*M) via partition rather than a
    full sort; rows with ties straddling the selection boundary take a
    slower exact path.
    """
    N, M = gamma.shape
    if not 1 <= k <= M:
        raise ValueError(f"k={k} must satisfy 1 <= k <= M={M}")
    if k == M:
        return np.broadcast_to(np.arange(M), (N, M)).copy()
    # candidate top-k sets in one partition pass; rows whose boundary
    # value is duplicated get the exact lowest-index tie policy applied
    cand = np.argpartition(gamma, M - k, axis=1)[:, M - k:]
    cand.sort(axis=1)
    vals = np.take_along_axis(gamma, cand, axis=1)
    thr = vals.min(axis=1, keepdims=True)
    tied = np.flatnonzero((gamma == thr).sum(axis=1) != (vals == thr).sum(axis=1))
    for i in tied:
        row = gamma[i]
        t = thr[i, 0]
        keep = np.flatnonzero(row > t)
        fill = np.flatnonzero(row == t)[:k - keep.size]
        cand[i] = np.sort(np.concatenate([keep, fill]))
    return cand


def select_top_k(mixture, x, k):
    """Indices of the k largest posteriors of x, descending, ties by lower index."""
    x = as_vector(x, "x")
    M = mixture.n_components
    if not 1 <= k <= M:
        raise ValueError(f"k={k} must satisfy 1 <= k <= M={M} (mixture components)")
    gamma = mixture.posteriors(x)
    idx = top_k_indices(gamma[None, :], k)[0]
    # ascending index -> descending posterior, lower index first among ties
    order = np.lexsort((idx, -gamma[idx]))
    return idx[order]


class _FisherBase(ParamsMixin):
    """Shared machinery for the full and sparse Fisher encoders."""

    def __init__(self, mixture, normalize=True, power=0.5):
        if not isinstance(mixture, GaussianMixture):
            raise TypeError("mixture must be a GaussianMixture")
        self.mixture = mixture
        self.normalize = normalize
        self.power = power
        self._sigmas = np.sqrt(mixture.variances)
        self._inv_sigma = 1.0 / self._sigmas
        self._coef_mean = 1.0 / np.sqrt(mixture.weights)
        self._coef_sigma = 1.0 / np.sqrt(2.0 * mixture.weights)

    @property
    def code_length(self):
        return 2 * self.mixture.n_components * self.mixture.n_features

    def _finalize(self, pooled):
        if self.normalize:
            pooled = l2_normalize(power_normalize(pooled, self.power))
        return pooled

    def transform(self, descriptor_sets):
        """Encode a sequence of descriptor sets into stacked image codes."""
        sets = list(descriptor_sets)
        if not sets:
            raise ValueError("descriptor_sets is empty")
        out = np.empty((len(sets), self.code_length))
        for i, X in enumerate(sets):
            out[i] = self.encode(X)
        return out

    def _blocks(self, Xc, gamma_sel, means_sel, inv_sigma_sel, cm_sel, cs_sel):
        """Gradient blocks for pre-selected clusters of one descriptor chunk.

        In-place arithmetic keeps the temporaries to the two returned
        arrays; this stage is memory-bound at production sizes.
        """
        u = Xc[:, None, :] - means_sel
        u *= inv_sigma_sel
        bs = u * u
        bs -= 1.0
        bs *= (gamma_sel * cs_sel)[:, :, None]
        bm = u
        bm *= (gamma_sel * cm_sel)[:, :, None]
        return bm, bs


class FisherVectorEncoder(_FisherBase):
    """Average of per-descriptor Fisher codes over all mixture components.

    encode(X) returns the pooled 2*M*D image code: the mean over rows of
    the per-descriptor codes, power- and L2-normalized when
    normalize=True.
    """

    def encode(self, X):
        X = as_matrix(X, "X")
        pooled = self._pooled(X) / X.shape[0]
        return self._finalize(pooled)

    def _pooled(self, X):
        mix = self.mixture
        M, D = mix.n_components, mix.n_features
        gamma = mix.responsibilities(X)
        acc = np.zeros((M, 2 * D))
        chunk = max(8, _CHUNK_ELEMENTS // (M * D))
        means_b = mix.means[None]
        inv_sigma_b = self._inv_sigma[None]
        for s in range(0, X.shape[0], chunk):
            e = min(s + chunk, X.shape[0])
            u = (X[s:e, None, :] - means_b) * inv_sigma_b
            acc[:, :D] += np.einsum("nm,nmd->md", gamma[s:e] * self._coef_mean, u)
            acc[:, D:] += np.einsum("nm,nmd->md", gamma[s:e] * self._coef_sigma,
                                    u * u - 1.0)
        return acc.reshape(-1)

    def code_row(self, x):
        """One unnormalized per-descriptor code row (no 1/N, no normalization)."""
        x = as_vector(x, "x")
        return self.code_rows(x[None, :])[0]

    def code_rows(self, X):
        """Unnormalized per-descriptor codes, shape (N, 2*M*D)."""
        X = as_matrix(X, "X")
        mix = self.mixture
        M, D = mix.n_components, mix.n_features
        gamma = mix.responsibilities(X)
        out = np.empty((X.shape[0], M, 2 * D))
        chunk = max(8, _CHUNK_ELEMENTS // (M * D))
        for s in range(0, X.shape[0], chunk):
            e = min(s + chunk, X.shape[0])
            bm, bs = self._blocks(X[s:e], gamma[s:e], mix.means[None],
                                  self._inv_sigma[None], self._coef_mean,
                                  self._coef_sigma)
            out[s:e, :, :D] = bm
            out[s:e, :, D:] = bs
        return out.reshape(X.shape[0], -1)


class SparseFisherVectorEncoder(_FisherBase):
    """Fisher encoding truncated to each descriptor's top-k posterior clusters.

    Posteriors are computed for all M components (same cost as the full
    encoder); gradient blocks are computed only for the k selected
    clusters of each descriptor, with the surviving posteriors used as-is
    (binary selection, no renormalization). encode(k=M) therefore matches
    the full encoder.
    """

    def __init__(self, mixture, top_k=5, normalize=True, power=0.5):
        super().__init__(mixture, normalize=normalize, power=power)
        if not 1 <= top_k <= mixture.n_components:
            raise ValueError(
                f"top_k={top_k} must satisfy 1 <= top_k <= M="
                f"{mixture.n_components} (mixture components)")
        self.top_k = top_k

    def encode(self, X):
        X = as_matrix(X, "X")
        pooled = self._pooled(X) / X.shape[0]
        return self._finalize(pooled)

    def _pooled(self, X):
        mix = self.mixture
        M, D = mix.n_components, mix.n_features
        k = self.top_k
        gamma = mix.responsibilities(X)
        idx = top_k_indices(gamma, k)
        gsel = np.take_along_axis(gamma, idx, axis=1)
        acc = np.zeros((M, 2 * D))
        chunk = max(8, _CHUNK_ELEMENTS // (k * D))
        for s in range(0, X.shape[0], chunk):
            e = min(s + chunk, X.shape[0])
            # (descriptor, cluster) pairs sorted by cluster: parameters
            # expand by repeat over segments and the pooled sums come
            # straight from reduceat, all on flat 2-D arrays
            flat = idx[s:e].ravel()
            order = np.argsort(flat, kind="stable")
            seg = flat[order]
            desc = s + (np.repeat(np.arange(e - s), k)[order])
            starts = np.flatnonzero(np.r_[True, seg[1:] != seg[:-1]])
            uniq = seg[starts]
            counts = np.diff(np.r_[starts, seg.size])
            g = gsel[s:e].ravel()[order]
            cm = g * np.repeat(self._coef_mean[uniq], counts)
            cs = g * np.repeat(self._coef_sigma[uniq], counts)
            u = X[desc] - np.repeat(mix.means[uniq], counts, axis=0)
            u *= np.repeat(self._inv_sigma[uniq], counts, axis=0)
            bs = u * u
            bs -= 1.0
            bs *= cs[:, None]
            u *= cm[:, None]
            acc[uniq, :D] += np.add.reduceat(u, starts, axis=0)
            acc[uniq, D:] += np.add.reduceat(bs, starts, axis=0)
        return acc.reshape(-1)

    def code_row(self, x):
        x = as_vector(x, "x")
        return self.code_rows(x[None, :])[0]

    def code_rows(self, X):
        """Per-descriptor codes with non-selected blocks exactly zero."""
        X = as_matrix(X, "X")
        mix = self.mixture
        M, D = mix.n_components, mix.n_features
        k = self.top_k
        gamma = mix.responsibilities(X)
        idx = top_k_indices(gamma, k)
        gsel = np.take_along_axis(gamma, idx, axis=1)
        out = np.zeros((X.shape[0], M, 2 * D))
        chunk = max(8, _CHUNK_ELEMENTS // (k * D))
        for s in range(0, X.shape[0], chunk):
            e = min(s + chunk, X.shape[0])
            ix = idx[s:e]
            bm, bs = self._blocks(X[s:e], gsel[s:e], mix.means[ix],
                                  self._inv_sigma[ix], self._coef_mean[ix],
                                  self._coef_sigma[ix])
            blocks = np.concatenate([bm, bs], axis=2)
            np.put_along_axis(out[s:e], ix[:, :, None], blocks, axis=1)
        return out.reshape(X.shape[0], -1)

    def selection_mask(self, X):
        """Top-k cluster indices per descriptor, shape (N, k), ascending index."""
        X = as_matrix(X, "X")
        return top_k_indices(self.mixture.responsibilities(X), self.top_k)


class BagOfWordsEncoder(ParamsMixin):
    """Hard-assignment bag-of-words histogram baseline.

    fit(X) builds the codebook by k-means on stacked descriptors;
    alternatively from_codebook() wraps existing centroids or the means
    of a GaussianMixture. encode(X) returns the L2-normalized histogram
    of nearest-centroid assignments.
    """

    def __init__(self, n_words=64, seed=0, max_iter=50):
        self.n_words = n_words
        self.seed = seed
        self.max_iter = max_iter

    def fit(self, X):
        X = as_matrix(X, "X")
        centers, _ = kmeans(X, self.n_words, seed=self.seed,
                            max_iter=self.max_iter)
        self.codebook_ = centers
        return self

    @classmethod
    def from_codebook(cls, codebook):
        if isinstance(codebook, GaussianMixture):
            centers = np.array(codebook.means)
        else:
            centers = as_matrix(codebook, "codebook")
        enc = cls(n_words=centers.shape[0])
        enc.codebook_ = centers
        return enc

    def counts(self, X):
        """Raw assignment counts over the codebook, shape (n_words,)."""
        check_fitted(self, "codebook_")
        X = as_matrix(X, "X")
        if X.shape[1] != self.codebook_.shape[1]:
            raise ValueError(
                f"descriptors have dim {X.shape[1]}, codebook has "
                f"{self.codebook_.shape[1]}")
        assign = assign_nearest(X, self.codebook_)
        return np.bincount(assign, minlength=self.codebook_.shape[0]).astype(float)

    def encode(self, X):
        return l2_normalize(self.counts(X))

    def transform(self, descriptor_sets):
        sets = list(descriptor_sets)
        if not sets:
            raise ValueError("descriptor_sets is empty")
        out = np.empty((len(sets), self.codebook_.shape[0]))
        for i, X in enumerate(sets):
            out[i] = self.encode(X)
        return out
