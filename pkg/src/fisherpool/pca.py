"""PCA fit/transform for descriptor dimensionality reduction."""

import numpy as np

from .base import ParamsMixin, as_matrix, check_fitted, frozen


class PCA(ParamsMixin):
    """Principal component projection onto the top n_components directions.

    No whitening: transform is (x - mean) @ projection, where the
    projection columns are the leading orthonormal eigenvectors of the
    sample covariance.

    Attributes after fit
    --------------------
    mean_ : array, shape (D,)
    projection_ : array, shape (D, n_components), orthonormal columns
    explained_variance_ : eigenvalues, descending, shape (n_components,)
    explained_variance_ratio_ : fractions of total variance, descending
    """

    def __init__(self, n_components):
        self.n_components = n_components

    def fit(self, X):
        X = as_matrix(X, "X")
        N, D = X.shape
        k = int(self.n_components)
        if k < 1:
            raise ValueError(f"n_components must be >= 1, got {k}")
        if k > D:
            raise ValueError(
                f"n_components={k} exceeds descriptor dimension D={D}")
        if N < k:
            raise ValueError(f"need at least n_components={k} rows, got N={N}")
        mean = X.mean(axis=0)
        centered = X - mean
        cov = (centered.T @ centered) / max(N - 1, 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals, kind="stable")[::-1]
        eigvals = np.maximum(eigvals[order], 0.0)
        eigvecs = eigvecs[:, order]

        total = eigvals.sum()
        rank = int(np.sum(eigvals > max(total, 1.0) * 1e-12))
        if rank < k:
            raise ValueError(
                f"input is rank-deficient: requested {k} components but the "
                f"achievable rank is {rank}")

        self.mean_ = frozen(mean)
        self.projection_ = frozen(eigvecs[:, :k])
        self.explained_variance_ = frozen(eigvals[:k])
        self.explained_variance_ratio_ = frozen(eigvals[:k] / total)
        return self

    def transform(self, X):
        check_fitted(self, "projection_")
        X = as_matrix(X, "X")
        if X.shape[1] != self.mean_.shape[0]:
            raise ValueError(
                f"descriptors have dim {X.shape[1]}, model expects "
                f"{self.mean_.shape[0]}")
        return (X - self.mean_) @ self.projection_

    def fit_transform(self, X):
        return self.fit(X).transform(X)
