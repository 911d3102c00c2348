"""k-means++ seeding and Lloyd iterations for codebooks and GMM starts."""

import numpy as np

from .base import as_matrix


def kmeans_plus_plus(X, n_centers, rng):
    """Pick n_centers rows of X by k-means++ sampling.

    Returns the (n_centers, D) seed matrix. Deterministic for a given
    numpy Generator state.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n_centers > n:
        raise ValueError(f"cannot seed {n_centers} centers from {n} points")
    centers = np.empty((n_centers, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    # squared distance to the nearest chosen center so far
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for i in range(1, n_centers):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a center; fall back to uniform
            centers[i] = X[rng.integers(n)]
            continue
        centers[i] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[i]) ** 2, axis=1))
    return centers


def assign_nearest(X, centers):
    """Index of the nearest center (squared Euclidean) for each row of X."""
    # ||x-c||^2 = ||x||^2 - 2 x.c + ||c||^2 ; the ||x||^2 term is constant per row
    cross = X @ centers.T
    c2 = np.sum(centers * centers, axis=1)
    return np.argmin(c2 - 2.0 * cross, axis=1)


def kmeans(X, n_centers, seed=0, max_iter=50, tol=1e-6):
    """Lloyd's k-means with k-means++ seeding.

    Returns (centers, assignments). Empty clusters are re-seeded from the
    point farthest from its current center.
    """
    X = as_matrix(X, "X")
    rng = np.random.default_rng(seed)
    centers = kmeans_plus_plus(X, n_centers, rng)
    prev_inertia = np.inf
    assign = assign_nearest(X, centers)
    for _ in range(max_iter):
        for m in range(n_centers):
            mask = assign == m
            if np.any(mask):
                centers[m] = X[mask].mean(axis=0)
            else:
                far = np.argmax(np.sum((X - centers[assign]) ** 2, axis=1))
                centers[m] = X[far]
        assign = assign_nearest(X, centers)
        inertia = float(np.sum((X - centers[assign]) ** 2))
        if prev_inertia - inertia <= tol * max(prev_inertia, 1.0):
            break
        prev_inertia = inertia
    return centers, assign
