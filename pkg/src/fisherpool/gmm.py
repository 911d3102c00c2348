"""Diagonal-covariance Gaussian mixtures: parameter container and EM trainer.

All density math runs in log space with log-sum-exp normalization, so
64-dimensional descriptors far from every component do not underflow.
"""

import numpy as np

from .base import ParamsMixin, as_matrix, as_vector, check_fitted, frozen
from .cluster import assign_nearest, kmeans_plus_plus

LOG_2PI = np.log(2.0 * np.pi)


class GaussianMixture:
    """Immutable diagonal-covariance mixture parameters.

    Parameters
    ----------
    weights : array, shape (M,)
        Component priors; positive, summing to 1 within 1e-9.
    means : array, shape (M, D)
    variances : array, shape (M, D)
        Per-dimension variances (the diagonal of each covariance);
        strictly positive.

    The arrays are copied and marked read-only: a mixture is safe to share
    across concurrent readers.
    """

    def __init__(self, weights, means, variances):
        weights = as_vector(weights, "weights")
        means = as_matrix(means, "means")
        variances = as_matrix(variances, "variances")
        if means.shape != variances.shape:
            raise ValueError(
                f"means shape {means.shape} != variances shape {variances.shape}")
        if weights.shape[0] != means.shape[0]:
            raise ValueError(
                f"{weights.shape[0]} weights for {means.shape[0]} components")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        if np.any(weights <= 0):
            raise ValueError("every component weight must be > 0")
        if np.any(variances <= 0):
            raise ValueError("every variance entry must be > 0")
        self.weights = frozen(weights)
        self.means = frozen(means)
        self.variances = frozen(variances)
        # pre-derived constants used by density and encoding paths
        self._inv_var = frozen(1.0 / variances)
        self._log_norm = frozen(
            -0.5 * (means.shape[1] * LOG_2PI + np.sum(np.log(variances), axis=1)))
        self._log_weights = frozen(np.log(weights))

    @property
    def n_components(self):
        return self.means.shape[0]

    @property
    def n_features(self):
        return self.means.shape[1]

    def component_log_densities(self, X):
        """Log density of each row of X under each component, shape (N, M)."""
        X = as_matrix(X, "X")
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"descriptors have dim {X.shape[1]}, mixture has {self.n_features}")
        # (x-mu)^2/var expanded into three matmuls; cheaper than broadcasting
        quad = ((X * X) @ self._inv_var.T
                - 2.0 * (X @ (self.means * self._inv_var).T)
                + np.sum(self.means ** 2 * self._inv_var, axis=1))
        return self._log_norm - 0.5 * quad

    def log_densities(self, X):
        """log p(x|theta) for each row of X, shape (N,)."""
        joint = self.component_log_densities(X) + self._log_weights
        return _logsumexp(joint, axis=1)

    def log_density(self, x):
        """log p(x|theta) for a single descriptor."""
        x = as_vector(x, "x")
        return float(self.log_densities(x[None, :])[0])

    def log_responsibilities(self, X):
        """Log posterior log gamma(m) per descriptor, shape (N, M)."""
        joint = self.component_log_densities(X) + self._log_weights
        return joint - _logsumexp(joint, axis=1, keepdims=True)

    def responsibilities(self, X):
        """Posterior gamma(m) per descriptor, shape (N, M); rows sum to 1.

        Computed as a max-shifted softmax over the log joint, in place;
        equal to exp(log_responsibilities(X)) without the log/exp round
        trip.
        """
        joint = self.component_log_densities(X)
        joint += self._log_weights
        joint -= np.max(joint, axis=1, keepdims=True)
        np.exp(joint, out=joint)
        joint /= np.sum(joint, axis=1, keepdims=True)
        return joint

    def posteriors(self, x):
        """Posterior vector gamma for a single descriptor, shape (M,)."""
        x = as_vector(x, "x")
        return self.responsibilities(x[None, :])[0]

    def sample(self, n, rng):
        """Draw n descriptors from the mixture."""
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.n_features))
        return self.means[comp] + noise * np.sqrt(self.variances[comp])


def _logsumexp(a, axis=None, keepdims=False):
    mx = np.max(a, axis=axis, keepdims=True)
    out = mx + np.log(np.sum(np.exp(a - mx), axis=axis, keepdims=True))
    if not keepdims:
        out = np.squeeze(out, axis=axis)
    return out


class GaussianMixtureEM(ParamsMixin):
    """EM trainer for diagonal-covariance Gaussian mixtures.

    Initialization is k-means++ seeding on up to `init_subsample`
    descriptors; per-cluster sample variances start the covariances.
    Every M-step floors variances at `variance_floor_scale` times the
    global per-dimension data variance. Training stops when the mean
    log-likelihood improves by less than `tol` (absolute) or after
    `max_iter` iterations. Fully deterministic for a fixed seed.

    Attributes after fit
    --------------------
    model_ : GaussianMixture
    log_likelihood_trace_ : list of per-iteration mean log-likelihoods
    n_iter_ : iterations actually run
    fit_log_ : list of event strings (component re-seeds, stop reason)
    """

    def __init__(self, n_components, max_iter=100, tol=1e-6,
                 variance_floor_scale=1e-4, init_subsample=10000, seed=0):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.variance_floor_scale = variance_floor_scale
        self.init_subsample = init_subsample
        self.seed = seed

    def fit(self, X):
        X = as_matrix(X, "X")
        M = int(self.n_components)
        if M < 1:
            raise ValueError(f"n_components must be >= 1, got {M}")
        N, D = X.shape
        if N < M:
            raise ValueError(
                f"need at least n_components={M} descriptors, got N={N}")
        rng = np.random.default_rng(self.seed)
        floor = self.variance_floor_scale * np.maximum(X.var(axis=0), 1e-12)
        weights, means, variances = self._initialize(X, M, rng, floor)

        self.fit_log_ = []
        trace = []
        prev = -np.inf
        n_iter = 0
        for it in range(1, self.max_iter + 1):
            n_iter = it
            model = GaussianMixture(weights, means, variances)
            joint = model.component_log_densities(X) + model._log_weights
            per_point = _logsumexp(joint, axis=1)
            mean_ll = float(per_point.mean())
            trace.append(mean_ll)
            gamma = np.exp(joint - per_point[:, None])

            # M-step
            mass = gamma.sum(axis=0)                      # (M,)
            empty = np.flatnonzero(mass < 1e-10)
            if empty.size:
                gamma, mass = self._reseed(X, gamma, mass, empty, per_point)
            weights = mass / mass.sum()
            means = (gamma.T @ X) / mass[:, None]
            sq = (gamma.T @ (X * X)) / mass[:, None]
            variances = np.maximum(sq - means ** 2, floor)

            if mean_ll - prev < self.tol and it > 1:
                self.fit_log_.append(
                    f"converged at iteration {it}: mean log-likelihood "
                    f"improvement {mean_ll - prev:.3e} < tol {self.tol:g}")
                break
            prev = mean_ll
        else:
            self.fit_log_.append(f"stopped at max_iter={self.max_iter}")

        self.model_ = GaussianMixture(weights, means, variances)
        self.log_likelihood_trace_ = trace
        self.n_iter_ = n_iter
        return self

    def _initialize(self, X, M, rng, floor):
        N = X.shape[0]
        if N > self.init_subsample:
            pick = rng.choice(N, size=self.init_subsample, replace=False)
            sample = X[pick]
        else:
            sample = X
        centers = kmeans_plus_plus(sample, M, rng)
        assign = assign_nearest(sample, centers)
        weights = np.ones(M) / M
        variances = np.empty_like(centers)
        global_var = np.maximum(sample.var(axis=0), floor)
        for m in range(M):
            members = sample[assign == m]
            if members.shape[0] > 1:
                variances[m] = np.maximum(members.var(axis=0), floor)
            else:
                variances[m] = global_var
        return weights, centers, np.maximum(variances, floor)

    def _reseed(self, X, gamma, mass, empty, per_point):
        """Re-seed empty components from the worst-explained descriptors."""
        order = np.argsort(per_point, kind="stable")
        for rank, m in enumerate(empty):
            j = int(order[rank % len(order)])
            self.fit_log_.append(
                f"re-seeded empty component {int(m)} from descriptor {j} "
                f"(log-likelihood {per_point[j]:.6g})")
            gamma[:, m] = 0.0
            gamma[j, :] = 0.0
            gamma[j, m] = 1.0
        mass = gamma.sum(axis=0)
        return gamma, np.maximum(mass, 1e-10)

    # conveniences so a fitted trainer quacks like its model
    def responsibilities(self, X):
        check_fitted(self, "model_")
        return self.model_.responsibilities(X)

    def log_densities(self, X):
        check_fitted(self, "model_")
        return self.model_.log_densities(X)
