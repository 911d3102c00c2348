"""One-vs-rest linear SVM trained by stochastic subgradient descent."""

import warnings

import numpy as np

from .base import ParamsMixin, as_matrix, check_fitted


class LinearSvm(ParamsMixin):
    """L2-regularized hinge-loss classifier, one binary model per class.

    Training uses the step schedule eta_t = 1 / (reg * t) on a seeded
    per-epoch shuffle, so results are deterministic for a fixed seed.
    Features are assumed pre-normalized; no internal scaling is applied.

    Attributes after fit
    --------------------
    classes_ : sorted array of class labels
    weights_ : array, shape (n_classes, dim)
    biases_ : array, shape (n_classes,)
    objective_trace_ : per-epoch mean (over classes) training objective
    """

    def __init__(self, reg=1e-4, epochs=50, seed=0):
        self.reg = reg
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        X = as_matrix(X, "X")
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError(
                f"{y.shape[0]} labels for {X.shape[0]} feature rows")
        classes = np.unique(y)
        if classes.shape[0] < 2:
            raise ValueError(
                f"need at least 2 distinct classes, got {classes.shape[0]}")
        n, dim = X.shape
        n_classes = classes.shape[0]
        W = np.zeros((n_classes, dim))
        b = np.zeros(n_classes)
        targets = np.where(y[None, :] == classes[:, None], 1.0, -1.0)

        rng = np.random.default_rng(self.seed)
        trace = []
        # shifted 1/(reg*t) schedule: first steps are bounded by 1 instead
        # of 1/reg, which keeps the unregularized bias from blowing up
        shift = 1.0 / self.reg
        step = 0
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for i in order:
                step += 1
                eta = 1.0 / (self.reg * (step + shift))
                x = X[i]
                scores = W @ x + b
                margins = targets[:, i] * scores
                W *= 1.0 - eta * self.reg
                viol = margins < 1.0
                if np.any(viol):
                    coef = eta * targets[viol, i]
                    W[viol] += coef[:, None] * x
                    b[viol] += coef
            trace.append(self._objective(W, b, X, targets))

        self.classes_ = classes
        self.weights_ = W
        self.biases_ = b
        self.objective_trace_ = trace
        return self

    def _objective(self, W, b, X, targets):
        scores = X @ W.T + b  # (n, n_classes)
        hinge = np.maximum(0.0, 1.0 - targets.T * scores).mean(axis=0)
        reg = 0.5 * self.reg * np.sum(W * W, axis=1)
        return float(np.mean(hinge + reg))

    def decision_function(self, X):
        """Per-class scores, shape (n, n_classes)."""
        check_fitted(self, "weights_")
        X = as_matrix(X, "X")
        if X.shape[1] != self.weights_.shape[1]:
            raise ValueError(
                f"features have dim {X.shape[1]}, model expects "
                f"{self.weights_.shape[1]}")
        return X @ self.weights_.T + self.biases_

    def predict(self, X):
        """argmax of per-class scores; ties go to the lowest class index."""
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


def accuracy(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape[0] != y_pred.shape[0]:
        raise ValueError(
            f"length mismatch: {y_true.shape[0]} truths, {y_pred.shape[0]} predictions")
    if y_true.shape[0] == 0:
        raise ValueError("cannot score empty predictions")
    return float(np.mean(y_true == y_pred))


def average_precision(relevant, scores):
    """AP of a score-ranked list: mean precision at each relevant item.

    Ranking is by descending score with ties broken by original position.
    Returns nan (with a warning) when there are no relevant items.
    """
    relevant = np.asarray(relevant, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if relevant.shape[0] != scores.shape[0]:
        raise ValueError(
            f"length mismatch: {relevant.shape[0]} labels, {scores.shape[0]} scores")
    n_pos = int(relevant.sum())
    if n_pos == 0:
        warnings.warn("average_precision: no relevant items; returning nan",
                      RuntimeWarning, stacklevel=2)
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    hits = relevant[order]
    ranks = np.flatnonzero(hits) + 1
    precision_at_hits = np.cumsum(hits)[hits.nonzero()] / ranks
    return float(precision_at_hits.mean())


def mean_average_precision(y_true, score_matrix, classes=None):
    """Mean over classes of AP on score-ranked lists.

    y_true holds one label per row of score_matrix; column j of
    score_matrix scores class classes[j]. Classes with no positive
    examples are excluded with a warning.
    """
    y_true = np.asarray(y_true)
    S = as_matrix(score_matrix, "score_matrix")
    if y_true.shape[0] != S.shape[0]:
        raise ValueError(
            f"length mismatch: {y_true.shape[0]} labels, {S.shape[0]} score rows")
    if classes is None:
        classes = np.unique(y_true)
    classes = np.asarray(classes)
    if classes.shape[0] != S.shape[1]:
        raise ValueError(
            f"{classes.shape[0]} classes for {S.shape[1]} score columns")
    aps = []
    for j, c in enumerate(classes):
        rel = y_true == c
        if not np.any(rel):
            warnings.warn(
                f"mean_average_precision: class {c!r} has no positives; excluded",
                RuntimeWarning, stacklevel=2)
            continue
        aps.append(average_precision(rel, S[:, j]))
    if not aps:
        raise ValueError("no class had positive examples")
    return float(np.mean(aps))


def evaluate(y_true, y_pred, score_matrix=None, classes=None):
    """Bundle accuracy (always) and mAP (when scores are supplied)."""
    metrics = {"accuracy": accuracy(y_true, y_pred)}
    if score_matrix is not None:
        metrics["mean_average_precision"] = mean_average_precision(
            y_true, score_matrix, classes=classes)
    return metrics
