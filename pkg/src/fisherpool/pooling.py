"""Generalized max pooling: primal and dual ridge solves, locality weights.

Conventions: a code matrix C has one per-descriptor code per row (N x P).
The patch kernel is K = C C^T (N x N). The pooled vector is the weighted
sum C^T alpha, so uniform weights give plain sum pooling.
"""

import numpy as np

from .base import as_matrix, as_vector

# direct symmetric solve up to this size; conjugate gradients beyond
_DIRECT_SOLVE_MAX = 4096
_CG_TOL = 1e-10


def patch_kernel(codes):
    """Patch-to-patch similarity kernel C C^T for a code matrix."""
    C = as_matrix(codes, "codes")
    K = C @ C.T
    return 0.5 * (K + K.T)


def validate_kernel(K, name="K"):
    """Check symmetry (1e-9) and PSD (eigenvalues >= -1e-8 * trace)."""
    K = as_matrix(K, name)
    if K.shape[0] != K.shape[1]:
        raise ValueError(f"{name} must be square, got shape {K.shape}")
    scale = max(np.abs(K).max(), 1.0)
    if np.abs(K - K.T).max() > 1e-9 * scale:
        raise ValueError(f"{name} is not symmetric within 1e-9")
    eigmin = float(np.linalg.eigvalsh(K)[0])
    if eigmin < -1e-8 * max(np.trace(K), 1.0):
        raise ValueError(f"{name} is not PSD: min eigenvalue {eigmin:.3e}")
    return K


def _check_square_symmetric(K, name="K"):
    K = as_matrix(K, name)
    if K.shape[0] != K.shape[1]:
        raise ValueError(f"{name} must be square, got shape {K.shape}")
    scale = max(np.abs(K).max(), 1.0)
    if np.abs(K - K.T).max() > 1e-9 * scale:
        raise ValueError(f"{name} is not symmetric within 1e-9")
    return 0.5 * (K + K.T)


def _solve_spd(A, b):
    """Solve A x = b for symmetric positive definite A."""
    n = A.shape[0]
    if n <= _DIRECT_SOLVE_MAX:
        L = np.linalg.cholesky(A)
        y = np.linalg.solve(L, b)
        return np.linalg.solve(L.T, y)
    return _conjugate_gradient(A, b)


def _conjugate_gradient(A, b, tol=_CG_TOL, max_iter=None):
    """Plain CG for SPD systems; tolerance on the relative residual."""
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros_like(b)
    r = b - A @ x
    p = r.copy()
    rs = r @ r
    bnorm = max(np.linalg.norm(b), 1e-300)
    for _ in range(max_iter):
        if np.sqrt(rs) / bnorm <= tol:
            break
        Ap = A @ p
        alpha = rs / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rs_new = r @ r
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def gmp_primal(codes, lam):
    """Pooled vector minimizing ||C phi - 1_N||^2 + lam * ||phi||^2.

    Solved on whichever side of the normal equations is smaller:
    (C^T C + lam I) phi = C^T 1, or phi = C^T (C C^T + lam I)^{-1} 1.
    """
    C = as_matrix(codes, "codes")
    if lam <= 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    N, P = C.shape
    ones = np.ones(N)
    if P <= N:
        A = C.T @ C + lam * np.eye(P)
        return _solve_spd(A, C.T @ ones)
    A = C @ C.T + lam * np.eye(N)
    return C.T @ _solve_spd(A, ones)


def gmp_dual(K, lam):
    """Per-descriptor weights solving (K + lam I) alpha = 1_N.

    lam = 0 is accepted only when K itself is numerically nonsingular;
    a singular K then raises numpy.linalg.LinAlgError.
    """
    K = _check_square_symmetric(K, "K")
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    N = K.shape[0]
    A = K + lam * np.eye(N)
    try:
        return _solve_spd(A, np.ones(N))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"K + {lam} * I is singular or not positive definite; "
            "a positive lam regularizes a rank-deficient kernel") from exc


def sfv_weights(K, selected, lam):
    """Locality-constrained dual weights.

    Minimizes ||K alpha - 1_N||^2 + lam * ||d . alpha||^2 where d is 1 on
    `selected` entries and infinite elsewhere. Infinite penalties are
    handled structurally: excluded entries are exactly 0 and the selected
    sub-block solves the reduced normal equations
    (K[:,S]^T K[:,S] + lam I) alpha_S = (K 1_N)_S.
    """
    K = _check_square_symmetric(K, "K")
    if lam <= 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    N = K.shape[0]
    sel = _selection_indices(selected, N)
    KS = K[:, sel]
    A = KS.T @ KS + lam * np.eye(sel.size)
    rhs = KS.T @ np.ones(N)  # equals (K 1_N)[sel] for symmetric K
    alpha = np.zeros(N)
    alpha[sel] = _solve_spd(A, rhs)
    return alpha


def sfv_weights_limit(selected, n):
    """Infinite-lam limit of sfv_weights: binary weights on the selection."""
    sel = _selection_indices(selected, n)
    alpha = np.zeros(n)
    alpha[sel] = 1.0
    return alpha


def weighted_pool(codes, alpha):
    """Weighted sum pooling sum_n alpha_n * row_n = C^T alpha."""
    C = as_matrix(codes, "codes")
    alpha = as_vector(alpha, "alpha")
    if alpha.shape[0] != C.shape[0]:
        raise ValueError(
            f"{alpha.shape[0]} weights for {C.shape[0]} code rows")
    return C.T @ alpha


def _selection_indices(selected, n):
    sel = np.asarray(selected)
    if sel.dtype == bool:
        if sel.shape != (n,):
            raise ValueError(f"boolean selection must have length {n}")
        sel = np.flatnonzero(sel)
    else:
        sel = np.unique(sel.astype(int))
        if sel.size and (sel[0] < 0 or sel[-1] >= n):
            raise ValueError(f"selection indices must lie in [0, {n})")
    if sel.size == 0:
        raise ValueError("selection is empty: at least one entry must be kept")
    return sel
