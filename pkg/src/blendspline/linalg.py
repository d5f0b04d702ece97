"""Small dense least-squares helpers shared by the local fitters."""

import numpy as np
from scipy.linalg import solve_triangular

__all__ = ["weighted_lstsq"]


def weighted_lstsq(A, b, w, ridge_scale=1e-8):
    """Solve ``min sum w (A x - b)^2`` by QR; ridge fallback when rank deficient.

    Returns ``(x, ridge_used)``.  The ridge is ``ridge_scale`` times the trace
    of the weighted normal matrix.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    sw = np.sqrt(np.asarray(w, dtype=float))
    As = A * sw[:, None]
    bs = b * (sw[:, None] if b.ndim == 2 else sw)
    m = A.shape[1]
    if As.shape[0] >= m:
        Q, R = np.linalg.qr(As)
        d = np.abs(np.diag(R))
        if d.min() > 1e-10 * max(d.max(), np.finfo(float).tiny):
            return solve_triangular(R, Q.T @ bs), False
    N = As.T @ As
    lam = ridge_scale * max(np.trace(N), np.finfo(float).tiny)
    return np.linalg.solve(N + lam * np.eye(m), As.T @ bs), True
