"""Small linear-algebra helpers used across modules."""

import numpy as np

from .errors import AnalysisError


def power_norm2(A, rtol=1e-8, max_iters=10000, seed=0):
    """Largest eigenvalue of ``A.T @ A`` (squared spectral norm) by power iteration.

    The start vector is drawn from a Philox generator keyed by ``seed`` so the
    result is deterministic. Iterates until the Rayleigh quotient changes by
    less than ``rtol`` relatively.

    Parameters
    ----------
    A : ndarray
        Matrix whose squared spectral norm is wanted.
    rtol : float
        Relative tolerance on successive Rayleigh quotients.
    max_iters : int
        Iteration cap; exceeding it raises :class:`AnalysisError`.
    seed : int
        Key for the start vector.

    Returns
    -------
    float
        Estimate of ``lambda_max(A.T @ A)``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(max_iters):
        w = A.T @ (A @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        cur = float(v @ (A.T @ (A @ v)))
        if abs(cur - prev) <= rtol * max(cur, 1e-300):
            return cur
        prev = cur
    raise AnalysisError(f"power iteration did not converge in {max_iters} iterations")


def sym_lambda_max(S):
    """Largest eigenvalue of a symmetric matrix via LAPACK."""
    return float(np.linalg.eigvalsh(S)[-1])


def least_squares_fixed_point(R, d):
    """Solve ``(I - R) x = d`` in the least-squares sense.

    Returns the minimum-norm solution and the residual norm
    ``||(I - R) x - d||``; a large residual means the affine map has no
    fixed point (``d`` is outside the column space of ``I - R``).
    """
    R = np.asarray(R, dtype=float)
    d = np.asarray(d, dtype=float)
    x, *_ = np.linalg.lstsq(np.eye(R.shape[0]) - R, d, rcond=None)
    resid = float(np.linalg.norm((np.eye(R.shape[0]) - R) @ x - d))
    return x, resid
