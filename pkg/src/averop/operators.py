"""Averaged operators, affine spectral analysis, and the plain fixed-point loop.

An operator ``T`` on R^N is alpha-averaged (0 < alpha < 1) when for all x, y

    ||T(x) - T(y)||^2 + (1 - alpha)/alpha * ||(I-T)(x) - (I-T)(y)||^2
        <= ||x - y||^2.

Repeatedly applying such an operator converges to one of its fixed points,
and for affine maps ``T(x) = R x + d`` the convergence is linear with rate
equal to the largest eigenvalue modulus of ``R`` excluding 1. This module
provides the operator containers, the plain iteration loop, the empirical
step-ratio rate estimate, and the spectral checks that the rest of the
package builds on.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AnalysisError, DivergedError
from .linalg import least_squares_fixed_point

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITERS = 100_000


@dataclass(frozen=True)
class AveragedOperator:
    """An evaluable map on R^N with a declared averaging constant.

    Parameters
    ----------
    apply : callable
        Maps a length-``dim`` vector to a length-``dim`` vector.
    alpha : float
        Declared averaging constant, strictly inside (0, 1).
    dim : int
        Ambient dimension.
    metric : ndarray, optional
        Positive semidefinite matrix defining the inner product in which the
        operator is averaged. ``None`` (the default) means Euclidean. Only
        the averagedness diagnostic uses it; iteration loops always measure
        Euclidean norms.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    alpha: float
    dim: int
    metric: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"averaging constant must be in (0, 1), got {self.alpha}")
        if self.dim < 1:
            raise ValueError("dimension must be a positive integer")

    def __call__(self, x):
        y = np.asarray(self.apply(np.asarray(x, dtype=float)), dtype=float)
        if y.shape != (self.dim,):
            raise ValueError(f"operator output has shape {y.shape}, expected ({self.dim},)")
        return y


@dataclass(frozen=True)
class AffineOperator:
    """Affine map ``x -> R x + d`` with a declared averaging constant.

    Eigenvalues of an alpha-averaged affine map lie in the closed disk of
    center ``1 - alpha`` and radius ``alpha``; :func:`check_eigen_disk`
    verifies this and :func:`spectral_rate` reads off the linear rate.
    """

    R: np.ndarray
    d: np.ndarray
    alpha: float

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("R must be a square matrix")
        if d.shape != (R.shape[0],):
            raise ValueError("d must be a vector matching R")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"averaging constant must be in (0, 1), got {self.alpha}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "d", d)

    @property
    def dim(self):
        return self.R.shape[0]

    @property
    def metric(self):
        return None

    def apply(self, x):
        return self.R @ x + self.d

    def __call__(self, x):
        return self.R @ np.asarray(x, dtype=float) + self.d

    def eigenvalues(self):
        try:
            return np.linalg.eigvals(self.R)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise AnalysisError(f"eigen-solver failed: {exc}") from exc

    def fixed_point(self):
        """Least-squares fixed point and its residual ``||(I-R)x - d||``."""
        return least_squares_fixed_point(self.R, self.d)

    def validate_averaged(self, tol=1e-8):
        """Raise if the spectrum is inconsistent with the declared alpha."""
        report = check_eigen_disk(self, tol=tol)
        if not report.ok:
            raise ValueError(
                f"eigenvalue {report.eigenvalue} violates the alpha={self.alpha} "
                f"disk by {report.violation:.3e}"
            )


@dataclass
class IterationTrace:
    """Per-application record of a fixed-point run.

    The iteration axis counts operator applications, so traces from plain,
    relaxed, and block-structured (inertial) runs are cost-comparable. All
    per-application arrays have length ``n_applications``; ``dists`` has one
    extra leading entry for the starting point.

    Attributes
    ----------
    step_norms : ndarray
        ``||x_{k+1} - x_k||`` between consecutively recorded iterates.
    residuals : ndarray
        Pre-image residual ``||T(y_k) - y_k||`` of each application (equal to
        the step norm for plain iteration).
    params : ndarray
        Scheme parameter (relaxation or inertia) in force at each application.
    restarts : ndarray of bool
        True on applications discarded by a restart.
    dists : ndarray or None
        ``||x_k - ref||`` when a reference point was supplied, starting point
        included (length ``n_applications + 1``).
    objectives : ndarray or None
        Objective values when a callback was supplied.
    x_final : ndarray
        Last iterate (post-rollback state for restarting schemes).
    converged : bool
        True when the run stopped on its residual tolerance rather than the
        application budget.
    """

    step_norms: np.ndarray
    residuals: np.ndarray
    params: np.ndarray
    restarts: np.ndarray
    x_final: np.ndarray
    converged: bool
    dists: Optional[np.ndarray] = None
    objectives: Optional[np.ndarray] = None

    @property
    def n_applications(self):
        return len(self.step_norms)

    def __len__(self):
        return len(self.step_norms)


class TraceRecorder:
    """Accumulates per-application rows and finalizes an IterationTrace."""

    def __init__(self, ref_point=None, objective=None, x0=None):
        self.step_norms = []
        self.residuals = []
        self.params = []
        self.restarts = []
        self.ref_point = ref_point
        self.objective = objective
        self.dists = None
        self.objectives = [] if objective is not None else None
        if ref_point is not None:
            self.dists = []
            if x0 is not None:
                self.dists.append(float(np.linalg.norm(x0 - ref_point)))

    def record(self, x_new, x_prev, residual, param, restarted=False):
        step = float(np.linalg.norm(x_new - x_prev))
        if not np.isfinite(step) or not np.isfinite(residual):
            raise DivergedError(len(self.step_norms) + 1, trace=None)
        self.step_norms.append(step)
        self.residuals.append(float(residual))
        self.params.append(float(param))
        self.restarts.append(bool(restarted))
        if self.dists is not None:
            self.dists.append(float(np.linalg.norm(x_new - self.ref_point)))
        if self.objectives is not None:
            self.objectives.append(float(self.objective(x_new)))

    def mark_restart(self, n_back=1):
        # flags the last n_back recorded applications as discarded
        for j in range(1, n_back + 1):
            self.restarts[-j] = True

    def finish(self, x_final, converged):
        return IterationTrace(
            step_norms=np.asarray(self.step_norms, dtype=float),
            residuals=np.asarray(self.residuals, dtype=float),
            params=np.asarray(self.params, dtype=float),
            restarts=np.asarray(self.restarts, dtype=bool),
            dists=None if self.dists is None else np.asarray(self.dists, dtype=float),
            objectives=None
            if self.objectives is None
            else np.asarray(self.objectives, dtype=float),
            x_final=np.asarray(x_final, dtype=float),
            converged=converged,
        )


def _check_finite(x, step, recorder=None):
    if not np.all(np.isfinite(x)):
        trace = recorder.finish(x, converged=False) if recorder is not None else None
        raise DivergedError(step, trace=trace)


def km_iterate(
    T,
    x0,
    max_iters=DEFAULT_MAX_ITERS,
    tol=DEFAULT_TOL,
    ref_point=None,
    objective=None,
):
    """Plain fixed-point iteration ``x_{k+1} = T(x_k)``.

    Stops when the residual ``||T(x_k) - x_k||`` drops to ``tol`` or after
    ``max_iters`` applications. For an averaged operator with fixed points the
    iterates converge to one, and the distance to any fixed point is
    nonincreasing along the way.

    Parameters
    ----------
    T : AveragedOperator or AffineOperator
        Operator to iterate. Anything callable with ``alpha``/``dim``
        attributes works.
    x0 : array_like
        Starting point of length ``T.dim``.
    max_iters : int
        Application budget (>= 1).
    tol : float
        Residual stopping tolerance (>= 0).
    ref_point : array_like, optional
        Known fixed point; distances to it are recorded in the trace.
    objective : callable, optional
        Evaluated at every new iterate and recorded in the trace.

    Returns
    -------
    IterationTrace

    Raises
    ------
    DivergedError
        If an iterate becomes non-finite; the error carries the application
        index and the partial trace.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (T.dim,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({T.dim},)")
    rec = TraceRecorder(ref_point=ref_point, objective=objective, x0=x)
    converged = False
    for k in range(max_iters):
        x_new = T(x)
        _check_finite(x_new, k + 1, rec)
        residual = np.linalg.norm(x_new - x)
        if residual <= tol:
            # tol = 0 still stops on an exact fixed point (identity case)
            rec.record(x_new, x, residual, 1.0)
            x = x_new
            converged = True
            break
        rec.record(x_new, x, residual, 1.0)
        x = x_new
    return rec.finish(x, converged)


def estimate_rate(trace, k):
    """Empirical linear-rate estimate ``||x_{k+1}-x_k|| / ||x_k-x_{k-1}||``.

    For an affine averaged operator the ratio tends to the dominant
    eigenvalue modulus as ``k`` grows; for any averaged operator it never
    exceeds 1 (up to rounding).

    Parameters
    ----------
    trace : IterationTrace
        Trace from a plain run.
    k : int
        Step index, ``1 <= k < len(trace)``.

    Returns
    -------
    float or None
        The ratio, or None when the denominator vanished (the run converged
        exactly; not an arithmetic fault).
    """
    if k < 1:
        raise ValueError("rate estimate needs k >= 1")
    if k >= len(trace.step_norms):
        raise ValueError(f"k={k} out of range for a trace of length {len(trace)}")
    denom = trace.step_norms[k - 1]
    if denom == 0.0:
        return None
    return float(trace.step_norms[k] / denom)


def spectral_rate(A, unit_tol=1e-8):
    """Largest eigenvalue modulus of ``A.R`` excluding eigenvalues equal to 1.

    Eigenvalues within ``unit_tol`` of 1 are treated as the fixed-point
    eigenvalue and skipped. Returns 0.0 when every eigenvalue is 1 (identity
    map restricted to d = 0).
    """
    eigs = A.eigenvalues()
    mods = np.abs(eigs[np.abs(eigs - 1.0) > unit_tol])
    if mods.size == 0:
        return 0.0
    return float(mods.max())


@dataclass(frozen=True)
class DiskCheck:
    """Result of the eigenvalue-disk membership test."""

    ok: bool
    violation: float
    eigenvalue: complex


def check_eigen_disk(A, tol=1e-8):
    """Test whether every eigenvalue of ``A.R`` lies in the averaging disk.

    The disk has center ``1 - alpha`` and radius ``alpha``. Returns a
    :class:`DiskCheck` whose ``violation`` is the largest excess distance
    (<= ``tol`` passes) and whose ``eigenvalue`` is the worst offender.
    """
    eigs = A.eigenvalues()
    dist = np.abs(eigs - (1.0 - A.alpha)) - A.alpha
    worst = int(np.argmax(dist))
    violation = float(dist[worst])
    return DiskCheck(ok=violation <= tol, violation=violation, eigenvalue=complex(eigs[worst]))


def averagedness_defect(T, n_pairs=100, seed=0, scale=1.0):
    """Worst violation of the averagedness inequality over sampled pairs.

    Draws ``n_pairs`` seeded Gaussian point pairs (optionally scaled) and
    returns the maximum of

        ||T(x)-T(y)||^2 + (1-a)/a * ||(I-T)x - (I-T)y||^2 - ||x-y||^2

    normalized by ``||x-y||^2``. Nonpositive values (up to slack) mean the
    declared constant is consistent with the samples. Uses the operator's
    ``metric`` when present (positive semidefinite quadratic form), Euclidean
    norms otherwise. Diagnostic only: passing is evidence, not proof.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    metric = getattr(T, "metric", None)

    def sqnorm(v):
        if metric is None:
            return float(v @ v)
        # clip: a semidefinite metric can go negative by rounding
        return max(float(v @ (metric @ v)), 0.0)

    a = T.alpha
    worst = -np.inf
    for _ in range(n_pairs):
        x = scale * rng.standard_normal(T.dim)
        y = scale * rng.standard_normal(T.dim)
        tx, ty = T(x), T(y)
        lhs = sqnorm(tx - ty) + (1.0 - a) / a * sqnorm((x - tx) - (y - ty))
        gap = sqnorm(x - y)
        if gap == 0.0:
            continue
        worst = max(worst, (lhs - gap) / gap)
    return worst


def is_averaged_sample(T, n_pairs=100, seed=0, slack=1e-8, scale=1.0):
    """True when the sampled averagedness defect stays within ``slack``."""
    return averagedness_defect(T, n_pairs=n_pairs, seed=seed, scale=scale) <= slack
