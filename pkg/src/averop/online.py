"""Self-tuning relaxation and inertia driven by observed step ratios.

Each scheduler watches the contraction of the running iteration, converts the
observed ratio into an estimate of the dominant eigenvalue of a virtual
affine model of the operator, and resets its parameter to the closed-form
optimum for that eigenvalue:

* ``orm_run``  - online relaxation; the parameter stays in a safe interval
  by construction, so no restart is ever needed and the iterates remain
  Fejer monotone.
* ``oim_run``  - online inertia in two-application blocks with a restart
  safeguard: blocks that fail to contract by ``1 - eps`` are rolled back and
  inertia is switched off until contraction resumes.
* ``oaim_run`` - online alternated inertia in four-application blocks
  (inertial, plain, inertial, plain) with the same safeguard.

All three record one trace row per operator application so their cost axes
line up with the plain iteration.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergedError
from .operators import DEFAULT_TOL, TraceRecorder, _check_finite
from .schemes import optimal_alt_inertia, optimal_inertia


def _ratio(num, den):
    # 0/0 means the run is done; signalled with None
    if den == 0.0:
        return None
    return num / den


@dataclass
class OrmState:
    """Relaxation scheduler state: two parameters and three iterates back."""

    eta: float
    eta_prev: float
    x: np.ndarray
    x_prev: np.ndarray
    x_prev2: np.ndarray


def orm_eta_bounds(alpha, eps):
    """Interval the online relaxation parameter is confined to."""
    return eps / (4.0 * alpha), 1.0 / alpha - eps / (4.0 * alpha)


def orm_update(alpha, eps, eta, eta_prev, step, step_prev):
    """Next relaxation parameter from the two most recent step norms.

    The observed rate ``v = (eta_prev * step) / (eta * step_prev)`` is clamped
    to [0, 1] (it cannot exceed 1 for an averaged operator, but rounding can
    push it over) and plugged into

        eta_next = (2 - eps) eta / (2 alpha eta + 1 - v) + eps / (4 alpha).

    Returns ``(eta_next, v_raw)``; ``v_raw`` is None when ``step_prev`` is 0.
    """
    v_raw = _ratio(eta_prev * step, eta * step_prev)
    if v_raw is None:
        return None, None
    v = min(max(v_raw, 0.0), 1.0)
    eta_next = (2.0 - eps) * eta / (2.0 * alpha * eta + 1.0 - v) + eps / (4.0 * alpha)
    return eta_next, v_raw


def orm_run(
    T,
    x0,
    eps=1e-4,
    budget=1000,
    tol=DEFAULT_TOL,
    ref_point=None,
    objective=None,
    accelerate=True,
):
    """Run the online relaxation scheduler on an averaged operator.

    Starts with two plain applications (the first parameter update needs
    three iterates), then relaxes each step with the self-tuned parameter.
    The parameter is provably confined to ``orm_eta_bounds(T.alpha, eps)``.

    Parameters
    ----------
    T : operator with ``alpha``/``dim``, callable on vectors
    x0 : array_like
        Starting point.
    eps : float
        Safeguard in ``(0, 2 min(alpha, 1-alpha)]``.
    budget : int
        Operator-application budget (>= 2).
    tol : float
        Stop when the base residual ``||T(x) - x||`` falls to ``tol``.
    ref_point, objective : optional trace extras, see ``km_iterate``.
    accelerate : bool
        ``False`` forces ``eta = 1`` throughout (plain iteration, for
        equivalence testing).

    Returns
    -------
    IterationTrace
        ``params`` holds the relaxation parameter used at each application.
    """
    alpha = T.alpha
    if not 0.0 < eps <= 2.0 * min(alpha, 1.0 - alpha):
        raise ValueError(f"eps={eps} outside (0, {2.0 * min(alpha, 1.0 - alpha)}]")
    if budget < 2:
        raise ValueError("budget must be at least 2")
    start = np.asarray(x0, dtype=float).copy()
    rec = TraceRecorder(ref_point=ref_point, objective=objective, x0=start)

    x1 = T(start)
    _check_finite(x1, 1, rec)
    rec.record(x1, start, np.linalg.norm(x1 - start), 1.0)
    eta_prev, eta = 1.0, 1.0
    # x_prev2 is a placeholder until the first shift fills it
    x_prev2, x_prev, x = start, start, x1
    applications = 1
    converged = False
    first_update_done = False

    while applications < budget:
        tx = T(x)
        _check_finite(tx, applications + 1, rec)
        residual = float(np.linalg.norm(tx - x))
        if residual <= tol:
            rec.record(tx, x, residual, 1.0)
            x = tx
            converged = True
            break
        if not first_update_done or not accelerate:
            # second start-up application keeps eta = 1
            eta_next = 1.0
            first_update_done = True
        else:
            step = float(np.linalg.norm(x - x_prev))
            step_prev = float(np.linalg.norm(x_prev - x_prev2))
            eta_next, _ = orm_update(alpha, eps, eta, eta_prev, step, step_prev)
            if eta_next is None:
                converged = True
                break
        x_new = tx if eta_next == 1.0 else eta_next * tx + (1.0 - eta_next) * x
        rec.record(x_new, x, residual, eta_next)
        x_prev2, x_prev, x = x_prev, x, x_new
        eta_prev, eta = eta, eta_next
        applications += 1
    return rec.finish(x, converged)


def oim_gamma_from_rate(lam):
    """Optimal-inertia parameter for an estimated dominant eigenvalue."""
    if not np.isfinite(lam) or lam <= 0.0:
        return 0.0
    return max(0.0, optimal_inertia(min(lam, 1.0 - 1e-15)).parameter)


def oim_run(
    T,
    x0,
    eps=1e-4,
    budget=1000,
    tol=DEFAULT_TOL,
    sublinear=False,
    ref_point=None,
    objective=None,
    accelerate=True,
):
    """Run the online inertia scheduler (two applications per block).

    Each block applies the same inertia twice, then checks the contraction
    factor ``c`` of the pre-image residuals. Contraction by at least
    ``1 - eps`` accepts the block and retunes gamma from the observed rate;
    otherwise a nonzero gamma triggers a rollback to the block's entry state
    with gamma reset to 0, and a zero gamma just continues plainly.

    Parameters
    ----------
    sublinear : bool
        Replace the constant safeguard by ``eps / sqrt(l)`` with ``l`` the
        number of accepted accelerations so far (for sublinearly convergent
        base algorithms).
    accelerate : bool
        ``False`` pins gamma to 0 (plain iteration, for equivalence tests).

    Returns
    -------
    IterationTrace
        ``residuals`` holds ``||x - y||`` per application; ``restarts`` flags
        applications undone by a rollback.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if budget < 4:
        raise ValueError("budget must be at least 4 (two-application blocks)")
    x_prev = np.asarray(x0, dtype=float).copy()
    rec = TraceRecorder(ref_point=ref_point, objective=objective, x0=x_prev)

    x = T(x_prev)
    _check_finite(x, 1, rec)
    y = x_prev.copy()  # y under the first recorded iterate: y_2 = x_1
    rec.record(x, x_prev, np.linalg.norm(x - y), 0.0)
    gamma = 0.0
    applications = 1
    accel_count = 0
    converged = False

    while applications + 2 <= budget:
        eps_cur = eps / math.sqrt(accel_count + 1) if sublinear else eps
        snap = (x_prev, x, y)
        r_base = float(np.linalg.norm(x - y))
        if r_base <= tol:
            converged = True
            break

        x1, y1 = _inertial(T, gamma, x, x_prev)
        _check_finite(x1, applications + 1, rec)
        r1 = float(np.linalg.norm(x1 - y1))
        rec.record(x1, x, r1, gamma)
        x2, y2 = _inertial(T, gamma, x1, x)
        _check_finite(x2, applications + 2, rec)
        r2 = float(np.linalg.norm(x2 - y2))
        rec.record(x2, x1, r2, gamma)
        applications += 2

        q1 = _ratio(r1, r_base)
        q2 = _ratio(r2, r1)
        if q1 is None or q2 is None:
            x_prev, x, y = x1, x2, y2
            converged = True
            break
        c = max(q1, q2)

        if c <= 1.0 - eps_cur and accelerate:
            # accepted: estimate the rate over the block and retune
            num = np.linalg.norm(x2 - x1) ** 2 + np.linalg.norm(x1 - x) ** 2
            den = np.linalg.norm(x1 - x) ** 2 + np.linalg.norm(x - x_prev) ** 2
            accel_count += 1
            if den == 0.0:
                x_prev, x, y = x1, x2, y2
                converged = True
                break
            v = math.sqrt(num / den)
            lam_den = gamma * v - gamma + v
            lam = v * v / lam_den if lam_den > 0.0 else math.inf
            lam = min(lam, 1.0 - eps_cur)
            gamma = oim_gamma_from_rate(lam)
            x_prev, x, y = x1, x2, y2
        elif gamma > 0.0:
            # failed with inertia on: roll the block back
            gamma = 0.0
            x_prev, x, y = snap
            rec.mark_restart(n_back=2)
        else:
            x_prev, x, y = x1, x2, y2
    return rec.finish(x, converged)


def _inertial(T, gamma, x, x_prev):
    y = x if gamma == 0.0 else x + gamma * (x - x_prev)
    return T(y), y


def oaim_gamma_from_rate(lam):
    """Optimal alternated-inertia parameter for an estimated eigenvalue."""
    if not np.isfinite(lam) or lam <= 0.0:
        return 0.0
    return max(0.0, optimal_alt_inertia(min(lam, 1.0 - 1e-15)).parameter)


def oaim_run(
    T,
    x0,
    eps=1e-4,
    budget=1000,
    tol=DEFAULT_TOL,
    sublinear=False,
    ref_point=None,
    objective=None,
    accelerate=True,
):
    """Run the online alternated-inertia scheduler (four applications per block).

    Each block performs two inertial-then-plain pairs with the same gamma.
    The contraction check compares the step norms of the two plain
    applications; acceptance retunes gamma from the two-application rate
    estimate, failure with nonzero gamma rolls back to the block's entry
    iterates, and failure at gamma = 0 continues plainly.

    Parameters and the returned trace follow :func:`oim_run`.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if budget < 8:
        raise ValueError("budget must be at least 8 (four-application blocks)")
    x_prev = np.asarray(x0, dtype=float).copy()
    rec = TraceRecorder(ref_point=ref_point, objective=objective, x0=x_prev)

    x = T(x_prev)
    _check_finite(x, 1, rec)
    rec.record(x, x_prev, np.linalg.norm(x - x_prev), 0.0)
    gamma = 0.0
    applications = 1
    accel_count = 0
    converged = False

    while applications + 4 <= budget:
        eps_cur = eps / math.sqrt(accel_count + 1) if sublinear else eps
        snap = (x_prev, x)
        d_base = float(np.linalg.norm(x - x_prev))
        if d_base <= tol:
            converged = True
            break

        x1, y1 = _inertial(T, gamma, x, x_prev)
        _check_finite(x1, applications + 1, rec)
        rec.record(x1, x, np.linalg.norm(x1 - y1), gamma)
        x2 = T(x1)
        _check_finite(x2, applications + 2, rec)
        rec.record(x2, x1, np.linalg.norm(x2 - x1), gamma)
        x3, y3 = _inertial(T, gamma, x2, x1)
        _check_finite(x3, applications + 3, rec)
        rec.record(x3, x2, np.linalg.norm(x3 - y3), gamma)
        x4 = T(x3)
        _check_finite(x4, applications + 4, rec)
        rec.record(x4, x3, np.linalg.norm(x4 - x3), gamma)
        applications += 4

        q1 = _ratio(float(np.linalg.norm(x4 - x3)), float(np.linalg.norm(x2 - x1)))
        q2 = _ratio(float(np.linalg.norm(x2 - x1)), d_base)
        if q1 is None or q2 is None:
            x_prev, x = x3, x4
            converged = True
            break
        c = max(q1, q2)

        if c <= 1.0 - eps_cur and accelerate:
            den = float(np.linalg.norm(x2 - x))
            accel_count += 1
            if den == 0.0:
                x_prev, x = x3, x4
                converged = True
                break
            v = float(np.linalg.norm(x4 - x2)) / den
            lam = (gamma + math.sqrt(gamma**2 + 4.0 * gamma * v + 4.0 * v)) / (2.0 * (gamma + 1.0))
            lam = min(lam, 1.0 - eps_cur)
            gamma = oaim_gamma_from_rate(lam)
            x_prev, x = x3, x4
        elif gamma > 0.0:
            gamma = 0.0
            x_prev, x = snap
            rec.mark_restart(n_back=4)
        else:
            x_prev, x = x3, x4
    return rec.finish(x, converged)
