"""Concrete averaged-operator instantiations of popular splitting algorithms.

Three families, each exposed both as stateful update steps and as a plain
averaged operator suitable for the generic iteration loops and the online
schedulers:

* proximal gradient (2/3-averaged on the primal iterate), plus the FISTA
  momentum baseline;
* the ADMM family on its meta-variable ``x = lam + rho v`` (1/2-averaged):
  standard, relaxed, and inertial update steps whose meta-variable
  trajectories coincide with the generic relaxed/inertial iterations, plus
  the momentum-with-restart baseline;
* Condat's primal-dual algorithm on the stacked ``[u; lam]`` vector
  (1/2-averaged in its primal-dual metric).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .errors import SubproblemError
from .linalg import power_norm2
from .operators import DEFAULT_TOL, AveragedOperator, TraceRecorder, _check_finite
from .problems import LassoProblem, LogisticProblem, soft_threshold


# ---------------------------------------------------------------------------
# proximal operators


def prox_l1(x, threshold):
    """Soft thresholding: componentwise ``sign(x) max(|x| - threshold, 0)``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return soft_threshold(np.asarray(x, dtype=float), threshold)


def prox_l2sq(x, lam, step):
    """Prox of ``(lam/2) ||x||^2`` with step size ``step``: ``x / (1 + step lam)``."""
    return np.asarray(x, dtype=float) / (1.0 + step * lam)


# ---------------------------------------------------------------------------
# proximal gradient


def prox_grad_apply(problem, x):
    """One proximal-gradient application: prox of the penalty at ``x - grad/L``."""
    grad = problem.smooth_grad(x)
    if not np.all(np.isfinite(grad)):
        raise SubproblemError("non-finite gradient in proximal-gradient step", iterate=x)
    return problem.reg_prox(x - grad / problem.L, 1.0 / problem.L)


def prox_grad_operator(problem):
    """The proximal-gradient map as a 2/3-averaged operator."""
    return AveragedOperator(
        apply=lambda x: prox_grad_apply(problem, x), alpha=2.0 / 3.0, dim=problem.dim
    )


def fista_run(problem, x0=None, budget=1000, tol=DEFAULT_TOL, ref_point=None):
    """Momentum (FISTA) baseline on the proximal-gradient map.

    Uses the standard sequence ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`` with
    extrapolation coefficient ``(t_k - 1) / t_{k+1}`` (zero on the first
    step). One operator application per iteration; objective values are
    recorded in the trace.
    """
    x = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    rec = TraceRecorder(ref_point=ref_point, objective=problem.objective, x0=x)
    yv = x.copy()
    t = 1.0
    converged = False
    for k in range(budget):
        x_new = prox_grad_apply(problem, yv)
        _check_finite(x_new, k + 1, rec)
        residual = float(np.linalg.norm(x_new - yv))
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum = (t - 1.0) / t_new
        rec.record(x_new, x, residual, momentum)
        yv = x_new + momentum * (x_new - x)
        x, t = x_new, t_new
        if residual <= tol:
            converged = True
            break
    return rec.finish(x, converged)


# ---------------------------------------------------------------------------
# ADMM family on min f(u) + g(v) subject to M u = v


@dataclass(frozen=True)
class AdmmOps:
    """Problem-specific machinery for the ADMM updates.

    ``fsolve(c)`` minimizes ``f(w) + rho/2 ||M w - c||^2`` and ``gprox(s)``
    minimizes ``g(w) + rho/2 ||w - s||^2``. Both are pure functions of their
    argument; ``M = None`` means the identity coupling.
    """

    rho: float
    M: Optional[np.ndarray]
    fsolve: Callable[[np.ndarray], np.ndarray]
    gprox: Callable[[np.ndarray], np.ndarray]
    dim_u: int
    dim_v: int

    def apply_M(self, u):
        return u if self.M is None else self.M @ u


def _logistic_fsolve(problem, rho, M, c, tol=1e-10, max_iters=50):
    # damped Newton on f(w) + rho/2 ||Mw - c||^2, backtracking on the merit
    X, y, m = problem.X, problem.y, problem.m

    def residual_term(w):
        Mw = w if M is None else M @ w
        return Mw - c

    def merit(w):
        r = residual_term(w)
        return problem.smooth_value(w) + 0.5 * rho * float(r @ r)

    w = c.copy() if M is None else np.zeros(X.shape[1])
    grad = None
    for _ in range(max_iters):
        z = y * (X @ w)
        s = expit(-z)
        grad_f = -(X.T @ (y * s)) / m
        r = residual_term(w)
        grad = grad_f + (rho * r if M is None else rho * (M.T @ r))
        if np.linalg.norm(grad) <= tol:
            return w
        D = s * expit(z)
        H = (X.T * D) @ X / m
        H = H + (rho * np.eye(H.shape[0]) if M is None else rho * (M.T @ M))
        direction = np.linalg.solve(H, grad)
        phi0 = merit(w)
        slope = float(grad @ direction)
        t = 1.0
        while t > 2.0**-30 and merit(w - t * direction) > phi0 - 1e-4 * t * slope:
            t *= 0.5
        w = w - t * direction
    raise SubproblemError(
        f"logistic inner solve stalled at gradient norm {np.linalg.norm(grad):.2e}", iterate=w
    )


def admm_ops(problem, rho=1.0, M=None):
    """Build the f- and g-subproblem solvers for a benchmark problem.

    For the lasso the f-solve is the cached-factorization linear system
    ``(A.T A + rho M.T M) u = A.T b + rho M.T c``; for logistic problems it
    is a damped Newton run (gradient tolerance 1e-10, 50-iteration cap). The
    g-prox is the penalty prox with step ``1/rho``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    n = problem.dim
    dim_v = n if M is None else M.shape[0]
    if isinstance(problem, LassoProblem):
        A, b = problem.A, problem.b
        gram = A.T @ A + (rho * np.eye(n) if M is None else rho * (M.T @ M))
        factor = cho_factor(gram)
        atb = A.T @ b

        def fsolve(c):
            rhs = atb + (rho * c if M is None else rho * (M.T @ c))
            return cho_solve(factor, rhs)

    elif isinstance(problem, LogisticProblem):

        def fsolve(c):
            return _logistic_fsolve(problem, rho, M, c)

    else:
        raise TypeError(f"no ADMM instantiation for {type(problem).__name__}")

    def gprox(s):
        return problem.reg_prox(s, 1.0 / rho)

    return AdmmOps(rho=rho, M=M, fsolve=fsolve, gprox=gprox, dim_u=n, dim_v=dim_v)


@dataclass(frozen=True)
class AdmmState:
    """Primal blocks, multiplier, and the meta-variables of the last update.

    ``u_prev``/``lam_prev`` hold one step of history for the inertial update
    (None before any step was taken). After a step, ``x_meta`` is
    ``lam_before + rho M u`` and ``y_meta = lam + rho v``; they coincide for
    the standard update.
    """

    u: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    u_prev: Optional[np.ndarray] = None
    lam_prev: Optional[np.ndarray] = None
    x_meta: Optional[np.ndarray] = None
    y_meta: Optional[np.ndarray] = None


def admm_init(ops, u0=None, v0=None, lam0=None):
    """Fresh ADMM state (zeros unless overridden)."""
    return AdmmState(
        u=np.zeros(ops.dim_u) if u0 is None else np.asarray(u0, dtype=float),
        v=np.zeros(ops.dim_v) if v0 is None else np.asarray(v0, dtype=float),
        lam=np.zeros(ops.dim_v) if lam0 is None else np.asarray(lam0, dtype=float),
    )


def admm_step(state, ops):
    """Standard ADMM update; the meta-variable does one plain application."""
    rho = ops.rho
    u = ops.fsolve(state.v - state.lam / rho)
    Mu = ops.apply_M(u)
    x_meta = state.lam + rho * Mu
    v = ops.gprox(Mu + state.lam / rho)
    lam = state.lam + rho * (Mu - v)
    return AdmmState(
        u=u, v=v, lam=lam, u_prev=state.u, lam_prev=state.lam, x_meta=x_meta, y_meta=lam + rho * v
    )


def relaxed_admm_step(state, ops, eta):
    """Relaxed ADMM update; equals the eta-relaxed application on the meta-variable."""
    if eta == 1.0:
        return admm_step(state, ops)
    rho = ops.rho
    u = ops.fsolve(state.v - state.lam / rho)
    Mu = ops.apply_M(u)
    w = eta * Mu + (1.0 - eta) * state.v
    v = ops.gprox(w + state.lam / rho)
    lam = state.lam + rho * (w - v)
    return AdmmState(
        u=u,
        v=v,
        lam=lam,
        u_prev=state.u,
        lam_prev=state.lam,
        x_meta=state.lam + rho * Mu,
        y_meta=lam + rho * v,
    )


def inertial_admm_step(state, ops, gamma):
    """Inertial ADMM update.

    The extrapolation ``gamma (M(u_{k+1} - u_k) + (lam_k - lam_{k-1})/rho)``
    enters both the second subproblem and the multiplier update, which makes
    the meta-variable pair follow exactly the inertial recursion
    ``y+ = x+ + gamma (x+ - x)``. ``gamma = 0`` (or no history yet)
    reproduces the standard update bit for bit.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if gamma == 0.0 or state.lam_prev is None:
        return admm_step(state, ops)
    rho = ops.rho
    u = ops.fsolve(state.v - state.lam / rho)
    Mu = ops.apply_M(u)
    x_meta = state.lam + rho * Mu
    # extrapolates along x_meta - previous x_meta, with x = lam_prev + rho M u
    delta = (Mu - ops.apply_M(state.u)) + (state.lam - state.lam_prev) / rho
    v = ops.gprox(Mu + state.lam / rho + gamma * delta)
    lam = state.lam + rho * (Mu - v) + gamma * rho * delta
    return AdmmState(
        u=u, v=v, lam=lam, u_prev=state.u, lam_prev=state.lam, x_meta=x_meta, y_meta=lam + rho * v
    )


def admm_meta_operator(problem, rho=1.0, M=None):
    """ADMM as a 1/2-averaged operator on the meta-variable ``lam + rho v``.

    Returns ``(T, extract)`` where ``extract(x)`` recovers the g-feasible
    block ``v`` for objective evaluation.
    """
    ops = admm_ops(problem, rho=rho, M=M)

    def extract(x):
        return ops.gprox(x / rho)

    def apply(x):
        v = extract(x)
        lam = x - rho * v
        u = ops.fsolve(v - lam / rho)
        return lam + rho * ops.apply_M(u)

    return AveragedOperator(apply=apply, alpha=0.5, dim=ops.dim_v), extract


def fast_admm_run(problem, rho=1.0, budget=1000, tol=DEFAULT_TOL, restart_factor=0.999):
    """Momentum ADMM with residual-based restart (comparison baseline).

    Applies Nesterov-style extrapolation to ``(v, lam)`` on top of standard
    ADMM updates and resets the momentum whenever the combined primal-dual
    residual fails to decrease by ``restart_factor``. Restarted iterations
    are flagged in the trace; the objective is recorded at the g-feasible
    block.
    """
    ops = admm_ops(problem, rho=rho)
    v = np.zeros(ops.dim_v)
    lam = np.zeros(ops.dim_v)
    v_hat, lam_hat = v.copy(), lam.copy()
    t = 1.0
    c_prev = np.inf
    rec = TraceRecorder(objective=problem.objective)
    converged = False
    for k in range(budget):
        u_new = ops.fsolve(v_hat - lam_hat / rho)
        Mu = ops.apply_M(u_new)
        v_new = ops.gprox(Mu + lam_hat / rho)
        lam_new = lam_hat + rho * (Mu - v_new)
        _check_finite(v_new, k + 1, rec)
        c = float(
            np.linalg.norm(lam_new - lam_hat) ** 2 / rho + rho * np.linalg.norm(v_new - v_hat) ** 2
        )
        residual = float(np.sqrt(c))
        if np.isfinite(c_prev) and c >= restart_factor * c_prev:
            # momentum hurt: drop it and replay from the last accepted pair
            rec.record(v_new, v, residual, 0.0, restarted=True)
            t = 1.0
            v_hat, lam_hat = v.copy(), lam.copy()
            c_prev = c_prev / restart_factor
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            rec.record(v_new, v, residual, beta)
            v_hat = v_new + beta * (v_new - v)
            lam_hat = lam_new + beta * (lam_new - lam)
            v, lam = v_new, lam_new
            t, c_prev = t_new, c
        if residual <= tol:
            converged = True
            break
    return rec.finish(v, converged)


# ---------------------------------------------------------------------------
# Condat's primal-dual algorithm on min f(u) + g(M u)


@dataclass(frozen=True)
class CondatState:
    u: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class CondatOps:
    """Prox machinery and step sizes for the primal-dual updates.

    ``fprox(w)`` is the prox of ``tau * f`` at ``w``; ``gsolve(z)`` minimizes
    ``g(w) + sigma/2 ||w - z/sigma||^2`` (the conjugate prox enters through
    Moreau's identity).
    """

    tau: float
    sigma: float
    M: np.ndarray
    fprox: Callable[[np.ndarray], np.ndarray]
    gsolve: Callable[[np.ndarray], np.ndarray]

    @property
    def dim_u(self):
        return self.M.shape[1]

    @property
    def dim_dual(self):
        return self.M.shape[0]


def _logistic_loss_prox(y, m, sigma, w):
    # per-coordinate Newton for argmin_t (1/m) softplus(-y t) + sigma/2 (t - w)^2
    t = w.copy()
    for _ in range(60):
        grad = -(y / m) * expit(-y * t) + sigma * (t - w)
        if np.max(np.abs(grad)) <= 1e-13 * max(1.0, sigma):
            break
        hess = expit(-y * t) * expit(y * t) / m + sigma
        t = t - grad / hess
    return t


def condat_ops(problem, tau=0.5, sigma=None):
    """Instantiate the primal-dual splitting for a benchmark problem.

    The lasso uses the matrix-inversion-free form ``M = A``,
    ``f = lam ||.||_1``, ``g = 0.5 ||. - b||^2``; logistic problems use
    ``M`` equal to the feature matrix, ``f`` the penalty, and ``g`` the mean
    logistic loss, whose prox separates per coordinate. The default dual
    step is ``sigma = 1 / (tau ||M||^2)`` with ``||M||^2`` from power
    iteration (padded by 1e-8 so ``sigma tau ||M||^2 <= 1`` holds despite
    the from-below convergence of the power method).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if isinstance(problem, LassoProblem):
        M = problem.A
    elif isinstance(problem, LogisticProblem):
        M = problem.X
    else:
        raise TypeError(f"no primal-dual instantiation for {type(problem).__name__}")
    if sigma is None:
        sigma = 1.0 / (tau * power_norm2(M) * (1.0 + 1e-8))
    sigma = float(sigma)

    if isinstance(problem, LassoProblem):
        lam_reg, b = problem.lam, problem.b

        def fprox(w):
            return prox_l1(w, tau * lam_reg)

        def gsolve(z):
            return (b + z) / (1.0 + sigma)

    else:
        y, m = problem.y, problem.m

        def fprox(w):
            return problem.reg_prox(w, tau)

        def gsolve(z):
            return _logistic_loss_prox(y, m, sigma, z / sigma)

    return CondatOps(tau=tau, sigma=sigma, M=M, fprox=fprox, gsolve=gsolve)


def condat_step(state, ops):
    """One primal-dual update on ``(u, lam)``."""
    u = ops.fprox(state.u - ops.tau * (ops.M.T @ state.lam))
    z = state.lam + ops.sigma * (ops.M @ (2.0 * u - state.u))
    lam = z - ops.sigma * ops.gsolve(z)
    return CondatState(u=u, lam=lam)


def condat_metric(ops):
    """Primal-dual quadratic form in which the stacked operator is averaged."""
    n, md = ops.dim_u, ops.dim_dual
    P = np.zeros((n + md, n + md))
    P[:n, :n] = np.eye(n) / ops.tau
    P[:n, n:] = -ops.M.T
    P[n:, :n] = -ops.M
    P[n:, n:] = np.eye(md) / ops.sigma
    return P


def condat_operator(problem, tau=0.5, sigma=None):
    """Condat's iteration as a 1/2-averaged operator on the stacked vector.

    Returns ``(T, extract)`` with ``extract`` recovering the primal block.
    The operator carries the primal-dual metric so the averagedness
    diagnostic checks the right geometry.
    """
    ops = condat_ops(problem, tau=tau, sigma=sigma)
    n = ops.dim_u

    def apply(x):
        new = condat_step(CondatState(u=x[:n], lam=x[n:]), ops)
        return np.concatenate([new.u, new.lam])

    def extract(x):
        return x[:n]

    T = AveragedOperator(
        apply=apply, alpha=0.5, dim=n + ops.dim_dual, metric=condat_metric(ops)
    )
    return T, extract
