"""Fixed-parameter relaxation and inertia, with optimal choices for real spectra.

Three step transformers sit on top of a base operator ``T``:

* relaxation:          ``x+ = eta T(x) + (1 - eta) x``
* inertia:             ``x+ = T(x + gamma (x - x_prev))``
* alternated inertia:  a plain step, then an inertial step; equivalently a
  plain step followed by a relaxed step with ``eta = 1 + gamma``.

For affine operators whose linear part has real eigenvalues in a known
interval, each transformer admits a closed-form optimal parameter and rate;
those formulas are implemented here together with the maps from the original
spectrum to the modified one, and a numerical comparison that picks the best
scheme for a given eigenvalue interval.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, InvalidSpectrumError
from .operators import DEFAULT_MAX_ITERS, DEFAULT_TOL, TraceRecorder, _check_finite

PLAIN = "plain"
RELAXATION = "relaxation"
INERTIA = "inertia"
ALTERNATED_INERTIA = "alternated_inertia"
_TAGS = (PLAIN, RELAXATION, INERTIA, ALTERNATED_INERTIA)


@dataclass(frozen=True)
class SchemeKind:
    """A step-transformer tag plus its parameter (eta or gamma)."""

    tag: str
    param: float = 0.0

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown scheme tag {self.tag!r}")

    @classmethod
    def plain(cls):
        return cls(PLAIN)

    @classmethod
    def relaxation(cls, eta):
        return cls(RELAXATION, float(eta))

    @classmethod
    def inertia(cls, gamma):
        return cls(INERTIA, float(gamma))

    @classmethod
    def alternated_inertia(cls, gamma):
        return cls(ALTERNATED_INERTIA, float(gamma))

    def check_admissible(self, alpha, strict=True):
        """Validate the parameter against the convergence conditions for alpha.

        Relaxation needs ``0 < eta < 1/alpha``; constant inertia needs the
        quadratic condition of :func:`inertia_admissible_const`; alternated
        inertia needs ``0 <= gamma <= (1-alpha)/alpha``. With ``strict=False``
        violations only warn, since optimal parameters can exceed the
        guaranteed-convergence limits and still work in practice.
        """
        msg = None
        if self.tag == RELAXATION and not 0.0 < self.param < 1.0 / alpha:
            msg = f"relaxation eta={self.param} outside (0, {1.0 / alpha})"
        elif self.tag == INERTIA:
            if self.param < 0:
                msg = f"inertia gamma={self.param} must be nonnegative"
            elif not inertia_admissible_const(alpha, self.param):
                msg = f"inertia gamma={self.param} fails the constant-parameter condition for alpha={alpha}"
        elif self.tag == ALTERNATED_INERTIA:
            bound = (1.0 - alpha) / alpha
            if not 0.0 <= self.param <= bound:
                msg = f"alternated inertia gamma={self.param} outside [0, {bound}]"
        if msg is None:
            return True
        if strict:
            raise AdmissibilityError(msg)
        warnings.warn(msg, stacklevel=3)
        return False


def relaxed_step(T, eta, x, strict=True):
    """One relaxed application ``eta T(x) + (1 - eta) x``.

    ``eta = 1`` short-circuits to a plain application so that disabling the
    scheme reproduces the plain iteration bit-for-bit.
    """
    if eta == 1.0:
        return T(x)
    SchemeKind.relaxation(eta).check_admissible(T.alpha, strict=strict)
    return eta * T(x) + (1.0 - eta) * x


def inertial_step(T, gamma, x, x_prev):
    """One inertial application; returns ``(x_next, y)`` with the pre-image y.

    ``y = x + gamma (x - x_prev)`` and ``x_next = T(y)``; ``gamma = 0``
    short-circuits to ``y = x`` exactly.
    """
    if gamma < 0:
        raise AdmissibilityError(f"inertia gamma={gamma} must be nonnegative")
    y = x if gamma == 0.0 else x + gamma * (x - x_prev)
    return T(y), y


def alternated_cycle(T, gamma, x, strict=True):
    """A plain step followed by an inertial step; returns ``(x1, x2)``.

    Equivalent to applying ``T`` to the ``eta = 1 + gamma`` relaxed point of
    ``x`` after the plain step: ``x2 = T((1+gamma) T(x) - gamma x)``.
    """
    SchemeKind.alternated_inertia(gamma).check_admissible(T.alpha, strict=strict)
    x1 = T(x)
    x2, _ = inertial_step(T, gamma, x1, x)
    return x1, x2


def inertia_admissible_const(alpha, gamma):
    """Constant-inertia convergence condition ``(1-g)^2 > a/(1-a) g (1+g)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return (1.0 - gamma) ** 2 > alpha / (1.0 - alpha) * gamma * (1.0 + gamma)


@dataclass(frozen=True)
class OptimalChoice:
    """Closed-form optimal parameter and the linear rate it achieves."""

    parameter: float
    rate: float


def optimal_relaxation(alpha, lam):
    """Best constant relaxation for a real spectrum in ``[1-2a, lam]``.

    Returns ``eta* = 2 / (2a + 1 - lam)`` and the corresponding rate
    ``nu* = (2a - 1 + lam) / (2a + 1 - lam)``, obtained by balancing the two
    extreme modified eigenvalues against each other.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if lam >= 1.0:
        raise InvalidSpectrumError(f"dominant eigenvalue {lam} must be < 1")
    if lam < 1.0 - 2.0 * alpha:
        raise InvalidSpectrumError(
            f"dominant eigenvalue {lam} below the disk edge {1.0 - 2.0 * alpha}"
        )
    eta = 2.0 / (2.0 * alpha + 1.0 - lam)
    rate = (2.0 * alpha - 1.0 + lam) / (2.0 * alpha + 1.0 - lam)
    return OptimalChoice(eta, rate)


def optimal_inertia(lam):
    """Best constant inertia for a nonnegative real spectrum in ``[0, lam]``.

    Returns ``gamma* = (1 - sqrt(1-lam))^2 / lam`` and ``nu* = 1 - sqrt(1-lam)``.
    The achievable rate is never below ``lam / 2``. ``lam <= 0`` degenerates
    to no inertia at rate 0.
    """
    if lam >= 1.0:
        raise InvalidSpectrumError(f"dominant eigenvalue {lam} must be < 1")
    if lam <= 0.0:
        return OptimalChoice(0.0, 0.0)
    root = math.sqrt(1.0 - lam)
    return OptimalChoice((1.0 - root) ** 2 / lam, 1.0 - root)


def optimal_alt_inertia(lam):
    """Best alternated inertia for a nonnegative real spectrum in ``[0, lam]``.

    Returns ``gamma* = (2 lam^2 + (sqrt(2)-1) lam) / (2 lam (1-lam) + 1/2)``
    and the two-application rate ``nu* = gamma*^2 / (4 (1 + gamma*))``, the
    worst case over unknown intermediate eigenvalues (the interior vertex of
    the modified-spectrum parabola balanced against the right endpoint).
    """
    if lam >= 1.0:
        raise InvalidSpectrumError(f"dominant eigenvalue {lam} must be < 1")
    if lam <= 0.0:
        return OptimalChoice(0.0, 0.0)
    gamma = (2.0 * lam**2 + (math.sqrt(2.0) - 1.0) * lam) / (2.0 * lam * (1.0 - lam) + 0.5)
    return OptimalChoice(gamma, gamma**2 / (4.0 * (1.0 + gamma)))


def modified_spectrum(eigs, scheme):
    """Spectrum of the transformed iteration matrix, given the original one.

    * relaxation: each ``lam`` maps to ``eta lam + 1 - eta``;
    * inertia: each ``lam`` maps to the two roots of
      ``mu^2 - (1+gamma) lam mu + gamma lam`` (the doubled-state matrix);
    * alternated inertia: each ``lam`` maps to ``(1+gamma) lam^2 - gamma lam``
      (the two-application matrix).

    Returns a complex array (inertia roots may form conjugate pairs).
    """
    eigs = np.asarray(eigs, dtype=float)
    if scheme.tag == PLAIN:
        return eigs.astype(complex)
    if scheme.tag == RELAXATION:
        eta = scheme.param
        return (eta * eigs + (1.0 - eta)).astype(complex)
    if scheme.tag == INERTIA:
        g = scheme.param
        b = (1.0 + g) * eigs
        disc = np.sqrt(b.astype(complex) ** 2 - 4.0 * g * eigs)
        return np.concatenate([(b + disc) / 2.0, (b - disc) / 2.0])
    g = scheme.param
    return ((1.0 + g) * eigs**2 - g * eigs).astype(complex)


def _inertia_dominant_modulus(gammas, lams):
    # dominant-root modulus of mu^2 - (1+g) lam mu + g lam, on a (G, L) grid
    g = gammas[:, None]
    lam = lams[None, :]
    b = (1.0 + g) * lam
    disc = b**2 - 4.0 * g * lam
    real = (np.abs(b) + np.sqrt(np.maximum(disc, 0.0))) / 2.0
    cplx = np.sqrt(np.maximum(g * lam, 0.0))
    return np.where(disc >= 0.0, real, cplx)


def best_scheme(lam_min, lam_max, lam_grid=512, eta_step=1e-3, gamma_step=1e-3):
    """Best of the three schemes for eigenvalues in ``[lam_min, lam_max]``.

    Minimizes the worst modified-spectrum modulus over a parameter grid for
    each scheme: relaxation over ``(0, 1/alpha)`` with
    ``alpha = (1 - lam_min)/2`` (the smallest disk containing the interval),
    inertia and alternated inertia over ``[0, 3]``. Relaxation only needs the
    interval endpoints; the inertial schemes are evaluated on a ``lam_grid``-
    point grid because their worst case can sit strictly inside the interval.
    Rates are normalized per operator application (alternated inertia's
    two-application modulus enters through its square root), and ties go to
    the inertial schemes.

    Returns
    -------
    (str, float)
        Winning scheme tag and its per-application rate.
    """
    if not -1.0 < lam_min <= lam_max < 1.0:
        raise InvalidSpectrumError(f"need -1 < lam_min <= lam_max < 1, got [{lam_min}, {lam_max}]")
    alpha = (1.0 - lam_min) / 2.0
    etas = np.arange(eta_step, 1.0 / alpha, eta_step)
    rel_mods = np.maximum(
        np.abs(etas * lam_min + 1.0 - etas), np.abs(etas * lam_max + 1.0 - etas)
    )
    rel_rate = float(rel_mods.min())

    lams = np.linspace(lam_min, lam_max, lam_grid)
    gammas = np.arange(0.0, 3.0 + gamma_step, gamma_step)
    in_rate = float(_inertia_dominant_modulus(gammas, lams).max(axis=1).min())
    alt_mods = np.abs((1.0 + gammas[:, None]) * lams[None, :] ** 2 - gammas[:, None] * lams)
    alt_rate = math.sqrt(float(alt_mods.max(axis=1).min()))

    candidates = [(INERTIA, in_rate), (ALTERNATED_INERTIA, alt_rate), (RELAXATION, rel_rate)]
    tag, rate = min(candidates, key=lambda c: c[1])
    return tag, rate


def iterate_scheme(
    T,
    x0,
    scheme,
    max_iters=DEFAULT_MAX_ITERS,
    tol=DEFAULT_TOL,
    strict=True,
    ref_point=None,
    objective=None,
):
    """Run a fixed-parameter scheme on top of ``T`` and trace it.

    The iteration axis counts operator applications (an alternated cycle
    contributes two rows). Stopping uses the pre-image residual
    ``||T(y) - y||`` against ``tol``.
    """
    scheme.check_admissible(T.alpha, strict=strict)
    x = np.asarray(x0, dtype=float).copy()
    rec = TraceRecorder(ref_point=ref_point, objective=objective, x0=x)
    converged = False
    if scheme.tag in (PLAIN, RELAXATION):
        eta = 1.0 if scheme.tag == PLAIN else scheme.param
        for k in range(max_iters):
            tx = T(x)
            _check_finite(tx, k + 1, rec)
            residual = np.linalg.norm(tx - x)
            x_new = tx if eta == 1.0 else eta * tx + (1.0 - eta) * x
            rec.record(x_new, x, residual, eta)
            x = x_new
            if residual <= tol:
                converged = True
                break
        return rec.finish(x, converged)

    gamma = scheme.param
    x_prev = x.copy()
    alternate = scheme.tag == ALTERNATED_INERTIA
    for k in range(max_iters):
        g_k = 0.0 if (alternate and k % 2 == 0) else gamma
        x_new, y = inertial_step(T, g_k, x, x_prev)
        _check_finite(x_new, k + 1, rec)
        residual = np.linalg.norm(x_new - y)
        rec.record(x_new, x, residual, g_k)
        x_prev, x = x, x_new
        if residual <= tol:
            converged = True
            break
    return rec.finish(x, converged)
