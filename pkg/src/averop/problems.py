"""Benchmark problems: synthetic lasso and CSV-backed logistic regression.

Problems expose a uniform surface consumed by the algorithms module:
``dim``, ``L`` (smooth-part Lipschitz bound), ``smooth_value``,
``smooth_grad``, ``reg_value``, ``reg_prox`` and ``objective``. All data is
immutable after construction and every evaluator is pure.
"""

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import mmread, mmwrite
from scipy.special import expit

from .errors import DatasetError
from .linalg import sym_lambda_max

L1 = "l1"
L2 = "l2"


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass(frozen=True)
class LassoProblem:
    """Least squares plus an l1 penalty: ``0.5 ||Ax - b||^2 + lam ||x||_1``.

    ``A`` has unit-norm columns; ``L`` is the largest eigenvalue of ``A.T A``.
    """

    A: np.ndarray
    b: np.ndarray
    lam: float
    L: float
    seed: int = 0

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def dim(self):
        return self.A.shape[1]

    def smooth_value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def smooth_grad(self, x):
        return self.A.T @ (self.A @ x - self.b)

    def reg_value(self, x):
        return self.lam * float(np.abs(x).sum())

    def reg_prox(self, v, step):
        return soft_threshold(v, step * self.lam)

    def objective(self, x):
        return self.smooth_value(x) + self.reg_value(x)


@dataclass(frozen=True)
class LogisticProblem:
    """Mean logistic loss with an l1 or squared-l2 penalty.

    ``X`` holds one sample per row (columns normalized to zero mean and unit
    variance), ``y`` the labels in {-1, +1}. The smooth-part constant is the
    bound ``L = max_i ||a_i||^2``.
    """

    X: np.ndarray
    y: np.ndarray
    lam: float
    penalty: str
    L: float

    def __post_init__(self):
        if self.penalty not in (L1, L2):
            raise ValueError(f"penalty must be '{L1}' or '{L2}'")

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def margins(self, x):
        return self.y * (self.X @ x)

    def smooth_value(self, x):
        # softplus(-z) via logaddexp avoids overflow for large margins
        return float(np.mean(np.logaddexp(0.0, -self.margins(x))))

    def smooth_grad(self, x):
        w = expit(-self.margins(x))
        return -(self.X.T @ (self.y * w)) / self.m

    def reg_value(self, x):
        if self.penalty == L1:
            return self.lam * float(np.abs(x).sum())
        return 0.5 * self.lam * float(x @ x)

    def reg_prox(self, v, step):
        if self.penalty == L1:
            return soft_threshold(v, step * self.lam)
        return v / (1.0 + step * self.lam)

    def objective(self, x):
        return self.smooth_value(x) + self.reg_value(x)


def _rng(seed):
    # counter-based Philox keyed by the seed: reproducible from the seed alone
    return np.random.Generator(np.random.Philox(key=seed))


def gen_lasso(seed, m=100, n=300, nnz=90, sigma=0.001, lam=None, lam_scale=0.1):
    """Generate a synthetic lasso instance.

    ``A`` is standard normal with columns rescaled to unit norm; a sparse
    ground truth ``p`` with ``nnz`` standard-normal entries at uniformly
    chosen positions produces ``b = A p + e`` with white noise of standard
    deviation ``sigma``. The penalty defaults to
    ``lam_scale * ||A.T b||_inf`` unless ``lam`` is given explicitly, and
    ``L`` is the numerically computed largest eigenvalue of ``A.T A``.

    The same seed always produces the same problem (Philox generator).
    """
    if nnz > n:
        raise ValueError("nnz cannot exceed n")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    attempt = seed
    for _ in range(8):
        rng = _rng(attempt)
        A = rng.standard_normal((m, n))
        norms = np.linalg.norm(A, axis=0)
        if np.all(norms > 0):
            break
        attempt += 1  # a zero column cannot be normalized; redraw
    else:
        raise DatasetError("could not draw a nondegenerate design matrix")
    A = A / norms
    p = np.zeros(n)
    support = rng.choice(n, size=nnz, replace=False)
    p[support] = rng.standard_normal(nnz)
    e = sigma * rng.standard_normal(m) if sigma > 0 else np.zeros(m)
    b = A @ p + e
    if lam is None:
        lam = lam_scale * float(np.abs(A.T @ b).max())
    L = sym_lambda_max(A.T @ A)
    return LassoProblem(A=A, b=b, lam=float(lam), L=L, seed=seed)


def _parse_label(raw, row_idx):
    s = raw.strip().strip('"')
    if s in ("g", "G"):
        return 1.0
    if s in ("b", "B"):
        return -1.0
    try:
        v = float(s)
    except ValueError:
        raise DatasetError(f"row {row_idx}: label {raw!r} is neither b/g nor numeric") from None
    if v in (1.0, -1.0):
        return v
    raise DatasetError(f"row {row_idx}: numeric label must be +1 or -1, got {raw!r}")


def load_logistic(path, penalty=L1, lam=0.1):
    """Load a binary-classification CSV as a logistic-regression problem.

    Expects one sample per row, features first and the class label last
    ("b"/"g" or +-1). Feature columns are normalized to zero mean and unit
    variance; constant columns are dropped with a warning. ``L`` is the
    max squared sample norm after normalization.

    Raises
    ------
    DatasetError
        On malformed rows (with the row number) or fewer than two classes.
    """
    rows = []
    labels = []
    with open(path, newline="") as fh:
        for idx, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DatasetError(f"row {idx}: need at least one feature and a label")
            try:
                feats = [float(c) for c in row[:-1]]
            except ValueError as exc:
                raise DatasetError(f"row {idx}: non-numeric feature ({exc})") from None
            if rows and len(feats) != len(rows[0]):
                raise DatasetError(f"row {idx}: expected {len(rows[0])} features, got {len(feats)}")
            rows.append(feats)
            labels.append(_parse_label(row[-1], idx))
    if not rows:
        raise DatasetError("dataset is empty")
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        raise DatasetError("dataset must contain two classes")
    X = np.asarray(rows, dtype=float)

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = std > 0.0
    if not np.all(keep):
        warnings.warn(f"dropping {int((~keep).sum())} constant feature column(s)", stacklevel=2)
    X = (X[:, keep] - mean[keep]) / std[keep]
    L = float((X**2).sum(axis=1).max())
    return LogisticProblem(X=X, y=y, lam=float(lam), penalty=penalty, L=L)


def write_synthetic_classification_csv(path, m=351, n=34, seed=7):
    """Write a deterministic synthetic binary-label CSV fixture.

    Two Gaussian classes with a random separating direction, labels "g"/"b",
    same shape as the classic 351x34 ionosphere layout. Column 0 is made
    binary (values 0/1) so normalization still has work to do, and one
    constant column exercise is left to the tests.
    """
    rng = _rng(seed)
    w = rng.standard_normal(n)
    w /= np.linalg.norm(w)
    X = rng.standard_normal((m, n))
    y = np.where(X @ w + 0.3 * rng.standard_normal(m) > 0, 1.0, -1.0)
    X += 0.5 * np.outer(y, w)  # shift classes apart along w
    X[:, 0] = (X[:, 0] > 0).astype(float)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(m):
            writer.writerow([f"{v:.10g}" for v in X[i]] + ["g" if y[i] > 0 else "b"])
    return path


@dataclass(frozen=True)
class ReferenceSolution:
    """High-accuracy optimum used to compute error curves.

    ``certificate`` is the proximal-gradient fixed-point residual achieved at
    ``x_star``; ``certified`` is False when the residual target was not
    reached within the iteration cap.
    """

    F_star: float
    x_star: np.ndarray
    certificate: float
    certified: bool = True


def reference_solution(problem, tol=1e-12, max_iters=1_000_000, x0=None):
    """Solve a problem to high accuracy with an accelerated internal run.

    Runs a momentum (FISTA-style) proximal-gradient loop with gradient-based
    adaptive restart until the fixed-point residual reaches ``tol``. This is
    the package's stand-in for an external high-accuracy solver; it is
    deliberately independent of the algorithm implementations under test.
    """
    L = problem.L
    x = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    yv = x.copy()
    t = 1.0
    certificate = np.inf
    done = 0
    check_every = 50
    while done < max_iters:
        for _ in range(min(check_every, max_iters - done)):
            grad = problem.smooth_grad(yv)
            x_new = problem.reg_prox(yv - grad / L, 1.0 / L)
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            if float((yv - x_new) @ (x_new - x)) > 0.0:
                t_new = 1.0  # restart the momentum when it points uphill
                yv = x_new.copy()
            else:
                yv = x_new + ((t - 1.0) / t_new) * (x_new - x)
            x, t = x_new, t_new
            done += 1
        step = problem.reg_prox(x - problem.smooth_grad(x) / L, 1.0 / L)
        certificate = float(np.linalg.norm(step - x))
        if certificate <= tol:
            break
    certified = certificate <= tol
    if not certified:
        warnings.warn(
            f"reference solve stopped at residual {certificate:.2e} > {tol:.0e}; "
            "downstream error curves carry reduced accuracy",
            stacklevel=2,
        )
    return ReferenceSolution(
        F_star=problem.objective(x), x_star=x, certificate=certificate, certified=certified
    )


def save_lasso(problem, directory):
    """Serialize a lasso instance to Matrix Market files plus a JSON header.

    Writes ``A.mtx``, ``b.mtx`` and ``meta.json`` under ``directory``; the
    format is plain text so instances can be cross-checked from any language.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mmwrite(str(directory / "A.mtx"), np.asarray(problem.A))
    mmwrite(str(directory / "b.mtx"), problem.b.reshape(-1, 1))
    meta = {
        "kind": "lasso",
        "seed": problem.seed,
        "m": problem.m,
        "n": problem.dim,
        "lam": problem.lam,
        "L": problem.L,
    }
    (directory / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return directory


def load_lasso(directory):
    """Load a lasso instance written by :func:`save_lasso`."""
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    A = np.asarray(mmread(str(directory / "A.mtx")))
    b = np.asarray(mmread(str(directory / "b.mtx"))).ravel()
    return LassoProblem(A=A, b=b, lam=meta["lam"], L=meta["L"], seed=meta["seed"])
