"""Batch harness: scenario configs, trace CSV emission, comparison suites.

Subcommands
-----------
``run``      one (problem, algorithm, scheme) scenario -> per-iteration CSV
``compare``  plain + baseline + the three online schedulers -> combined CSV
``sweep``    best static scheme over a grid of eigenvalue intervals -> CSV
``gen-data`` generate and serialize a synthetic lasso instance

Exit codes: 0 success, 2 configuration error, 3 divergence. Scenario CSVs
use the fixed header ``iter,objective_error,residual,parameter,restarted``;
``--raw-errors`` appends an unclamped shadow column.
"""

import argparse
import configparser
import csv
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import algorithms, problems
from .errors import AveropError, ConfigError, DivergedError
from .online import oaim_run, oim_run, orm_run
from .operators import km_iterate
from .schemes import SchemeKind, best_scheme, iterate_scheme

CSV_HEADER = ["iter", "objective_error", "residual", "parameter", "restarted"]
ERROR_FLOOR = 1e-16

PROBLEM_KINDS = ("lasso", "logistic_l1", "logistic_l2")
ALGOS = ("prox_grad", "admm", "condat", "fista", "fast_admm")
SCHEMES = ("plain", "relaxation", "inertia", "alt_inertia", "orm", "oim", "oaim")
_BASELINES = {"prox_grad": "fista", "admm": "fast_admm", "condat": None}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to execute one deterministic scenario."""

    problem: str = "lasso"
    seed: int = 0
    path: Optional[str] = None
    lam: Optional[float] = None
    algo: str = "prox_grad"
    scheme: str = "plain"
    param: Optional[float] = None
    eps: float = 1e-4
    budget: int = 1000
    rho: float = 1.0
    tau: float = 0.5
    sigma: Optional[float] = None
    out: Optional[str] = None
    strict: bool = True
    raw_errors: bool = False


@dataclass(frozen=True)
class TraceRow:
    iter: int
    objective_error: float  # clamped at ERROR_FLOOR for log-scale plots
    residual: float
    parameter: float
    restarted: bool
    objective_error_raw: float = math.nan


@dataclass(frozen=True)
class Summary:
    final_error: float
    n_applications: int
    converged: bool
    retunes: int
    restarts: int
    reference_certified: bool


def build_problem(config):
    kind = config.problem
    if kind == "lasso":
        return problems.gen_lasso(config.seed, lam=config.lam)
    if kind in ("logistic_l1", "logistic_l2"):
        if not config.path:
            raise ConfigError(f"{kind} needs a dataset path")
        if not Path(config.path).exists():
            raise ConfigError(f"dataset not found: {config.path}")
        penalty = problems.L1 if kind == "logistic_l1" else problems.L2
        lam = config.lam if config.lam is not None else (0.1 if penalty == problems.L1 else 0.01)
        return problems.load_logistic(config.path, penalty=penalty, lam=lam)
    raise ConfigError(f"unknown problem kind {kind!r} (choose from {PROBLEM_KINDS})")


def build_operator(config, problem):
    """Operator, primal extraction, and start point for the configured algo."""
    if config.algo == "prox_grad":
        T = algorithms.prox_grad_operator(problem)
        return T, (lambda x: x), np.zeros(problem.dim)
    if config.algo == "admm":
        T, extract = algorithms.admm_meta_operator(problem, rho=config.rho)
        return T, extract, np.zeros(T.dim)
    if config.algo == "condat":
        T, extract = algorithms.condat_operator(problem, tau=config.tau, sigma=config.sigma)
        return T, extract, np.zeros(T.dim)
    raise ConfigError(f"unknown algorithm {config.algo!r} (choose from {ALGOS})")


def validate(config):
    """Reject invalid combinations before any compute."""
    if config.problem not in PROBLEM_KINDS:
        raise ConfigError(f"unknown problem kind {config.problem!r}")
    if config.algo not in ALGOS:
        raise ConfigError(f"unknown algorithm {config.algo!r}")
    if config.scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {config.scheme!r}")
    if config.budget < 1:
        raise ConfigError("budget must be positive")
    if config.algo in ("fista", "fast_admm") and config.scheme != "plain":
        raise ConfigError(f"{config.algo} is a baseline; schemes do not apply")
    if config.rho <= 0 or config.tau <= 0:
        raise ConfigError("rho and tau must be positive")

    alpha = {"prox_grad": 2.0 / 3.0, "admm": 0.5, "condat": 0.5}.get(config.algo)
    if config.scheme in ("relaxation", "inertia", "alt_inertia"):
        if config.param is None:
            raise ConfigError(f"scheme {config.scheme} needs --param")
        kind = {
            "relaxation": SchemeKind.relaxation,
            "inertia": SchemeKind.inertia,
            "alt_inertia": SchemeKind.alternated_inertia,
        }[config.scheme](config.param)
        try:
            kind.check_admissible(alpha, strict=config.strict)
        except AveropError as exc:
            raise ConfigError(str(exc)) from exc
    if config.scheme == "orm":
        bound = 2.0 * min(alpha, 1.0 - alpha)
        if not 0.0 < config.eps <= bound:
            raise ConfigError(f"orm needs eps in (0, {bound}], got {config.eps}")
        if config.budget < 2:
            raise ConfigError("orm needs budget >= 2")
    if config.scheme == "oim" and config.budget < 4:
        raise ConfigError("oim needs budget >= 4")
    if config.scheme == "oaim" and config.budget < 8:
        raise ConfigError("oaim needs budget >= 8")
    if config.scheme in ("oim", "oaim") and config.eps <= 0:
        raise ConfigError("eps must be positive")


def _execute(config, problem):
    if config.algo == "fista":
        return algorithms.fista_run(problem, budget=config.budget)
    if config.algo == "fast_admm":
        return algorithms.fast_admm_run(problem, rho=config.rho, budget=config.budget)
    T, extract, x0 = build_operator(config, problem)
    objective = lambda x: problem.objective(extract(x))
    if config.scheme == "plain":
        return km_iterate(T, x0, max_iters=config.budget, objective=objective)
    if config.scheme in ("relaxation", "inertia", "alt_inertia"):
        kind = {
            "relaxation": SchemeKind.relaxation,
            "inertia": SchemeKind.inertia,
            "alt_inertia": SchemeKind.alternated_inertia,
        }[config.scheme](config.param)
        return iterate_scheme(
            T, x0, kind, max_iters=config.budget, strict=config.strict, objective=objective
        )
    runner = {"orm": orm_run, "oim": oim_run, "oaim": oaim_run}[config.scheme]
    return runner(T, x0, eps=config.eps, budget=config.budget, objective=objective)


def trace_to_rows(trace, f_star):
    rows = []
    objectives = trace.objectives
    for j in range(len(trace)):
        err_raw = (objectives[j] - f_star) if objectives is not None else math.nan
        rows.append(
            TraceRow(
                iter=j + 1,
                objective_error=max(err_raw, ERROR_FLOOR) if math.isfinite(err_raw) else err_raw,
                residual=float(trace.residuals[j]),
                parameter=float(trace.params[j]),
                restarted=bool(trace.restarts[j]),
                objective_error_raw=err_raw,
            )
        )
    return rows


def summarize(trace, rows, certified):
    params = trace.params
    retunes = int(np.count_nonzero(params[1:] != params[:-1]))
    restarts = int(np.count_nonzero(trace.restarts[1:] & ~trace.restarts[:-1]))
    if len(trace.restarts) and trace.restarts[0]:
        restarts += 1
    final_error = rows[-1].objective_error_raw if rows else math.nan
    return Summary(
        final_error=final_error,
        n_applications=len(trace),
        converged=trace.converged,
        retunes=retunes,
        restarts=restarts,
        reference_certified=certified,
    )


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path, write_fn):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rows(path, rows, raw=False):
    header = CSV_HEADER + (["objective_error_raw"] if raw else [])

    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            record = [r.iter, _fmt(r.objective_error), _fmt(r.residual), _fmt(r.parameter), _fmt(r.restarted)]
            if raw:
                record.append(_fmt(r.objective_error_raw))
            writer.writerow(record)

    _atomic_write(path, emit)


def run_scenario(config):
    """Execute a validated scenario; returns ``(rows, summary)``.

    Writes the trace CSV when the config carries an output path. Divergence
    raises :class:`DivergedError` after the partial rows (plus a trailing
    NaN marker row) have been written.
    """
    validate(config)
    problem = build_problem(config)
    reference = problems.reference_solution(problem)
    try:
        trace = _execute(config, problem)
    except DivergedError as exc:
        rows = []
        if exc.trace is not None:
            rows = trace_to_rows(exc.trace, reference.F_star)
        rows.append(
            TraceRow(
                iter=(rows[-1].iter + 1) if rows else 1,
                objective_error=math.nan,
                residual=math.nan,
                parameter=math.nan,
                restarted=False,
            )
        )
        if config.out:
            write_rows(config.out, rows, raw=config.raw_errors)
        raise
    rows = trace_to_rows(trace, reference.F_star)
    if config.out:
        write_rows(config.out, rows, raw=config.raw_errors)
    return rows, summarize(trace, rows, reference.certified)


def compare_suite(config, workers=1):
    """Run plain, the family baseline, and the three online schedulers.

    Returns ``(names, results)`` with per-scenario row lists aligned for the
    combined CSV. Individual failures do not stop the suite; a failed
    scenario contributes an empty column pair.
    """
    validate(replace(config, scheme="plain"))
    problem = build_problem(config)
    reference = problems.reference_solution(problem)
    names = ["plain"]
    baseline = _BASELINES.get(config.algo)
    if baseline:
        names.append(baseline)
    names += ["orm", "oim", "oaim"]

    def one(name):
        if name in ("fista", "fast_admm"):
            scenario = replace(config, algo=name, scheme="plain", out=None)
        else:
            scenario = replace(config, scheme=name, out=None)
        try:
            trace = _execute(scenario, problem)
            return trace_to_rows(trace, reference.F_star)
        except AveropError as exc:
            print(f"scenario {name} failed: {exc}", file=sys.stderr)
            return []

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, names))
    else:
        results = [one(n) for n in names]
    return names, results


def write_compare(path, names, results):
    length = max((len(r) for r in results), default=0)
    header = ["iter"]
    for name in names:
        header += [f"{name}_error", f"{name}_parameter"]

    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for j in range(length):
            record = [j + 1]
            for rows in results:
                if j < len(rows):
                    record += [_fmt(rows[j].objective_error), _fmt(rows[j].parameter)]
                else:
                    record += ["", ""]
            writer.writerow(record)

    _atomic_write(path, emit)


def sweep_spectrum(resolution=16):
    """Best static scheme per eigenvalue-interval cell.

    Grid values are ``i / resolution`` for ``i < resolution`` (the half-open
    [0, 1) range; an interval reaching 1 has no linear rate). Yields
    ``(lam_min, lam_max, tag, rate)`` for every cell with
    ``lam_min <= lam_max``.
    """
    if resolution < 8:
        raise ConfigError("sweep resolution must be at least 8")
    values = [i / resolution for i in range(resolution)]
    table = []
    for lo in values:
        for hi in values:
            if lo > hi:
                continue
            tag, rate = best_scheme(lo, hi)
            table.append((lo, hi, tag, rate))
    return table


def write_sweep(path, table):
    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(["lambda_min", "lambda_max", "scheme", "rate"])
        for lo, hi, tag, rate in table:
            writer.writerow([_fmt(float(lo)), _fmt(float(hi)), tag, _fmt(float(rate))])

    _atomic_write(path, emit)


# ---------------------------------------------------------------------------
# configuration plumbing


def _config_from_file(path):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    values = {}
    mapping = {
        ("problem", "kind"): ("problem", str),
        ("problem", "seed"): ("seed", int),
        ("problem", "path"): ("path", str),
        ("problem", "lam"): ("lam", float),
        ("run", "algo"): ("algo", str),
        ("run", "scheme"): ("scheme", str),
        ("run", "param"): ("param", float),
        ("run", "eps"): ("eps", float),
        ("run", "budget"): ("budget", int),
        ("run", "rho"): ("rho", float),
        ("run", "tau"): ("tau", float),
        ("run", "sigma"): ("sigma", float),
        ("run", "out"): ("out", str),
    }
    for (section, key), (attr, cast) in mapping.items():
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                values[attr] = cast(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    return values


def _merge_config(args):
    values = {}
    if getattr(args, "config", None):
        values = _config_from_file(args.config)
    overrides = {
        "problem": args.problem,
        "seed": args.seed,
        "path": args.path,
        "lam": args.lam,
        "algo": getattr(args, "algo", None),
        "scheme": getattr(args, "scheme", None),
        "param": getattr(args, "param", None),
        "eps": getattr(args, "eps", None),
        "budget": getattr(args, "budget", None),
        "rho": getattr(args, "rho", None),
        "tau": getattr(args, "tau", None),
        "sigma": getattr(args, "sigma", None),
        "out": getattr(args, "out", None),
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    values["strict"] = not getattr(args, "no_strict", False)
    values["raw_errors"] = bool(getattr(args, "raw_errors", False))
    try:
        return ScenarioConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _add_common(sub):
    sub.add_argument("--config", help="key = value config file (INI sections)")
    sub.add_argument("--problem", choices=PROBLEM_KINDS)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--path", help="dataset CSV for logistic problems")
    sub.add_argument("--lam", type=float, help="regularization weight override")
    sub.add_argument("--budget", type=int)
    sub.add_argument("--eps", type=float)
    sub.add_argument("--rho", type=float)
    sub.add_argument("--tau", type=float)
    sub.add_argument("--sigma", type=float)
    sub.add_argument("--out")
    sub.add_argument("--no-strict", action="store_true", help="downgrade admissibility errors to warnings")
    sub.add_argument("--raw-errors", action="store_true", help="append the unclamped error column")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="averop", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="run one scenario and write its trace CSV")
    _add_common(p_run)
    p_run.add_argument("--algo", choices=ALGOS)
    p_run.add_argument("--scheme", choices=SCHEMES)
    p_run.add_argument("--param", type=float, help="eta or gamma for fixed schemes")

    p_cmp = subs.add_parser("compare", help="plain + baseline + online schedulers")
    _add_common(p_cmp)
    p_cmp.add_argument("--algo", choices=("prox_grad", "admm", "condat"))
    p_cmp.add_argument("--workers", type=int, default=1)

    p_sweep = subs.add_parser("sweep", help="best static scheme over eigenvalue intervals")
    p_sweep.add_argument("--resolution", type=int, default=16)
    p_sweep.add_argument("--out", required=True)

    p_gen = subs.add_parser("gen-data", help="generate and serialize a lasso instance")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--m", type=int, default=100)
    p_gen.add_argument("--n", type=int, default=300)
    p_gen.add_argument("--nnz", type=int, default=90)
    p_gen.add_argument("--sigma", type=float, default=0.001)
    p_gen.add_argument("--lam", type=float)
    p_gen.add_argument("--lam-scale", type=float, default=0.1)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _merge_config(args)
            rows, summary = run_scenario(config)
            print(
                f"applications={summary.n_applications} converged={summary.converged} "
                f"final_error={summary.final_error:.6e} retunes={summary.retunes} "
                f"restarts={summary.restarts}"
            )
            if not summary.reference_certified:
                print("warning: reference solve not certified to 1e-12", file=sys.stderr)
        elif args.command == "compare":
            config = _merge_config(args)
            if not config.out:
                raise ConfigError("compare needs --out")
            names, results = compare_suite(config, workers=args.workers)
            write_compare(config.out, names, results)
            print(f"wrote {config.out} with curves: {', '.join(names)}")
        elif args.command == "sweep":
            table = sweep_spectrum(resolution=args.resolution)
            write_sweep(args.out, table)
            print(f"wrote {args.out} ({len(table)} cells)")
        elif args.command == "gen-data":
            problem = problems.gen_lasso(
                args.seed, m=args.m, n=args.n, nnz=args.nnz, sigma=args.sigma,
                lam=args.lam, lam_scale=args.lam_scale,
            )
            problems.save_lasso(problem, args.out)
            print(f"wrote lasso instance (m={problem.m}, n={problem.dim}, lam={problem.lam:.6g}) to {args.out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 3
    except AveropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
