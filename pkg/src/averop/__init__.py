"""Fixed-point iterations over averaged operators, with online acceleration.

The package is organized around theplain Krasnoselskii-Mann loop:

* :mod:`averop.operators` - operator containers, the iteration loop,
  spectral analysis of affine maps, empirical rate estimation;
* :mod:`averop.schemes` - static relaxation / inertia / alternated inertia
  and their closed-form optimal parameters for real spectra;
* :mod:`averop.online` - the self-tuning schedulers (online relaxation,
  online inertia, online alternated inertia) with restart safeguards;
* :mod:`averop.algorithms` - proximal gradient, the ADMM family on its
  meta-variable, Condat's primal-dual method, and baselines;
* :mod:`averop.problems` - benchmark problem generation and ingestion;
* :mod:`averop.cli` - the batch harness (``averop run|compare|sweep|gen-data``).
"""

from .errors import (
    AdmissibilityError,
    AnalysisError,
    AveropError,
    ConfigError,
    DatasetError,
    DivergedError,
    InvalidSpectrumError,
    SubproblemError,
)
from .operators import (
    AffineOperator,
    AveragedOperator,
    IterationTrace,
    averagedness_defect,
    check_eigen_disk,
    estimate_rate,
    is_averaged_sample,
    km_iterate,
    spectral_rate,
)
from .schemes import (
    OptimalChoice,
    SchemeKind,
    alternated_cycle,
    best_scheme,
    inertia_admissible_const,
    inertial_step,
    iterate_scheme,
    modified_spectrum,
    optimal_alt_inertia,
    optimal_inertia,
    optimal_relaxation,
    relaxed_step,
)
from .online import oaim_run, oim_run, orm_eta_bounds, orm_run

__all__ = [
    "AveropError",
    "DivergedError",
    "AdmissibilityError",
    "InvalidSpectrumError",
    "AnalysisError",
    "SubproblemError",
    "ConfigError",
    "DatasetError",
    "AveragedOperator",
    "AffineOperator",
    "IterationTrace",
    "km_iterate",
    "estimate_rate",
    "spectral_rate",
    "check_eigen_disk",
    "averagedness_defect",
    "is_averaged_sample",
    "SchemeKind",
    "OptimalChoice",
    "relaxed_step",
    "inertial_step",
    "alternated_cycle",
    "inertia_admissible_const",
    "optimal_relaxation",
    "optimal_inertia",
    "optimal_alt_inertia",
    "modified_spectrum",
    "best_scheme",
    "iterate_scheme",
    "orm_run",
    "orm_eta_bounds",
    "oim_run",
    "oaim_run",
]

__version__ = "0.1.0"
