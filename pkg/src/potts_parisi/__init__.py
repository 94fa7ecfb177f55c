"""Parisi functional solver for the Potts spin glass with self-overlap correction."""

from .errors import (
    CFLError,
    ComputationError,
    ConvergenceError,
    GridError,
    InvalidPathError,
    LocationMismatchError,
    NotPSDError,
    StateSpaceTooLargeError,
)
from .functional import (
    correction_integral,
    f_functional,
    f_terms,
    lemma_path,
    p_functional,
    psi_of_path,
)
from .model import ExchangeableMat, MixtureXi, check_condition_1, check_convexity_sample, psi_embed
from .optimize import MinimizeOptions, isotonic_project, minimize_f, multistart
from .paths import MatrixStepPath, StepCdf, StepQuantile, compose_psi, l1_distance, make_step_cdf, quantile_inverse
from .pde import GridSpec, eval_phi0_expectation, fd_oracle_solve, solve_cole_hopf, terminal_condition

__version__ = "0.1.0"
