"""Numerical laboratory for large-time asymptotics of u_t = Laplace(u^m) + u^alpha.

Solves the Cauchy problem on a truncated grid, renormalizes the solution
against the homogeneous profile, expands the result in derivatives of the
Gauss kernel, and fits the measured decay rates against the predicted
exponents.
"""

from .grid import GridField, GridSpec, multi_indices
from .profiles import (
    ProblemParams,
    RegimeError,
    eta,
    h_decay,
    sigma,
    tau_star,
    time_of_tau,
    zeta,
)
from .kernels import (
    g_kernel,
    gauss,
    gauss_deriv,
    heat_semigroup,
    lq_norm,
    weighted_norm,
)
from .moments import (
    ExpansionReport,
    duhamel_remainder,
    e_functional,
    expand,
    moment_coefficient,
    moment_coefficients,
    raw_moment,
)
from .solver import (
    InitialPerturbation,
    PositivityError,
    SolverConfig,
    SolverError,
    Trajectory,
    coeff_A,
    flux_H,
    solve_original,
    solve_rescaled,
    source_F,
)
from .harness import (
    RateReport,
    estimate_M,
    finite_horizon_check,
    fit_rate,
    ode_convergence_error,
    renormalize,
    thm11_error,
    thm12_error,
    w_of,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
