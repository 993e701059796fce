"""Dirichlet-Neumann and Neumann-Dirichlet time domain decomposition for
parabolic optimal control: convergence factors, exact modal iterations and a
fully discrete two-subdomain solver."""

from .algorithms import ALL_ALGORITHMS, AlgorithmId, Functional, TRANSMISSION
from .errors import (
    BoundUndefinedError,
    ConfigError,
    FactorizationError,
    InvalidDimensionError,
    InvalidInputError,
    MatrixFileError,
    NotApplicableError,
    ParameterError,
    SymmetryError,
    TimeDDError,
    TooFewIterationsError,
    UnsupportedSpectrumError,
)
from .modal_dd import (
    ModalIterateState,
    ModalSubdomainSolution,
    dd_step,
    iteration_ratio,
    reconstruct_pair,
    run_modal_dd,
    subdomain_solve,
)
from .rho_analysis import (
    ConvergenceReport,
    bound_dn1,
    bound_nd1,
    divergence_margin,
    interface_gain,
    rho,
    rho_at_infinity,
    rho_at_zero,
    rho_dn1,
    rho_dn1_via_mu,
    rho_dn2,
    rho_dn3,
    rho_nd1,
    rho_nd2,
    rho_nd3,
    spectral_report,
    theta_star_closed_form,
    theta_star_numeric,
)
from .spectral_model import (
    ModalBvpSolution,
    ModalTriple,
    ProblemParams,
    SpectralModel,
    build_laplacian_1d,
    eigendecompose,
    load_matrix,
    modal_coefficients,
    modal_general_solution,
)
from .time_dd_solver import (
    DiscreteProblem,
    IterationHistory,
    TimeGrid,
    TrajectoryPair,
    dd_solve,
    dd_solve_per_mode,
    monolithic_solve,
    observed_rate,
    subdomain_solve_discrete,
)

__version__ = "0.1.0"
