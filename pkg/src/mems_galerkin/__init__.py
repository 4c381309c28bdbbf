"""Spectral Faedo-Galerkin simulator for the fourth-order MEMS equations

    u_t  + beta Lap^2 u - tau Lap u = lam / (1 - u)^2
    u_tt + beta Lap^2 u - tau Lap u = lam / (1 - u)^2

on an interval or a radially symmetric unit ball, with energy checks,
contraction certificates and a touchdown bound.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .spectrum import (  # noqa: E402
    BoundaryCondition,
    Interval,
    OperatorSpec,
    RadialBall,
    SpectralBasis,
    analyze,
    assemble_operator,
    build_grid,
    compute_spectrum,
    embedding_constant,
    energy_inner_product,
    l2_inner_product,
    synthesize,
)
from .trajectory import GalerkinState, SolveConfig, Termination, Trajectory  # noqa: E402
from .parabolic import parabolic_energy_report, solve_parabolic, step_parabolic  # noqa: E402
from .hyperbolic import hyperbolic_energy_report, solve_hyperbolic, step_hyperbolic  # noqa: E402
from .fixed_point import apply_F, picard_solve, xt_norm  # noqa: E402
from .certificates import (  # noqa: E402
    certify_global,
    certify_hyperbolic,
    certify_local,
    estimate_linear_constant,
    lipschitz_factor,
)
from .quench import (  # noqa: E402
    g_of_M,
    principal_eigenpair,
    quench_constants,
    touchdown_bound,
    verify_mass_inequality,
)
