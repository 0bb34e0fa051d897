"""Weighted Kazdan-Warner equations on the plane: conformal factors with given curvature.

Solves ``0.5/rho Lap u + h e^u = f`` on conformal backgrounds
``rho g0`` of the plane by Dirichlet problems on growing domains with a
vanishing regularization ``eps u``, and builds the family of solutions of
``Lap u + K e^{2u} = 0`` with prescribed logarithmic growth.
"""

from .assumptions import (
    AdmissibilityQuery,
    Window,
    admissible_k,
    check_curvature_bound,
    check_linfty,
    q_window,
)
from .discretize import Schedule, integrate_plane, quadrature
from .geometry import (
    BackgroundMetric,
    DecayCertificate,
    PowerLaw,
    PowerProfile,
    chern_scalar_curvature,
    conformal_change_curvature,
    half_laplacian,
)
from .grid import GridMismatchError, GridSpec, ScalarField, build_grid
from .oracle import RadialProfile, growth_fit, solve_radial
from .solver import (
    BlowUpError,
    ContinuationRequiredError,
    InadmissibleError,
    NewtonDivergenceError,
    ProblemSpec,
    SolveReport,
    continue_domain,
    continue_epsilon,
    solve_dirichlet,
    solve_family,
    verify_apriori_bounds,
    verify_uniqueness,
)
from .vortex import VortexData, reduce_to_scalar, solve_vortex

__version__ = "0.1.0"
