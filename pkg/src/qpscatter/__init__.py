"""Direct and inverse scattering for Jacobi operators with finite-gap quasi-periodic background."""

from .errors import *  # noqa: F401,F403
from .surface import (
    HyperellipticCurve,
    SurfaceData,
    SurfacePoint,
    ThetaParams,
    abel_map,
    compute_periods,
    domega,
    lambda_of_w,
    quasimomentum,
    sqrt_R,
    theta,
    theta_grad,
    third_kind,
)
from .background import BAFunction, BackgroundOperator, CircleRule, DirichletData, build_background
from .jost import (
    JostSolution,
    Perturbation,
    PerturbedOperator,
    TransformationKernel,
    jost,
    kernel,
    verify_decay,
    verify_intertwining,
)
from .scattering import (
    BoundState,
    ScatteringData,
    alpha_beta,
    dense_bound_states,
    find_bound_states,
    poisson_jensen_T,
    scattering_data,
    validate_scattering_data,
    wronskian,
)
from .glm import (
    GLMKernel,
    GLMSolution,
    ReconstructionResult,
    assemble_F,
    check_positivity,
    invert,
    reconstruct,
    solve_glm,
)
from .estimator import ScatteringTransform

__version__ = "0.1.0"
