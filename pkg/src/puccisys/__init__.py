"""Numerics for weakly coupled fully nonlinear parabolic systems with Pucci-type operators."""

__version__ = "0.1.0"

from .operators import (  # noqa: E402
    EllipticOperator,
    barenblatt,
    composite,
    evaluate,
    laplacian,
    linear_trace,
    minmax_2d,
    parse_operator,
    pucci,
    pucci_minus,
    pucci_plus,
    sym_eigenvalues,
)
from .grid import Grid, GridField, hessian_at, gradient_upwind_at, sup_norm, sup_ratio  # noqa: E402
from .evolve import (  # noqa: E402
    StepControl,
    SystemState,
    Trajectory,
    comparison_check,
    duhamel_fixed_point,
    exponential_rescale_check,
    semigroup_nonexpansion_check,
    semigroup_step,
    solve_system,
    system_step,
)
from .selfsim import EigenPair, envelope_check, power_iterate, rescaled_step, self_similar_field  # noqa: E402
from .barrier import (  # noqa: E402
    BarrierCertificate,
    barrier_residual,
    build_certificate,
    certify_global,
    check_admissibility,
    select_epsilon,
)
