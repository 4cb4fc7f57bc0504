"""Hermite-coefficient calculus for tempered distributions and the heat equation."""

__version__ = "0.1.0"

from .hermite_basis import (
    QuadGrid,
    build_quad_grid,
    enumerate_indices,
    hermite_eval_1d,
    hermite_eval_nd,
    project_function,
    synthesize,
)
from .sobolev import (
    HermiteCoeffs,
    apply_complex_power,
    apply_derivative,
    apply_Hp,
    apply_lower,
    apply_position,
    apply_raise,
    delta_coeffs,
    fourier,
    gaussian_coeffs,
    norm_equivalence_check,
    sobolev_norm,
)
from .stochastic import (
    BrownianPath,
    MCEstimate,
    ito_residual,
    martingale_check,
    mc_expectation,
    monotonicity_scan,
    realized_covariation,
    sample_brownian,
    sde_solution_check,
)
from .translation_heat import (
    convolution_reference,
    heat_apply,
    heat_kernel,
    norm_bound_scan,
    st_operator,
    strong_continuity_scan,
    translate_expm,
    translate_quadrature,
)
