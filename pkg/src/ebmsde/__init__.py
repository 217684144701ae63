"""Spectral simulation of stochastic Budyko-Sellers energy balance models."""

__version__ = "0.1.0"

from .basis import (
    LegendreBasis,
    apply_operator,
    basis_eval,
    build_basis,
    l2_norm,
    legendre_poly,
    semigroup_apply,
    to_nodal,
    to_spectral,
)
from .constitutive import (
    BudykoCoalbedo,
    Forcing,
    LinearEmission,
    SellersCoalbedo,
    beta_eval,
    j_primitive,
    yosida_eval,
)
from .noise import (
    ConstantModulation,
    CylindricalNoise,
    FiniteNoise,
    NoiseOff,
    PowerDecayModulation,
    SamplePath,
    convolution_trace,
    gw_path,
    isometry_estimate,
    isometry_target,
    sample_increments,
    stochastic_convolution,
)
from .solver import (
    ModelConfig,
    Trajectory,
    comparison_check,
    eps_convergence,
    lambda_convergence,
    nondegeneracy_measure,
    solve_ensemble,
    solve_path,
    step,
    zero_path,
)
from .stationary import (
    energy_functional,
    minimal_maximal,
    q_thresholds,
    scan_q,
    solve_stationary,
    stationary_residual,
)

__all__ = [name for name in dir() if not name.startswith("_")]
