"""Smoothed Wigner transforms and phase-space propagation for 1-D wavefields.

Modules:
    grid        uniform axes, complex fields, spectral transforms
    phasespace  Wigner / smoothed Wigner / spectrogram and observables
    weylops     polynomial symbols, shift identities, evolution operators
    solutions   exact wavefunctions and the split-step solver
    liouville   particle transport, exact flows, interpolation, oracles
    cli         experiment orchestration and the verification suite
"""

from .grid import (
    Axis,
    ComplexField1D,
    centered_axis,
    field_from_callable,
    forward_ft,
    inner_product,
    inverse_ft,
    l2_norm,
    make_axis,
    spectral_derivative,
)
from .liouville import (
    FlowMap,
    ParticleEnsemble,
    exact_flow,
    hamilton_rhs,
    interpolate_to_grid,
    kernel_evolution_reference,
    particle_marginal_x,
    propagate,
    seed_particles,
    semi_lagrangian_evolve,
)
from .phasespace import (
    PhaseSpaceField,
    PhaseSpaceGrid,
    SmoothingParams,
    marginal_k,
    marginal_x,
    natural_grid,
    smoothed_wigner,
    spectrogram,
    total_mass,
    trace_observable,
    wigner,
    wigner_cross,
    wigner_point_oracle,
)
from .solutions import (
    GaussianPacket,
    PotentialSpec,
    build_f_eps,
    gaussian_packet_exact,
    harmonic_eigenfunction,
    harmonic_packet_exact,
    split_step_solve,
)
from .weylops import (
    PhaseSpaceOperator,
    PolynomialSymbol,
    SchrodingerSymbol,
    apply_operator,
    build_evolution_operator,
    identity_pair,
    parse_symbol,
    truncate,
)

__version__ = "0.1.0"
