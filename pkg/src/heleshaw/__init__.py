"""Free boundary interface flows recast as nonlocal parabolic equations.

The bulk field under (or above) a periodic graph interface is solved with
a monotone cut-cell finite difference scheme; the interface moves with a
velocity built from its inward normal derivatives. The analysis module
verifies the structural properties of that flux operator numerically.
"""

from .geometry import (
    BandViolationError,
    CutCellDomain,
    GraphInterface,
    PeriodicGrid,
    ResolutionError,
    build_domain,
    graph_gradient,
    interface_normal,
)
from .elliptic import (
    BoundaryData,
    BulkField,
    DiscreteSystem,
    EllipticOperatorSpec,
    NonConvergenceError,
    assemble_laplace,
    pucci_eval,
    solve_bulk,
    solve_linear,
)
from .fboperator import (
    InterfaceFluxes,
    LAPLACE,
    ProbeOutOfPhaseError,
    VelocityLaw,
    check_monotonicity,
    difference_law,
    identity_law,
    interface_velocity,
    normal_derivative_probe,
    op_H,
    op_I,
    op_I_minus,
    squares_law,
    table_law,
)
from .evolution import (
    EvolutionConfig,
    Frame,
    PhaseBandViolationError,
    frame_stats,
    run,
    step,
)
from .analysis import (
    KernelEstimate,
    PropertyReport,
    bump_phi_R,
    bump_response,
    check_bulk_monotone,
    check_constant_shift,
    check_evolution_comparison,
    check_far_field_decay,
    check_gcp,
    check_modulus,
    check_translation,
    dispersion_multiplier,
    inf_convolution,
    linearize_I,
    measured_dispersion_multiplier,
    sup_convolution,
)

__version__ = "0.1.0"

__all__ = [
    "BandViolationError",
    "BoundaryData",
    "BulkField",
    "CutCellDomain",
    "DiscreteSystem",
    "EllipticOperatorSpec",
    "EvolutionConfig",
    "Frame",
    "GraphInterface",
    "InterfaceFluxes",
    "KernelEstimate",
    "LAPLACE",
    "NonConvergenceError",
    "PeriodicGrid",
    "PhaseBandViolationError",
    "ProbeOutOfPhaseError",
    "PropertyReport",
    "ResolutionError",
    "VelocityLaw",
    "assemble_laplace",
    "build_domain",
    "bump_phi_R",
    "bump_response",
    "check_bulk_monotone",
    "check_constant_shift",
    "check_evolution_comparison",
    "check_far_field_decay",
    "check_gcp",
    "check_modulus",
    "check_monotonicity",
    "check_translation",
    "difference_law",
    "dispersion_multiplier",
    "frame_stats",
    "graph_gradient",
    "identity_law",
    "inf_convolution",
    "interface_normal",
    "interface_velocity",
    "linearize_I",
    "measured_dispersion_multiplier",
    "normal_derivative_probe",
    "op_H",
    "op_I",
    "op_I_minus",
    "pucci_eval",
    "run",
    "solve_bulk",
    "solve_linear",
    "squares_law",
    "step",
    "sup_convolution",
    "table_law",
]
