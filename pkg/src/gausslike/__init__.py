"""Transport maps, weighted isoperimetry and symmetrization certificates
for product measures of the form ``prod_i w_i(x_i) exp(-x_N^2/2) dx`` on
``S = S' x R``."""
from ._backend import NAME as BACKEND
from .density import (
    AxisPotential,
    ProductDensity,
    c_mu,
    custom_table,
    gaussian,
    normalization_c,
    phi_eval,
    power,
    quadratic_shift,
    separability_check,
    softplus_mixture,
)
from .errors import (
    CoefficientError,
    ConfigError,
    ConvergenceError,
    DomainError,
    GausslikeError,
    IntegrabilityError,
    LemmaViolationError,
    PreconditionError,
    RegionError,
)
from .isoperimetry import (
    RegionSpec,
    SeparatedDensity,
    VariationSpec,
    isoperimetric_check,
    mu_measure,
    perimeter,
    pushforward_chain_check,
    variation_curve,
    volume_matched_graph,
)
from .pde import (
    CoefficientField,
    EllipticProblem,
    comparison_certificate,
    linf_bound,
    solve_elliptic,
    symmetrized_solution,
)
from .rearrangement import (
    GridFunction,
    decreasing_rearrangement,
    distribution_function,
    hardy_check,
    poincare_bound,
    polya_szego_gap,
)
from .specfun import gauss_cdf, gauss_cdf_inv, gauss_pdf, gauss_tail, gauss_tail_inv
from .spectral import SigmaProfile, WeightedNeumannProblem, kappa1, stability_report, tau_sup
from .transport import (
    GridSpec,
    TransportMap,
    build_map,
    certify_lemma1,
    identity_residual,
    potential_from_map,
    transport_constant,
)

__version__ = "0.1.0"
