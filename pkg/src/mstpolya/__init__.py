"""Exact limit laws for fringe statistics of random m-ary search trees via generalized Pólya urns."""

from .errors import (
    AssumptionError,
    CapExceededError,
    DimensionError,
    DomainError,
    MethodNotApplicable,
    NotNormalError,
    SingularLyapunovError,
    SpecError,
    UrnError,
    VerificationError,
)
from .ratlinalg import Poly, RatMatrix, char_poly, nullspace, numeric_eigen, rational_roots, solve_lyapunov
from .urn import (
    AsymptoticLaw,
    ReplacementOutcome,
    ReplacementRule,
    SpectralData,
    UrnSpec,
    asymptotic_law,
    asymptotics_dual_basis,
    asymptotics_integral,
    build_matrix_A,
    check_assumptions,
    classify_regime,
    compute_B,
    functional_law,
    spectral,
)
from .models import (
    ModelBundle,
    SmallTreeType,
    closed_forms,
    enumerate_types,
    lemma_root_check,
    leaves_gap_urn,
    node_urn,
    oneprotected_urn,
    phi,
    protected_urn,
    spectral_condition,
)

__version__ = "0.1.0"
