"""Moment problems, CCR vacuum moments, deficiency indices and finite POVMs."""
from .errors import (
    ConditioningError,
    IncompleteFamilyError,
    InvalidDensityError,
    InvalidInputError,
    InvalidObservableError,
    MomentPovmError,
    NumericError,
    PositivityError,
    RankDeficiencyError,
    TruncationError,
    UnderdeterminedError,
)
from .measure_recon import (
    DiscreteMeasure,
    JacobiMatrix,
    gauss_quadrature,
    jacobi_from_moments,
    reconstruct_measure,
    verify_moment_solution,
)
from .moment_core import (
    DensitySpec,
    DeterminacyVerdict,
    MomentSequence,
    carleman_test,
    cramer_test,
    hamburger_existence,
    krein_test,
    q_power_density,
    stieltjes_existence,
)
from .operator_analysis import IntervalDomain, classify_extension, momentum_deficiency
from .povm import (
    CellGrid,
    ConsistentFamily,
    GridPOVM,
    NaimarkDilation,
    compress_povm,
    consistency_check,
    decompose_check,
    family_to_povm,
    halfline_momentum_measures,
    induced_family,
    naimark_dilate,
    povm_integral_operator,
    probe_closure,
    seminorm_polarization,
    validate_povm,
)
from .star_algebra import (
    NormalOrderedElement,
    deformed_moment_sequence,
    gaussian_q_moment_oracle,
    gns_matrix,
    parse_element,
    position_power,
)

__version__ = "0.1.0"
