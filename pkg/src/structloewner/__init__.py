"""Structured realizations from tangential transfer-function samples.

Given samples of a transfer function and a family of scalar functions
``h_1, ..., h_K``, build a small model ``C (sum_k h_k(s) A_k)^{-1} B`` that
interpolates the samples.  ``K = 2`` reduces to a Loewner pencil on
transformed data; ``K >= 3`` uses additional interpolation points or
derivative data.
"""

from .errors import *  # noqa: F401,F403
from .structure import (
    AffineStructure,
    BasisFunction,
    Kind,
    StructuredRealization,
    complex_from_json,
    complex_to_json,
    deriv_basis,
    eval_basis,
    eval_kernel,
    eval_transfer,
    eval_transfer_deriv,
    format_structure,
    parse_structure,
)
from .data import (
    Finding,
    GroupedData,
    InterpolationData,
    RealTransform,
    SampleGroup,
    check_compatibility,
    conjugate_closure_sort,
    pair_block_transform,
    partition_groups,
    real_transform,
    tangential_sample,
)
from .loewner import (
    STATE_SPACE,
    LoewnerPencil,
    build_loewner_pencil,
    k2_direct_matrices,
    k2_realization,
    loewner_realization,
    sylvester_residuals_k2,
    transform_data_k2,
)
from .solver import (
    AssembledSystem,
    Equation,
    PMatrixSet,
    assemble_system,
    choose_p_mimo,
    choose_p_siso,
    grouped_residuals,
    interpolation_residuals,
    rank_truncate,
    realize,
    solve_additional_points,
    solve_equations,
    solve_hermite,
)
from .projection import FullModel, ProjectionBases, project, projection_bases
from .models import (
    MODEL_NAMES,
    AnalyticOracle,
    acoustic_duct,
    beam_element_matrices,
    beam_model,
    build_named_model,
    delay_toeplitz_model,
    first_order,
    heated_rod_model,
    toy_delay,
)
from .harness import (
    BodeSamples,
    ErrorReport,
    ExperimentResult,
    FrequencyGrid,
    bode_grid,
    error_metrics,
    run_experiment,
)

__version__ = "0.1.0"
