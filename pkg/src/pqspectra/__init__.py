"""Spectral decimation toolkit for the self-similar pq Laplacian on Z+."""

from .laplacian import (
    DIRICHLET,
    REFLECTING,
    DetailedBalanceError,
    InvariantMeasure,
    PqParams,
    SiteClass,
    SizeCapError,
    TridiagonalOperator,
    apply_operator,
    build_truncation,
    classify_site,
    detailed_balance_residuals,
    invariant_measure,
    row_coefficients,
    symmetrize,
)
from .decimation import (
    CubicMap,
    DecimationResidual,
    ExceptionalPointError,
    SchurBlocks,
    decimation_map,
    exceptional_set,
    preimage_intervals,
    schur_blocks,
    schur_weight,
    verify_decimation_identity,
)
from .julia import (
    BackwardOrbit,
    CubicRoots,
    FixedPoint,
    JuliaCover,
    PointClass,
    backward_orbit,
    classify_point,
    cubic_preimages,
    fixed_point_data,
    julia_cover,
)
from .eigenfunction import (
    DivergenceReport,
    EigenTrace,
    PowerTraceResiduals,
    extend_formal_eigenfunction,
    lift_eigenfunction,
    norm_divergence_report,
    trace_at_powers_of_three,
)
from .spectral import (
    ClosureReport,
    DimensionReport,
    GapRow,
    Lambda1Row,
    SpectrumApproximation,
    count_eigenvalues_in,
    decimation_closure_check,
    eigenvalues_by_index,
    gap_report,
    hausdorff_distance,
    lambda1_scaling,
    spectral_dimension,
    spectrum_approximation,
    tridiag_eigenvalues,
)

__version__ = "0.1.0"
