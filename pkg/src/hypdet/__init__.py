"""Explicit numerics for closed hyperbolic surfaces.

The package covers five connected computations: realizing Fenchel-Nielsen
gluing data as matrix groups, enumerating length spectra, heat-trace
evaluation of the Laplacian determinant (with a zeta-product cross-route),
exact Weil-Petersson volume polynomials with their ratio and systole-moment
consequences, and a random-surface sampling harness tying them together.
"""

from .errors import (
    BudgetExceeded,
    DomainError,
    EllipticElement,
    FitUnstable,
    GapTooLargeToResolve,
    HypdetError,
    IncompleteSpectrum,
    InvalidDecomposition,
    MomentDivergesByTheorem,
    NoSpectralGapEstimate,
    NotHyperbolic,
)
from .fuchsian import (
    FenchelNielsen,
    MobiusMatrix,
    SurfaceGroup,
    build_surface_group,
    fn_from_json,
    fn_to_json,
    pants_generators,
    standard_pants_graph,
    trace_to_length,
)
from .report import CheckResult, canonical_json, write_json_atomic, write_text_atomic
from .sampler import (
    SampleRecord,
    SamplerConfig,
    ag_event_stats,
    histogram_csv,
    mc_experiment,
    moment_estimate,
    records_csv,
    run_sample,
    sample_surface,
    wilson_interval,
)
from .selberg import (
    DetReport,
    QuadratureParams,
    constant_E,
    gaussian_tail_identity,
    heat_trace,
    identity_term,
    lambda1_estimate,
    log_det,
    lower_bound_check,
    tail_bound,
    z0_product,
)
from .spectrum import (
    GeodesicEntry,
    LengthSpectrum,
    SearchParams,
    counting_check,
    enumerate_geodesics,
    load_spectrum,
    primitive_decompose,
    word_matrix,
    write_spectrum,
)
from .wpvol import (
    MomentResult,
    VolumePolynomial,
    divergence_probe,
    evaluate_volume,
    mirzakhani_volume,
    ratio_table,
    sinh_bound_check,
    systole_moment,
)

__version__ = "0.1.0"
