"""Numerical laboratory for Schrodinger operators with dynamically defined potentials."""
from .diophantine import AlphaRep, Classification, Convergent, badly_approx_classify, convergents, dist_to_int
from .dynsys import DynSystem, TorusPoint, skew_iterate, skew_step, rotation_step, torus_dist
from .potential import (
    FlattenedFunction,
    GordonCertificate,
    PeriodicApproximant,
    PotentialWindow,
    SampleFunction,
    WindowError,
    flatten_along_tube,
    gordon_certify,
    gordon_gap_verify,
    omega_f_tube_sample,
    periodic_approximant,
    sample_potential,
)
from .repetition import (
    PrpProbeReport,
    RepetitionCertificate,
    prp_probe,
    qk_divergence_check,
    rp_search,
    skewshift_mk_selection,
    theorem4_probe,
)
from .spectrum import (
    ConvergenceError,
    SpectrumReport,
    TridiagonalOperator,
    build_truncation,
    covariance_check,
    decay_diagnostic,
    eigenvalues_sturm,
    eigenvector_at,
    spectrum_report,
    sturm_count,
)
from .transfer import (
    cayley_bound_check,
    gordon_lower_bound_probe,
    op_norm,
    propagate,
    telescoping_bound_check,
    transfer_matrix,
)

__version__ = "0.1.0"
