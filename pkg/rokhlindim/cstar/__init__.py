"""Matrix model of the crossed product and of its approximation maps"""
from rokhlindim.cstar.band import (  # noqa: F401
    BandOperator,
    CommutatorEstimate,
    CompressedOperator,
    DiagonalWeight,
    band_apply,
    commutator_sqrtD,
    compress_dense,
    compress_psi,
    dense_matrix,
    mu,
    regular_matrix,
)
from rokhlindim.cstar.maps import (  # noqa: F401
    CotlarReport,
    IdentityApproximation,
    InnerApproximation,
    PartitionApproximation,
    PositivityReport,
    cotlar_bound_check,
    order_zero_defect,
    orthogonal_test_pairs,
    phi_n,
    positivity_defect,
    psi_n,
    sigma,
    star_defect,
)
from rokhlindim.cstar.norms import NormEstimate, operator_norm  # noqa: F401
from rokhlindim.cstar.pipeline import (  # noqa: F401
    CpPipeline,
    PipelineReport,
    make_test_ops,
    pipeline_defect,
)
