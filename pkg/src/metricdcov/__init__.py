"""Distance covariance and negative-type diagnostics for general metric spaces."""

from .centering import CenteredMatrix, SignedDiscreteMeasure, a_function, double_center, energy
from .dcov import (
    DcovResult,
    DegenerateMarginalError,
    build_necnegtype_mixture,
    dcor,
    dcov_definition_oracle,
    dcov_kernel6_oracle,
    dcov_samples,
    dcov_stats,
    dcov_tensor_oracle,
    dcov_trace,
    dcov_v,
    dvar,
)
from .inference import (
    ContingencyTable,
    TestResult,
    asymptotic_test,
    calibrate,
    categorical_dcov,
    chisq_mixture_sample,
    null_eigenvalues,
    pearson_chisq,
    permutation_test,
    uncorrelated_distances_demo,
)
from .metrics import (
    DistanceMatrix,
    MetricError,
    MetricSpec,
    SampleSet,
    check_metric_axioms,
    distance_matrix,
    eval_metric,
    power_transform,
    product_sum_metric,
)
from .negtype import (
    Embedding,
    NegTypeReport,
    NotNegativeTypeError,
    barycenter,
    embed_sample,
    negtype_check,
    search_negtype_violation,
    varx_identities_check,
)

__version__ = "0.1.0"

__all__ = [
    "CenteredMatrix",
    "ContingencyTable",
    "DcovResult",
    "DegenerateMarginalError",
    "DistanceMatrix",
    "Embedding",
    "MetricError",
    "MetricSpec",
    "NegTypeReport",
    "NotNegativeTypeError",
    "SampleSet",
    "SignedDiscreteMeasure",
    "TestResult",
    "a_function",
    "asymptotic_test",
    "barycenter",
    "build_necnegtype_mixture",
    "calibrate",
    "categorical_dcov",
    "check_metric_axioms",
    "chisq_mixture_sample",
    "dcor",
    "dcov_definition_oracle",
    "dcov_kernel6_oracle",
    "dcov_samples",
    "dcov_stats",
    "dcov_tensor_oracle",
    "dcov_trace",
    "dcov_v",
    "distance_matrix",
    "double_center",
    "dvar",
    "embed_sample",
    "energy",
    "eval_metric",
    "negtype_check",
    "null_eigenvalues",
    "pearson_chisq",
    "permutation_test",
    "power_transform",
    "product_sum_metric",
    "search_negtype_violation",
    "uncorrelated_distances_demo",
    "varx_identities_check",
]
