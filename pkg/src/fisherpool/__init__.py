"""Fisher vector and sparse Fisher vector encoding over Gaussian mixtures,
with generalized max pooling and a desk-scale evaluation pipeline."""

from .analysis import (ComplexityEstimate, SimilarityReport, TimingReport,
                       bench_encode, compare_encoders, complexity_predict,
                       pearson_r, predicted_speedup, similarity_correspondence)
from .classify import (LinearSvm, accuracy, average_precision, evaluate,
                       mean_average_precision)
from .encode import (BagOfWordsEncoder, FisherVectorEncoder,
                     SparseFisherVectorEncoder, l2_normalize, power_normalize,
                     select_top_k, top_k_indices)
from .gmm import GaussianMixture, GaussianMixtureEM
from .pca import PCA
from .pooling import (gmp_dual, gmp_primal, patch_kernel, sfv_weights,
                      sfv_weights_limit, validate_kernel, weighted_pool)

__version__ = "0.1.0"

__all__ = [
    "BagOfWordsEncoder",
    "ComplexityEstimate",
    "FisherVectorEncoder",
    "GaussianMixture",
    "GaussianMixtureEM",
    "LinearSvm",
    "PCA",
    "SimilarityReport",
    "SparseFisherVectorEncoder",
    "TimingReport",
    "accuracy",
    "average_precision",
    "bench_encode",
    "compare_encoders",
    "complexity_predict",
    "evaluate",
    "gmp_dual",
    "gmp_primal",
    "l2_normalize",
    "mean_average_precision",
    "patch_kernel",
    "pearson_r",
    "power_normalize",
    "predicted_speedup",
    "select_top_k",
    "sfv_weights",
    "sfv_weights_limit",
    "similarity_correspondence",
    "top_k_indices",
    "validate_kernel",
    "weighted_pool",
]
