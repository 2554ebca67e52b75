"""Geometric VLAD: orientation-aware aggregation of local descriptors for image retrieval."""

from .angle_model import AngleModel, angle_histogram, angle_to_point, assign_membership, learn_angle_membership
from .codebook import Codebook, adapt_codebook, assign_nn, train_codebook
from .descriptors import DescriptorSet, LocalDescriptor
from .encoder import (
    EncodedVector,
    encode_image,
    gvlad_encode,
    inter_zscore_normalize,
    intra_normalize,
    l2_normalize,
    vlad_encode,
)
from .retrieval import (
    DatasetIndex,
    GroundTruth,
    QueryTruth,
    RankingResult,
    average_precision,
    build_index,
    evaluate,
    mean_average_precision,
    query_knn,
)
from .whitening import WhiteningModel, apply_whitening, fit_whitening

__version__ = "0.1.0"
