"""Elastic time-series similarity measures.

Exact dynamic time warping and time warp edit distance as non-parametric
baselines, a trainable warped deep similarity (encoder network plus an
alignment-probability network over context pairs), and a 1-NN evaluation
harness.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    FormatError,
    PairBatch,
    ParseError,
    SyntheticSpec,
    TimeSeries,
    gen_synthetic,
    load_dataset,
    sample_pair_batch,
    save_dataset,
    split,
    znormalize,
    znormalize_dataset,
)
from .elastic import WarpingPath, dtw, dtw_path, dtw_via_indicator, euclidean, twed
from .evaluate import DistanceMatrix, distance_matrix, nn_classify, write_matrix_csv
from .nn.optim import DivergenceError
from .seeding import substream
from .warping import (
    EncoderConfig,
    LayerSpec,
    SimilarityScore,
    TrainResult,
    WarperConfig,
    classifier_predict,
    classifier_train,
    encode,
    encoder_config,
    load_model,
    pair_loss,
    pair_loss_gradient_check,
    save_model,
    siamese_similarity,
    train_similarity,
    warped_similarity,
    warper_config,
    warper_prob,
)

__all__ = [
    "Dataset",
    "DistanceMatrix",
    "DivergenceError",
    "EncoderConfig",
    "FormatError",
    "LayerSpec",
    "PairBatch",
    "ParseError",
    "SimilarityScore",
    "SyntheticSpec",
    "TimeSeries",
    "TrainResult",
    "WarperConfig",
    "WarpingPath",
    "classifier_predict",
    "classifier_train",
    "distance_matrix",
    "dtw",
    "dtw_path",
    "dtw_via_indicator",
    "encode",
    "encoder_config",
    "euclidean",
    "gen_synthetic",
    "load_dataset",
    "load_model",
    "nn_classify",
    "pair_loss",
    "pair_loss_gradient_check",
    "sample_pair_batch",
    "save_dataset",
    "save_model",
    "siamese_similarity",
    "split",
    "substream",
    "train_similarity",
    "twed",
    "warped_similarity",
    "warper_config",
    "warper_prob",
    "write_matrix_csv",
    "znormalize",
    "znormalize_dataset",
]
