"""Textural signatures: snippet sampling, autoencoder embedding, binned distributions."""

from .autoencoder import (
    AutoencoderModel,
    encode,
    encode_batch,
    init_autoencoder,
    load_autoencoder,
    reconstruction_mse,
    save_autoencoder,
    train_autoencoder,
)
from .distribution import (
    FeatureConfig,
    FeatureDistribution,
    build_distribution,
    fit_bin_ranges,
    histogram_features,
    load_signature,
    save_signature,
)
from .snippets import sample_snippets

__all__ = [
    "AutoencoderModel",
    "FeatureConfig",
    "FeatureDistribution",
    "build_distribution",
    "encode",
    "encode_batch",
    "fit_bin_ranges",
    "histogram_features",
    "init_autoencoder",
    "load_autoencoder",
    "load_signature",
    "reconstruction_mse",
    "sample_snippets",
    "save_autoencoder",
    "save_signature",
    "train_autoencoder",
]
