"""Offline pretraining on the low-complexity block of the domain grid."""

import numpy as np

from ..errors import ParameterError, StateError
from ..features import build_distribution, encode_batch, fit_bin_ranges, sample_snippets
from ..features.distribution import FeatureConfig
from ..mining import FrameRecord, FrameRef
from ..seeding import derive_seed, rng_for
from ..sim.grid import pretrain_block
from .artifacts import PretrainArtifacts
from .config import PretrainConfig


def _collect_corpus(store, domain_ids, config: PretrainConfig, seed: int) -> np.ndarray:
    snippets = []
    for domain_id in domain_ids:
        for index in range(store.frame_count(domain_id)):
            frame = store.frame(domain_id, index)
            snippets.append(
                sample_snippets(
                    frame, config.ae_snippets_per_frame, derive_seed("ae-corpus", seed)
                )
            )
    corpus = np.concatenate(snippets).astype(np.float32)
    if len(corpus) > config.ae_corpus_cap:
        rng = rng_for("ae-corpus-cap", seed)
        keep = np.sort(rng.choice(len(corpus), size=config.ae_corpus_cap, replace=False))
        corpus = corpus[keep]
    return corpus


def _train_detector(store, domain_ids, config: PretrainConfig, seed: int):
    """Class-balanced patch-bank SGD over the pretraining block."""
    from ..detector.fit import FitConfig, fit_patch_classifier

    def frames():
        for domain_id in domain_ids:
            for index in range(store.frame_count(domain_id)):
                yield store.frame(domain_id, index)

    fit_config = FitConfig(
        epochs=config.det_epochs, batch_size=config.det_batch_size,
        learning_rate=config.det_learning_rate, pos_cap=config.det_pos_cap,
        neg_per_frame=config.det_neg_per_frame, stride=config.stride,
    )
    return fit_patch_classifier(frames(), derive_seed("det", seed), fit_config)


def pretrain(store, pretrain_domain_ids, epochs: int | None, seed: int,
             config: PretrainConfig | None = None) -> PretrainArtifacts:
    """Train the detector and the signature pipeline on the 49-domain block.

    epochs overrides the detector epoch budget when given; everything else
    comes from PretrainConfig.
    """
    config = config or PretrainConfig()
    if epochs is not None:
        if epochs < 1:
            raise ParameterError("epochs must be >= 1")
        config = PretrainConfig(**{**config.to_json(), "det_epochs": int(epochs)})

    expected = pretrain_block(store.grid())
    if sorted(pretrain_domain_ids) != expected:
        raise ParameterError(
            "pretrain domains must be exactly the low-noise, low-complexity block "
            f"({len(expected)} domains)"
        )
    missing = [d for d in expected if store.frame_count(d) == 0]
    if missing:
        raise StateError(f"datasets missing for pretrain domains: {missing[:5]}...")

    corpus = _collect_corpus(store, expected, config, seed)
    from ..features import train_autoencoder

    autoencoder = train_autoencoder(
        corpus, config.ae_epochs, config.ae_learning_rate,
        derive_seed("ae-train", seed), batch_size=config.ae_batch_size,
    )

    sample = corpus[: config.fit_sample_cap]
    feature_config = FeatureConfig().with_ranges(
        fit_bin_ranges(encode_batch(autoencoder, sample))
    )

    records = []
    for domain_id in expected:
        for index in range(store.frame_count(domain_id)):
            frame = store.frame(domain_id, index)
            sig = build_distribution(autoencoder, frame, feature_config, config.feature_seed)
            records.append(
                FrameRecord(
                    ref=FrameRef(domain_id, index, source="pretrain"),
                    signature=sig,
                    labeled=True,
                )
            )

    model, det_meta = _train_detector(store, expected, config, seed)
    return PretrainArtifacts(
        model=model,
        autoencoder=autoencoder,
        feature_config=feature_config,
        feature_seed=config.feature_seed,
        pretrain_records=records,
        meta={
            "pretrain_ids": expected,
            "seed": int(seed),
            "config": config.to_json(),
            **det_meta,
        },
    )
