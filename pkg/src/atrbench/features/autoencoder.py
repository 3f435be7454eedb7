"""Small linear autoencoder used to embed texture snippets.

One hidden linear layer each way (input -> latent, latent -> input), biases on
both. Gradient descent minimizes the summed squared reconstruction error per
snippet averaged over the batch; reported losses are per-element MSE so they
are comparable across snippet sizes.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..binio import read_blocks, write_blocks
from ..errors import DivergenceError, ParameterError
from .snippets import SNIPPET_SIZE

MAGIC = b"SAE1"

INPUT_DIM = SNIPPET_SIZE * SNIPPET_SIZE
LATENT_DIM = 64


@dataclass
class AutoencoderModel:
    w_enc: np.ndarray  # (input_dim, latent_dim)
    b_enc: np.ndarray  # (latent_dim,)
    w_dec: np.ndarray  # (latent_dim, input_dim)
    b_dec: np.ndarray  # (input_dim,)
    metadata: dict = field(default_factory=dict)

    @property
    def latent_dim(self) -> int:
        return self.w_enc.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w_enc.shape[0]

    def is_finite(self) -> bool:
        return all(
            np.isfinite(a).all() for a in (self.w_enc, self.b_enc, self.w_dec, self.b_dec)
        )


def init_autoencoder(seed: int, input_dim: int = INPUT_DIM, latent_dim: int = LATENT_DIM,
                     dtype=np.float32) -> AutoencoderModel:
    rng = np.random.default_rng(seed)
    scale = 0.01
    return AutoencoderModel(
        w_enc=(rng.standard_normal((input_dim, latent_dim)) * scale).astype(dtype),
        b_enc=np.zeros(latent_dim, dtype=dtype),
        w_dec=(rng.standard_normal((latent_dim, input_dim)) * scale).astype(dtype),
        b_dec=np.zeros(input_dim, dtype=dtype),
        metadata={"seed": int(seed), "epochs": 0},
    )


def _flatten(snippets: np.ndarray, input_dim: int) -> np.ndarray:
    flat = np.asarray(snippets, dtype=np.float32).reshape(len(snippets), -1)
    if flat.shape[1] != input_dim:
        raise ParameterError(
            f"snippets have {flat.shape[1]} pixels, model expects {input_dim}"
        )
    return flat


def reconstruction_mse(model: AutoencoderModel, snippets: np.ndarray) -> float:
    """Mean squared reconstruction error per pixel."""
    x = _flatten(snippets, model.input_dim)
    z = x @ model.w_enc + model.b_enc
    xh = z @ model.w_dec + model.b_dec
    return float(np.mean((xh - x) ** 2))


def _corpus_fingerprint(corpus: np.ndarray) -> str:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(corpus.shape).encode())
    sample = corpus[:: max(1, len(corpus) // 64)][:64]
    h.update(np.ascontiguousarray(sample, dtype=np.float32).tobytes())
    return h.hexdigest()


def train_autoencoder(snippet_corpus: np.ndarray, epochs: int, learning_rate: float,
                      seed: int, batch_size: int = 32,
                      latent_dim: int = LATENT_DIM) -> AutoencoderModel:
    """Train by mini-batch gradient descent; deterministic for a fixed seed.

    The held-out reconstruction curve (per-element MSE, evaluated before
    training and after each epoch) is stored in the model metadata.
    """
    corpus = np.asarray(snippet_corpus, dtype=np.float32)
    if corpus.ndim != 3 or len(corpus) == 0:
        raise ParameterError("corpus must be a nonempty (n, s, s) array")
    if epochs < 0 or learning_rate <= 0 or batch_size < 1:
        raise ParameterError("epochs must be >= 0, learning_rate and batch_size positive")

    input_dim = corpus.shape[1] * corpus.shape[2]
    # train in mean-centered space (conditioning); folded back into the biases below
    center = np.float32(corpus.mean())
    x_all = corpus.reshape(len(corpus), -1) - center
    model = init_autoencoder(seed, input_dim=input_dim, latent_dim=latent_dim)

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xAE]))
    n = len(x_all)
    heldout_count = min(64, max(1, n // 5))
    perm = rng.permutation(n)
    heldout_idx = perm[:heldout_count]
    train_idx = perm[heldout_count:] if n - heldout_count >= 1 else perm
    x_held = x_all[heldout_idx]

    w1, b1 = model.w_enc, model.b_enc
    w2, b2 = model.w_dec, model.b_dec

    def heldout_mse():
        z = x_held @ w1 + b1
        xh = z @ w2 + b2
        return float(np.mean((xh - x_held) ** 2))

    curve = [heldout_mse()]
    for epoch in range(epochs):
        order = rng.permutation(len(train_idx))
        for start in range(0, len(order), batch_size):
            idx = train_idx[order[start : start + batch_size]]
            x = x_all[idx]
            m = len(x)
            z = x @ w1 + b1
            xh = z @ w2 + b2
            err = xh - x
            batch_loss = float(np.mean(err**2))
            if not np.isfinite(batch_loss):
                raise DivergenceError(
                    f"autoencoder loss became non-finite at epoch {epoch}", step=epoch
                )
            dxh = (2.0 / m) * err
            dw2 = z.T @ dxh
            db2 = dxh.sum(axis=0)
            dz = dxh @ w2.T
            dw1 = x.T @ dz
            db1 = dz.sum(axis=0)
            w1 -= learning_rate * dw1
            b1 -= learning_rate * db1
            w2 -= learning_rate * dw2
            b2 -= learning_rate * db2
        curve.append(heldout_mse())

    # fold the centering into the biases so the model consumes raw [0, 1] patches:
    # (x - c) @ W1 + b1 == x @ W1 + (b1 - c * colsum(W1)), likewise +c on the decoder
    if epochs > 0:
        b1 -= center * w1.sum(axis=0)
        b2 += center

    model.metadata = {
        "seed": int(seed),
        "epochs": int(epochs),
        "learning_rate": float(learning_rate),
        "batch_size": int(batch_size),
        "center": float(center),
        "final_loss": curve[-1],
        "heldout_curve": curve,
        "data_fingerprint": _corpus_fingerprint(corpus),
    }
    return model


def encode(model: AutoencoderModel, patch: np.ndarray) -> np.ndarray:
    """Embed one snippet into the latent space."""
    patch = np.asarray(patch, dtype=np.float32)
    if patch.ndim != 2 or patch.shape[0] * patch.shape[1] != model.input_dim:
        raise ParameterError(f"patch shape {patch.shape} does not match the encoder")
    if patch.min() < -1e-6 or patch.max() > 1 + 1e-6:
        raise ParameterError("patch values must lie in [0, 1]")
    return patch.reshape(-1) @ model.w_enc + model.b_enc


def encode_batch(model: AutoencoderModel, snippets: np.ndarray) -> np.ndarray:
    """Embed (n, s, s) snippets into (n, latent_dim) feature vectors."""
    x = _flatten(snippets, model.input_dim)
    return x @ model.w_enc + model.b_enc


def save_autoencoder(model: AutoencoderModel, path, extra_meta: dict | None = None):
    meta = dict(model.metadata)
    if extra_meta:
        meta.update(extra_meta)
    write_blocks(path, MAGIC, [model.w_enc, model.b_enc, model.w_dec, model.b_dec], meta)


def load_autoencoder(path) -> AutoencoderModel:
    arrays, meta = read_blocks(path, MAGIC)
    w1, b1, w2, b2 = arrays
    return AutoencoderModel(w_enc=w1, b_enc=b1, w_dec=w2, b_dec=b2, metadata=meta)
