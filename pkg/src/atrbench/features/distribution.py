"""Per-dimension binned distributions summarizing a frame's texture."""

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ParameterError, StateError, StorageError
from .autoencoder import LATENT_DIM, AutoencoderModel, encode_batch
from .snippets import SNIPPET_SIZE, sample_snippets


@dataclass(frozen=True)
class FeatureConfig:
    """Geometry of the signature pipeline. bin_ranges is fitted on pre-training data."""

    snippet_size: int = SNIPPET_SIZE
    snippets_per_frame: int = 32
    latent_dim: int = LATENT_DIM
    bins_per_dim: int = 16
    bin_ranges: np.ndarray | None = None  # (latent_dim, 2) low/high per dimension

    def __post_init__(self):
        if self.snippet_size != SNIPPET_SIZE:
            raise ParameterError(f"snippet_size is fixed at {SNIPPET_SIZE}")
        if self.latent_dim != LATENT_DIM:
            raise ParameterError(f"latent_dim is fixed at {LATENT_DIM}")
        if self.bins_per_dim < 2:
            raise ParameterError("need at least 2 bins per dimension")
        if self.snippets_per_frame < 1:
            raise ParameterError("need at least 1 snippet per frame")
        if self.bin_ranges is not None:
            ranges = np.asarray(self.bin_ranges, dtype=np.float64)
            if ranges.shape != (self.latent_dim, 2):
                raise ParameterError(f"bin_ranges must be ({self.latent_dim}, 2)")
            if not np.isfinite(ranges).all() or not (ranges[:, 0] < ranges[:, 1]).all():
                raise ParameterError("bin_ranges must be finite with low < high")
            object.__setattr__(self, "bin_ranges", ranges)

    @property
    def fitted(self) -> bool:
        return self.bin_ranges is not None

    @property
    def bin_widths(self) -> np.ndarray:
        if not self.fitted:
            raise StateError("bin ranges not fitted")
        return (self.bin_ranges[:, 1] - self.bin_ranges[:, 0]) / self.bins_per_dim

    @property
    def fingerprint(self) -> str:
        if not self.fitted:
            raise StateError("bin ranges not fitted")
        h = hashlib.blake2b(digest_size=8)
        h.update(f"{self.latent_dim}:{self.bins_per_dim}:".encode())
        h.update(np.ascontiguousarray(self.bin_ranges).tobytes())
        return h.hexdigest()

    def with_ranges(self, bin_ranges) -> "FeatureConfig":
        return replace(self, bin_ranges=bin_ranges)

    def to_json(self) -> dict:
        return {
            "snippet_size": self.snippet_size,
            "snippets_per_frame": self.snippets_per_frame,
            "latent_dim": self.latent_dim,
            "bins_per_dim": self.bins_per_dim,
            "bin_ranges": None if self.bin_ranges is None else self.bin_ranges.tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "FeatureConfig":
        ranges = obj.get("bin_ranges")
        return cls(
            snippet_size=obj.get("snippet_size", SNIPPET_SIZE),
            snippets_per_frame=obj.get("snippets_per_frame", 32),
            latent_dim=obj.get("latent_dim", LATENT_DIM),
            bins_per_dim=obj.get("bins_per_dim", 16),
            bin_ranges=None if ranges is None else np.asarray(ranges, dtype=np.float64),
        )


@dataclass(frozen=True)
class FeatureDistribution:
    """64 x B matrix of per-dimension histograms; every row sums to one."""

    hist: np.ndarray        # (latent_dim, bins) float64, row-stochastic
    bin_widths: np.ndarray  # (latent_dim,)
    fingerprint: str

    def __post_init__(self):
        hist = np.asarray(self.hist, dtype=np.float64)
        object.__setattr__(self, "hist", hist)
        object.__setattr__(self, "bin_widths", np.asarray(self.bin_widths, dtype=np.float64))
        if hist.ndim != 2:
            raise ParameterError("hist must be 2-D")
        if (hist < 0).any() or not np.allclose(hist.sum(axis=1), 1.0, atol=1e-9):
            raise ParameterError("every hist row must be a probability vector")


def fit_bin_ranges(feature_vectors: np.ndarray) -> np.ndarray:
    """Per-dimension (mean - 3*std, mean + 3*std); degenerate dims get value +/- 0.5."""
    vectors = np.asarray(feature_vectors, dtype=np.float64)
    if vectors.ndim != 2 or len(vectors) < 2:
        raise ParameterError("need at least 2 feature vectors to fit bin ranges")
    mean = vectors.mean(axis=0)
    std = vectors.std(axis=0)
    low = np.where(std > 0, mean - 3.0 * std, mean - 0.5)
    high = np.where(std > 0, mean + 3.0 * std, mean + 0.5)
    return np.stack([low, high], axis=1)


def histogram_features(vectors: np.ndarray, config: FeatureConfig) -> FeatureDistribution:
    """Bin (n, latent_dim) vectors per dimension, clamping outliers to the edge bins."""
    if not config.fitted:
        raise StateError("bin ranges not fitted; call fit_bin_ranges first")
    vectors = np.asarray(vectors, dtype=np.float64)
    n, dims = vectors.shape
    if dims != config.latent_dim:
        raise ParameterError(f"expected {config.latent_dim}-dim vectors, got {dims}")
    b = config.bins_per_dim
    low = config.bin_ranges[:, 0]
    widths = config.bin_widths
    idx = np.floor((vectors - low) / widths).astype(np.int64)
    np.clip(idx, 0, b - 1, out=idx)
    hist = np.zeros((dims, b), dtype=np.float64)
    cols = np.repeat(np.arange(dims)[None, :], n, axis=0)
    np.add.at(hist, (cols.ravel(), idx.ravel()), 1.0)
    hist /= n
    return FeatureDistribution(hist=hist, bin_widths=widths, fingerprint=config.fingerprint)


def build_distribution(model: AutoencoderModel, frame, config: FeatureConfig,
                       seed: int) -> FeatureDistribution:
    """Frame -> snippets -> latent vectors -> per-dimension histograms."""
    snippets = sample_snippets(frame, config.snippets_per_frame, seed, config.snippet_size)
    vectors = encode_batch(model, snippets)
    return histogram_features(vectors, config)


def save_signature(path, dist: FeatureDistribution):
    """Raw little-endian float64 dump of the histogram matrix."""
    try:
        with open(path, "wb") as fh:
            fh.write(np.ascontiguousarray(dist.hist, dtype="<f8").tobytes())
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def load_signature(path, config: FeatureConfig) -> FeatureDistribution:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    hist = np.frombuffer(raw, dtype="<f8").reshape(config.latent_dim, config.bins_per_dim)
    return FeatureDistribution(
        hist=hist.copy(), bin_widths=config.bin_widths, fingerprint=config.fingerprint
    )
