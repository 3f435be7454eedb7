"""Earth Mover's Distance between frame signatures and similarity ranking.

On a shared 1-D bin grid the Wasserstein-1 distance has a closed form:
bin_width * sum(|CDF_p - CDF_q|). No transport solver is needed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SignatureMismatchError
from .features.distribution import FeatureDistribution

_NORM_TOL = 1e-6


def emd_1d(p, q, bin_width: float) -> float:
    """Exact W1 distance between two histograms over identical bin geometry."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or p.shape != q.shape:
        raise ParameterError(f"histogram shapes differ: {p.shape} vs {q.shape}")
    if bin_width <= 0:
        raise ParameterError("bin_width must be positive")
    for name, vec in (("p", p), ("q", q)):
        if abs(vec.sum() - 1.0) > _NORM_TOL:
            raise ParameterError(f"{name} is not normalized (sum={vec.sum():.9f})")
        if (vec < -_NORM_TOL).any():
            raise ParameterError(f"{name} has negative mass")
    return float(bin_width * np.abs(np.cumsum(p - q)).sum())


@dataclass(frozen=True)
class FrameDistance:
    """Aggregate distance between two signatures: L1 norm of per-dimension EMDs."""

    value: float
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=np.float64))


def emd_components(hist_a: np.ndarray, hist_b: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Per-dimension closed-form W1 between two (D, B) histogram stacks."""
    diff = np.cumsum(hist_a - hist_b, axis=-1)
    return np.abs(diff).sum(axis=-1) * widths


def frame_distance(a: FeatureDistribution, b: FeatureDistribution) -> FrameDistance:
    """Compare two signatures dimension by dimension; symmetric in (a, b)."""
    if a.fingerprint != b.fingerprint:
        raise SignatureMismatchError(
            f"signatures built with different bin geometry: {a.fingerprint} vs {b.fingerprint}"
        )
    components = emd_components(a.hist, b.hist, a.bin_widths)
    return FrameDistance(value=float(components.sum()), components=components)


def batch_distances(query: FeatureDistribution, hist_stack: np.ndarray,
                    widths: np.ndarray) -> np.ndarray:
    """Distance from a query signature to each of a stacked (n, D, B) pool."""
    diff = np.cumsum(hist_stack - query.hist[None, :, :], axis=-1)
    return np.abs(diff).sum(axis=-1) @ widths


def rank_by_similarity(query: FeatureDistribution, pool, k: int):
    """Ids of the k nearest pool entries, ascending distance, ties by ascending id.

    pool is a sequence of (id, FeatureDistribution); ids must be mutually
    orderable so that ranking is deterministic and stable under permutation.
    """
    if not pool:
        raise ParameterError("pool must be nonempty")
    if k < 1:
        raise ParameterError("k must be >= 1")
    ids = [entry[0] for entry in pool]
    sigs = [entry[1] for entry in pool]
    for sig in sigs:
        if sig.fingerprint != query.fingerprint:
            raise SignatureMismatchError("pool signature geometry differs from query")
    stack = np.stack([sig.hist for sig in sigs])
    values = batch_distances(query, stack, query.bin_widths)
    order = sorted(range(len(ids)), key=lambda i: (values[i], ids[i]))
    return [ids[i] for i in order[: min(k, len(ids))]]
