"""Data-selection strategies for online retraining and batch composition.

Mission-side strategies: sliding window, loss-proportional hard mining, and
similarity to the latest observed frame. Pre-training-side strategies: none,
random, similarity. A retraining batch combines both sides in equal frame
proportions (ten from each by default).
"""

from dataclasses import dataclass, field

import numpy as np

from .detector.augment import apply_augment, draw_augment_op
from .detector.patches import training_patches
from .distance import rank_by_similarity
from .errors import EmptyBatchError, ParameterError, StateError
from .seeding import derive_seed, rng_for

PRETRAIN_METHODS = ("none", "random", "similarity")
MISSION_METHODS = ("sliding_window", "hard_mining", "similarity")


@dataclass(frozen=True, order=True)
class FrameRef:
    """Identity of a frame in the selection pools."""

    domain_id: str
    index: int
    source: str = "mission"  # "pretrain" | "mission"


@dataclass
class FrameRecord:
    """Mining bookkeeping for one seen frame."""

    ref: FrameRef
    signature: object = None       # FeatureDistribution once computed
    latest_loss: float | None = None
    labeled: bool = False
    seen_at: int | None = None     # mission step at which the frame was labeled


@dataclass(frozen=True)
class HardMiningConfig:
    epsilon: float = 0.1
    sample_count: int = 10

    def __post_init__(self):
        if self.epsilon < 0:
            raise ParameterError("epsilon must be >= 0")


@dataclass(frozen=True)
class SelectionPolicy:
    """Which strategy runs on each side, and how many frames each contributes."""

    pretrain_method: str = "none"
    mission_method: str = "sliding_window"
    pretrain_count: int = 10
    mission_count: int = 10
    two_stage: bool = False
    pool_factor: int = 3

    def __post_init__(self):
        if self.pretrain_method not in PRETRAIN_METHODS:
            raise ParameterError(f"unknown pretrain method {self.pretrain_method!r}")
        if self.mission_method not in MISSION_METHODS:
            raise ParameterError(f"unknown mission method {self.mission_method!r}")
        if self.pretrain_count < 0 or self.mission_count < 0:
            raise ParameterError("selection counts must be >= 0")
        if self.pool_factor < 1:
            raise ParameterError("pool_factor must be >= 1")

    @property
    def label(self) -> str:
        tag = f"{self.pretrain_method}+{self.mission_method}"
        return tag + "+two_stage" if self.two_stage else tag

    @classmethod
    def from_string(cls, text: str, **kwargs) -> "SelectionPolicy":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ParameterError(
                "policy must be '<pretrain_method>,<mission_method>', e.g. 'similarity,hard_mining'"
            )
        return cls(pretrain_method=parts[0], mission_method=parts[1], **kwargs)


def select_sliding_window(mission_records, k: int = 10):
    """The k most recently labeled mission frames, oldest first."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    seen = [r for r in mission_records if r.labeled and r.seen_at is not None]
    seen.sort(key=lambda r: (r.seen_at, r.ref))
    return [r.ref for r in seen[-k:]]


def hard_mining_probabilities(records, epsilon: float) -> np.ndarray:
    """Loss-proportional selection probabilities.

    p_i = (L_i + eps * Lbar) / sum_j (L_j + eps * Lbar), with Lbar the mean of
    the recorded losses. Records without a loss yet are imputed Lbar so they
    stay selectable without dominating; with no losses at all the distribution
    is uniform.
    """
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    records = list(records)
    if not records:
        raise ParameterError("need at least one record")
    losses = [r.latest_loss for r in records]
    present = [l for l in losses if l is not None]
    n = len(records)
    if not present:
        return np.full(n, 1.0 / n)
    lbar = float(np.mean(present))
    filled = np.array([lbar if l is None else float(l) for l in losses])
    weights = filled + epsilon * lbar
    total = weights.sum()
    if total <= 0.0:
        return np.full(n, 1.0 / n)
    return weights / total


def select_hard_mining(records, k: int, epsilon: float, seed: int):
    """k seeded draws without replacement from the loss-proportional distribution."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    records = list(records)
    if k >= len(records):
        return [r.ref for r in records]
    probs = hard_mining_probabilities(records, epsilon)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(records), size=k, replace=False, p=probs)
    return [records[int(i)].ref for i in idx]


def select_similarity(query_signature, records, k: int):
    """The k records whose signatures are nearest the query frame's signature."""
    records = list(records)
    if any(r.signature is None for r in records):
        raise StateError("similarity selection requires signatures for all records")
    if not records:
        return []
    pool = [(r.ref, r.signature) for r in records]
    return rank_by_similarity(query_signature, pool, k)


def select_pretrain(method: str, pretrain_records, query_signature, k: int, seed: int):
    """Pre-training-side selection: none, seeded random, or similarity-based."""
    if method not in PRETRAIN_METHODS:
        raise ParameterError(f"unknown pretrain method {method!r}")
    if method == "none" or k == 0:
        return []
    records = list(pretrain_records)
    if not records:
        return []
    if method == "random":
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(records), size=min(k, len(records)), replace=False)
        return [records[int(i)].ref for i in idx]
    return select_similarity(query_signature, records, k)


def two_stage_select(records, query_signature, pool_factor: int, k: int,
                     epsilon: float, seed: int):
    """Similarity prefilter to pool_factor * k candidates, then hard mining."""
    if pool_factor < 1:
        raise ParameterError("pool_factor must be >= 1")
    records = list(records)
    if not records:
        return []
    m = min(len(records), pool_factor * k)
    stage1 = set(select_similarity(query_signature, records, m))
    subset = [r for r in records if r.ref in stage1]
    return select_hard_mining(subset, k, epsilon, seed)


def select_mission(policy: SelectionPolicy, mission_records, query_signature,
                   epsilon: float, seed: int):
    """Dispatch the policy's mission-side strategy."""
    k = policy.mission_count
    if k == 0 or not mission_records:
        return []
    if policy.two_stage:
        return two_stage_select(
            mission_records, query_signature, policy.pool_factor, k, epsilon, seed
        )
    if policy.mission_method == "sliding_window":
        return select_sliding_window(mission_records, k)
    if policy.mission_method == "hard_mining":
        return select_hard_mining(mission_records, k, epsilon, seed)
    return select_similarity(query_signature, mission_records, k)


@dataclass
class PatchProvenance:
    ref: FrameRef
    augmentation: str


@dataclass
class TrainingBatch:
    """Augmented patches with labels and per-patch provenance."""

    patches: np.ndarray  # (n, 64, 64) float32
    labels: np.ndarray   # (n,) int64, 0 = background
    provenance: list = field(default_factory=list)

    def provenance_frame_counts(self) -> dict:
        frames = {"pretrain": set(), "mission": set()}
        for prov in self.provenance:
            frames[prov.ref.source].add((prov.ref.domain_id, prov.ref.index))
        return {source: len(refs) for source, refs in frames.items()}

    def __len__(self):
        return len(self.patches)


def compose_batch(policy: SelectionPolicy, pretrain_selection, mission_selection,
                  loader, seed: int, pos_cap: int = 6, neg_per_frame: int = 6,
                  stride: int = 32) -> TrainingBatch:
    """Extract and augment training patches from the selected frames.

    loader maps a FrameRef to (pixels, annotations). Every patch receives one
    seeded augmentation; provenance records the source frame and the op.
    """
    refs = list(pretrain_selection) + list(mission_selection)
    if not refs:
        raise EmptyBatchError("both selections are empty; nothing to retrain on")
    all_patches, all_labels, provenance = [], [], []
    for ref in refs:
        pixels, annotations = loader(ref)
        rng = rng_for("batch-patches", seed, ref.domain_id, ref.index, ref.source)
        patches, labels = training_patches(
            pixels, annotations, rng, pos_cap=pos_cap, neg_count=neg_per_frame, stride=stride
        )
        for j in range(len(patches)):
            op = draw_augment_op(derive_seed("augment", seed, ref.domain_id, ref.index, j))
            all_patches.append(apply_augment(patches[j], op))
            provenance.append(PatchProvenance(ref=ref, augmentation=op))
        all_labels.append(labels)
    return TrainingBatch(
        patches=np.stack(all_patches).astype(np.float32, copy=False),
        labels=np.concatenate(all_labels),
        provenance=provenance,
    )
