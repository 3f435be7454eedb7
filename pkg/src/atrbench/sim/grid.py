"""The domain grid: 8 noise levels x 20 complexity ranks.

The recipe ladder was ordered by the in-situ protocol (train and test a fresh
detector on the same domain, rank by mAP) and then frozen so the grid is
reproducible; rank_domain_complexity re-runs that protocol on demand.
"""

from dataclasses import dataclass, replace

from ..errors import ParameterError, StateError
from ..seeding import derive_seed, rng_for
from .recipes import Cluttered, Flat, Ripples, Rocky, recipe_from_json, recipe_to_json

GRID_NOISE_LEVELS = 8
GRID_COMPLEXITY_RANKS = 20
PRETRAIN_NOISE_LEVELS = 7  # lowest noise levels in the pre-training block
PRETRAIN_RANKS = 7         # lowest complexity ranks in the pre-training block


@dataclass(frozen=True)
class DomainSpec:
    """One cell of the noise x complexity grid."""

    domain_id: str
    noise_level: int
    recipe: object
    complexity_rank: int

    def __post_init__(self):
        if not 0 <= self.noise_level < GRID_NOISE_LEVELS:
            raise ParameterError(f"noise_level must be in [0, {GRID_NOISE_LEVELS - 1}]")
        if not 0 <= self.complexity_rank < GRID_COMPLEXITY_RANKS:
            raise ParameterError(
                f"complexity_rank must be in [0, {GRID_COMPLEXITY_RANKS - 1}]"
            )

    def to_json(self) -> dict:
        return {
            "domain_id": self.domain_id,
            "noise_level": self.noise_level,
            "recipe": recipe_to_json(self.recipe),
            "complexity_rank": self.complexity_rank,
        }

    @classmethod
    def from_json(cls, obj) -> "DomainSpec":
        return cls(
            domain_id=obj["domain_id"],
            noise_level=int(obj["noise_level"]),
            recipe=recipe_from_json(obj["recipe"]),
            complexity_rank=int(obj["complexity_rank"]),
        )


def recipe_ladder():
    """Canonical 20-recipe ladder, simple to hard: flat, ripples, rocky, clutter."""
    return [
        Flat(),
        Ripples(frequency=0.008, amplitude=0.10, orientation_deg=15.0),
        Ripples(frequency=0.012, amplitude=0.14, orientation_deg=0.0),
        Rocky(roughness=0.05),
        Ripples(frequency=0.016, amplitude=0.18, orientation_deg=30.0),
        Rocky(roughness=0.08),
        Ripples(frequency=0.020, amplitude=0.22, orientation_deg=60.0),
        Ripples(frequency=0.026, amplitude=0.28, orientation_deg=45.0),
        Ripples(frequency=0.032, amplitude=0.34, orientation_deg=75.0),
        Rocky(roughness=0.11),
        Rocky(roughness=0.14),
        Rocky(roughness=0.18),
        Rocky(roughness=0.23),
        Rocky(roughness=0.28),
        Cluttered(density=0.3),
        Cluttered(density=0.5),
        Cluttered(density=0.8),
        Cluttered(density=1.2),
        Cluttered(density=1.7),
        Cluttered(density=2.3),
    ]


def domain_id_for(noise_level: int, rank: int) -> str:
    return f"n{noise_level}c{rank:02d}"


def build_grid():
    """All 160 domains in canonical order (noise level, then complexity rank)."""
    ladder = recipe_ladder()
    grid = []
    for noise in range(GRID_NOISE_LEVELS):
        for rank, recipe in enumerate(ladder):
            grid.append(
                DomainSpec(
                    domain_id=domain_id_for(noise, rank),
                    noise_level=noise,
                    recipe=recipe,
                    complexity_rank=rank,
                )
            )
    return grid


def pretrain_block(grid):
    """The 49 low-noise, low-complexity domains used for offline pre-training."""
    ids = [
        d.domain_id
        for d in grid
        if d.noise_level < PRETRAIN_NOISE_LEVELS and d.complexity_rank < PRETRAIN_RANKS
    ]
    if len(ids) != PRETRAIN_NOISE_LEVELS * PRETRAIN_RANKS:
        raise StateError(f"pre-training block has {len(ids)} domains, expected 49")
    return sorted(ids)


def test_pool(grid, n: int, seed: int, exclude_pretrain: bool = True):
    """Seeded sample of test domains from outside the pre-training block."""
    block = set(pretrain_block(grid)) if exclude_pretrain else set()
    candidates = sorted(d.domain_id for d in grid if d.domain_id not in block)
    if n > len(candidates):
        raise ParameterError(f"asked for {n} test domains, only {len(candidates)} available")
    rng = rng_for("test-pool", seed)
    idx = rng.choice(len(candidates), size=n, replace=False)
    return sorted(candidates[int(i)] for i in idx)


@dataclass(frozen=True)
class RankProtocol:
    """In-situ complexity measurement: train and test on the same domain."""

    dataset_root: str
    train_fraction: float = 0.6
    epochs: int = 60
    batch_size: int = 128
    learning_rate: float = 0.05
    seed: int = 0
    stride: int = 32
    score_threshold: float = 0.5


def _in_situ_map(domain: DomainSpec, protocol: RankProtocol) -> float:
    """Train a fresh detector on a split of the domain and mAP the rest."""
    from ..detector import predict_frame
    from ..detector.fit import FitConfig, fit_patch_classifier
    from ..evaluation import compute_map
    from .dataset import DatasetStore

    store = DatasetStore(protocol.dataset_root)
    n = store.frame_count(domain.domain_id)
    if n < 2:
        raise StateError(f"dataset for {domain.domain_id} is missing or too small")
    n_train = max(1, int(round(protocol.train_fraction * n)))

    fit_config = FitConfig(
        epochs=protocol.epochs, batch_size=protocol.batch_size,
        learning_rate=protocol.learning_rate, stride=protocol.stride,
    )
    model, _ = fit_patch_classifier(
        (store.frame(domain.domain_id, i) for i in range(n_train)),
        derive_seed("in-situ", protocol.seed, domain.domain_id),
        fit_config,
    )

    dets, truths = [], []
    for i in range(n_train, n):
        frame = store.frame(domain.domain_id, i)
        dets.append(
            predict_frame(
                model, frame, score_threshold=protocol.score_threshold,
                stride=protocol.stride,
            )
        )
        truths.append(frame.annotations)
    return compute_map(dets, truths)


def rank_domain_complexity(domains, protocol: RankProtocol) -> dict:
    """Empirical complexity ranks per noise level: lower in-situ mAP means a
    higher rank; ties break by ascending domain id."""
    by_noise = {}
    for domain in domains:
        by_noise.setdefault(domain.noise_level, []).append(domain)
    ranks = {}
    for noise, group in sorted(by_noise.items()):
        scored = [(_in_situ_map(d, protocol), d.domain_id) for d in group]
        scored.sort()  # ascending mAP, ties by domain id
        n = len(scored)
        for position, (_, domain_id) in enumerate(scored):
            ranks[domain_id] = n - 1 - position
    return ranks


def apply_ranks(grid, ranks: dict):
    """Grid with complexity_rank replaced by the measured assignment."""
    return [
        replace(d, complexity_rank=ranks[d.domain_id]) if d.domain_id in ranks else d
        for d in grid
    ]
