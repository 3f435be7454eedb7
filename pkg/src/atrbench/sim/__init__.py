"""Procedural sidescan-sonar world: terrain, objects, noise, domains, missions."""

from .dataset import (
    DatasetStore,
    generate_domain_dataset,
    load_annotations,
    load_frame,
    read_grid,
    read_pgm16,
    write_grid,
    write_pgm16,
)
from .grid import (
    GRID_COMPLEXITY_RANKS,
    GRID_NOISE_LEVELS,
    DomainSpec,
    build_grid,
    pretrain_block,
    rank_domain_complexity,
    recipe_ladder,
    test_pool,
)
from .heightmap import generate_terrain_heightmap
from .mission import MissionManifest, generate_mission, load_mission, save_mission
from .recipes import Cluttered, Flat, Ripples, Rocky, recipe_from_json, recipe_to_json
from .render import BASE_LEVEL, NOISE_SIGMA_STEP, render_frame, speckle_sigma
from .scene import ObjectSpec, annotation_for, insert_objects

__all__ = [
    "BASE_LEVEL",
    "Cluttered",
    "DatasetStore",
    "DomainSpec",
    "Flat",
    "GRID_COMPLEXITY_RANKS",
    "GRID_NOISE_LEVELS",
    "MissionManifest",
    "NOISE_SIGMA_STEP",
    "ObjectSpec",
    "Ripples",
    "Rocky",
    "annotation_for",
    "build_grid",
    "generate_domain_dataset",
    "generate_mission",
    "generate_terrain_heightmap",
    "insert_objects",
    "load_annotations",
    "load_frame",
    "load_mission",
    "pretrain_block",
    "rank_domain_complexity",
    "read_grid",
    "read_pgm16",
    "recipe_from_json",
    "recipe_ladder",
    "recipe_to_json",
    "render_frame",
    "save_mission",
    "speckle_sigma",
    "test_pool",
    "write_grid",
    "write_pgm16",
]
