"""Terrain recipes: the seafloor taxonomy spanned by the domain grid."""

from dataclasses import dataclass

from ..errors import ParameterError


@dataclass(frozen=True)
class Flat:
    kind: str = "flat"


@dataclass(frozen=True)
class Ripples:
    """Sand ripples: a sinusoidal height field plus small seeded jitter."""

    frequency: float         # cycles per pixel along the wave direction
    amplitude: float         # meters
    orientation_deg: float   # wave direction, 0 = along range axis
    kind: str = "ripples"

    def __post_init__(self):
        if self.frequency <= 0 or self.amplitude < 0:
            raise ParameterError("ripples need frequency > 0 and amplitude >= 0")


@dataclass(frozen=True)
class Rocky:
    """Band-limited random relief; roughness is the RMS height in meters."""

    roughness: float
    kind: str = "rocky"

    def __post_init__(self):
        if self.roughness < 0:
            raise ParameterError("roughness must be >= 0")


@dataclass(frozen=True)
class Cluttered:
    """Small scatterers over a gently rocky bed; density is items per 100 m^2."""

    density: float
    kind: str = "cluttered"

    def __post_init__(self):
        if self.density < 0:
            raise ParameterError("density must be >= 0")


_KINDS = {"flat": Flat, "ripples": Ripples, "rocky": Rocky, "cluttered": Cluttered}


def recipe_to_json(recipe) -> dict:
    obj = {"kind": recipe.kind}
    for name in recipe.__dataclass_fields__:
        if name != "kind":
            obj[name] = getattr(recipe, name)
    return obj


def recipe_from_json(obj) -> object:
    kind = obj.get("kind")
    if kind not in _KINDS:
        raise ParameterError(f"unknown terrain recipe kind {kind!r}")
    params = {k: v for k, v in obj.items() if k != "kind"}
    return _KINDS[kind](**params)


def recipe_tag(recipe) -> str:
    """Canonical string used for seed derivation."""
    obj = recipe_to_json(recipe)
    return "|".join(f"{k}={obj[k]}" for k in sorted(obj))
