"""Attribute space of the Button component.

Twelve attributes describe a button: three RGB colors, seven integer-valued
sizes (two of which carry a sentinel member), and two categorical choices.
This module defines the canonical attribute order, value domains, validation,
distances, perceivable-difference classification, and random sampling.

Attributes are either comparable (a numeric distance exists) or uncomparable
(any two distinct values are at distance one).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .colorspace import cie76

INF_RADIUS = math.inf


class DomainError(ValueError):
    """A value lies outside its attribute domain."""


class AttributeKind(str, enum.Enum):
    BORDER_COLOR = "border_color"
    BORDER_RADIUS = "border_radius"
    BORDER_WIDTH = "border_width"
    MAIN_COLOR = "main_color"
    PADDING = "padding"
    SHADOW = "shadow"
    TEXT_COLOR = "text_color"
    TEXT_FONT = "text_font"
    TEXT_GRAVITY = "text_gravity"
    TEXT_SIZE = "text_size"
    HEIGHT = "height"
    WIDTH = "width"


KINDS: tuple[AttributeKind, ...] = tuple(AttributeKind)

FONTS = ("thin", "light", "regular", "medium", "bolt")
GRAVITIES = ("top", "left", "center", "right", "bottom")

COLOR_KINDS = (
    AttributeKind.BORDER_COLOR,
    AttributeKind.MAIN_COLOR,
    AttributeKind.TEXT_COLOR,
)
UNCOMPARABLE_KINDS = (AttributeKind.TEXT_FONT, AttributeKind.TEXT_GRAVITY)
COMPARABLE_KINDS = tuple(k for k in KINDS if k not in UNCOMPARABLE_KINDS)

# Integer-valued kinds and their ordered value lists.  Sentinels are ordinary
# list members: 0 for text_size (no text) and infinity for border_radius
# (fully round ends).
_INT_VALUES: dict[AttributeKind, tuple] = {
    AttributeKind.BORDER_RADIUS: tuple(range(0, 21)) + (INF_RADIUS,),
    AttributeKind.BORDER_WIDTH: tuple(range(0, 13)),
    AttributeKind.PADDING: tuple(range(0, 44)),
    AttributeKind.SHADOW: tuple(range(0, 13)),
    AttributeKind.TEXT_SIZE: (0,) + tuple(range(10, 31)),
    AttributeKind.HEIGHT: tuple(range(20, 61)),
    AttributeKind.WIDTH: tuple(range(25, 276)),
}

_CATEGORICAL_VALUES: dict[AttributeKind, tuple[str, ...]] = {
    AttributeKind.TEXT_FONT: FONTS,
    AttributeKind.TEXT_GRAVITY: GRAVITIES,
}

# (same_max, similar_max): same iff eps <= same_max, similar iff
# same_max < eps <= similar_max, different otherwise.  Colors use CIE76
# delta-E units, everything else plain value difference.
_THRESHOLDS: dict[AttributeKind, tuple[float, float]] = {
    AttributeKind.BORDER_COLOR: (5.0, 10.0),
    AttributeKind.BORDER_RADIUS: (1.0, 3.0),
    AttributeKind.BORDER_WIDTH: (0.0, 1.0),
    AttributeKind.MAIN_COLOR: (5.0, 10.0),
    AttributeKind.PADDING: (1.0, 3.0),
    AttributeKind.SHADOW: (0.0, 2.0),
    AttributeKind.TEXT_COLOR: (5.0, 10.0),
    AttributeKind.TEXT_SIZE: (1.0, 2.0),
    AttributeKind.HEIGHT: (1.0, 3.0),
    AttributeKind.WIDTH: (2.0, 4.0),
}


class PerceivableClass(enum.IntEnum):
    """Three-way visual difference judgement, ordered same < similar < different."""

    SAME = 0
    SIMILAR = 1
    DIFFERENT = 2


def is_color_kind(kind: AttributeKind) -> bool:
    return kind in COLOR_KINDS


def is_comparable(kind: AttributeKind) -> bool:
    return kind not in UNCOMPARABLE_KINDS


def domain_values(kind: AttributeKind) -> tuple:
    """Ordered value list for enumerable (non-color) kinds."""
    if kind in _INT_VALUES:
        return _INT_VALUES[kind]
    if kind in _CATEGORICAL_VALUES:
        return _CATEGORICAL_VALUES[kind]
    raise DomainError(f"{kind.value} has no enumerable value list")


def _check_color(value) -> bool:
    if not isinstance(value, tuple) or len(value) != 3:
        return False
    return all(
        isinstance(c, int) and not isinstance(c, bool) and 0 <= c <= 255
        for c in value
    )


def in_domain(kind: AttributeKind, value) -> bool:
    if kind in COLOR_KINDS:
        return _check_color(value)
    if kind in _CATEGORICAL_VALUES:
        return value in _CATEGORICAL_VALUES[kind]
    if isinstance(value, bool):
        return False
    if value == INF_RADIUS:
        return kind is AttributeKind.BORDER_RADIUS
    return isinstance(value, int) and value in set(_INT_VALUES[kind])


def _require_in_domain(kind: AttributeKind, value) -> None:
    if not in_domain(kind, value):
        raise DomainError(f"{value!r} is not a valid {kind.value}")


@dataclass
class AttributeConfig:
    """One value per attribute; the unit the whole pipeline infers."""

    border_color: tuple[int, int, int]
    border_radius: int | float
    border_width: int
    main_color: tuple[int, int, int]
    padding: int
    shadow: int
    text_color: tuple[int, int, int]
    text_font: str
    text_gravity: str
    text_size: int
    height: int
    width: int

    def __post_init__(self):
        # Normalize color containers so configs parsed from JSON compare equal
        # to hand-built ones.  Out-of-domain values are reported by validate(),
        # not rejected here.
        for name in ("border_color", "main_color", "text_color"):
            v = getattr(self, name)
            if isinstance(v, list):
                object.__setattr__(self, name, tuple(int(c) for c in v))

    def get(self, kind: AttributeKind):
        return getattr(self, kind.value)

    def with_value(self, kind: AttributeKind, value) -> "AttributeConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals[kind.value] = value
        return AttributeConfig(**vals)

    def to_record(self) -> dict:
        rec = {}
        for kind in KINDS:
            v = self.get(kind)
            if kind in COLOR_KINDS:
                rec[kind.value] = [int(c) for c in v]
            elif kind is AttributeKind.BORDER_RADIUS and v == INF_RADIUS:
                rec[kind.value] = "inf"
            else:
                rec[kind.value] = v
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_record(cls, rec: dict) -> "AttributeConfig":
        expected = {k.value for k in KINDS}
        unknown = set(rec) - expected
        if unknown:
            raise ValueError(f"unknown attribute keys: {sorted(unknown)}")
        missing = expected - set(rec)
        if missing:
            raise ValueError(f"missing attribute keys: {sorted(missing)}")
        vals = {}
        for kind in KINDS:
            v = rec[kind.value]
            if kind in COLOR_KINDS:
                v = tuple(int(c) for c in v)
            elif kind is AttributeKind.BORDER_RADIUS and v == "inf":
                v = INF_RADIUS
            vals[kind.value] = v
        return cls(**vals)

    @classmethod
    def from_json(cls, line: str) -> "AttributeConfig":
        return cls.from_record(json.loads(line))


@dataclass(frozen=True)
class Violation:
    kind: AttributeKind
    value: object


def validate(config: AttributeConfig) -> list[Violation]:
    """Return every out-of-domain value with its kind (empty means valid)."""
    return [
        Violation(kind, config.get(kind))
        for kind in KINDS
        if not in_domain(kind, config.get(kind))
    ]


def distance(kind: AttributeKind, a, b) -> float:
    """Distance between two values of one attribute.

    Numeric kinds use the absolute value difference (the infinite-radius
    sentinel is at infinite distance from every finite radius), colors use the
    CIE76 delta-E, and uncomparable kinds are 0 when equal, else 1.
    """
    _require_in_domain(kind, a)
    _require_in_domain(kind, b)
    if kind in UNCOMPARABLE_KINDS:
        return 0.0 if a == b else 1.0
    if kind in COLOR_KINDS:
        return cie76(a, b)
    if a == b:
        return 0.0
    if a == INF_RADIUS or b == INF_RADIUS:
        return math.inf
    return float(abs(a - b))


def perceivable_class(kind: AttributeKind, a, b) -> PerceivableClass:
    """Classify how visible the difference between two values is."""
    eps = distance(kind, a, b)
    if kind in UNCOMPARABLE_KINDS:
        return PerceivableClass.SAME if eps == 0.0 else PerceivableClass.DIFFERENT
    same_max, similar_max = _THRESHOLDS[kind]
    if eps <= same_max:
        return PerceivableClass.SAME
    if eps <= similar_max:
        return PerceivableClass.SIMILAR
    return PerceivableClass.DIFFERENT


def sample_value(kind: AttributeKind, rng: np.random.Generator, schema=None):
    """Draw one value uniformly from the kind's domain.

    `schema` optionally maps kinds to restricted value pools (used by the
    small-canvas profile, where e.g. full-range widths would not fit).
    """
    if schema is not None and kind in schema:
        pool = schema[kind]
        return pool[int(rng.integers(len(pool)))]
    if kind in COLOR_KINDS:
        return tuple(int(c) for c in rng.integers(0, 256, size=3))
    values = domain_values(kind)
    return values[int(rng.integers(len(values)))]


def sample_config(
    rng: np.random.Generator,
    resample_kinds=None,
    previous: AttributeConfig | None = None,
    schema=None,
) -> AttributeConfig:
    """Sample a configuration, optionally re-drawing only a subset of kinds.

    Kinds outside `resample_kinds` are copied from `previous`, which is how
    consecutive dataset samples stay correlated.
    """
    kinds = set(KINDS) if resample_kinds is None else set(resample_kinds)
    if kinds != set(KINDS) and previous is None:
        raise ValueError("previous config required when resampling a subset")
    vals = {}
    for kind in KINDS:  # canonical order keeps rng consumption reproducible
        if kind in kinds:
            vals[kind.value] = sample_value(kind, rng, schema)
        else:
            vals[kind.value] = previous.get(kind)
    return AttributeConfig(**vals)
