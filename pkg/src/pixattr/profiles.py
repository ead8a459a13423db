"""Built-in size profiles.

A profile fixes everything that must agree between data generation and the
networks consuming it: canvas geometry, the attribute pools that fit that
canvas, the network input size, and the architecture widths.  Two are
provided.  `desk` is small enough to train on a laptop CPU in minutes and is
what the automated checks run.  `full` is the reference scale with the wide
channel stack; at this size the same code needs hours, not minutes.
"""

import dataclasses

import numpy as np

from .dataset import DEFAULT_LABELS, JitterSpec
from .net.model import (
    NeuralModel,
    SiameseModel,
    classifier_spec,
    encoder_spec,
    predictor_spec,
)
from .predictor import kind_head
from .refine import DEFAULT_CLIP, policy_head
from .schema import INF_RADIUS, AttributeKind

K = AttributeKind

# Pools for the small canvas.  Dimensions are capped so every value fits an
# 80x40 canvas at any jittered position the generator can produce, and
# text_size starts at 10 because gravity has no visible effect without text.
DESK_SCHEMA = {
    K.WIDTH: tuple(range(36, 65)),
    K.HEIGHT: tuple(range(24, 33)),
    K.TEXT_SIZE: tuple(range(10, 15)),
    K.BORDER_WIDTH: tuple(range(0, 7)),
    K.PADDING: tuple(range(0, 5)),
    K.SHADOW: tuple(range(0, 7)),
    K.BORDER_RADIUS: tuple(range(0, 11)) + (INF_RADIUS,),
}


@dataclasses.dataclass(frozen=True)
class Profile:
    """Geometry plus architecture for one operating scale."""

    name: str
    canvas: tuple
    input_width: int
    input_height: int
    channels: tuple
    pools: tuple
    hidden: int
    embedding: int
    schema: dict | None
    jitter: JitterSpec
    labels: tuple = DEFAULT_LABELS
    background_mode: str = "white"
    train_samples: int = 2000
    eval_samples: int = 500
    delta_pairs: int = 1500
    default_epochs: int = 6
    # float32 halves training time on CPU; numeric unit tests build their own
    # float64 models directly.
    dtype: type = np.float32

    @property
    def input_shape(self) -> tuple:
        return (3, self.input_height, self.input_width)

    def predictor_model(self, kind: K, rng) -> NeuralModel:
        spec = predictor_spec(
            self.input_shape, list(self.channels), list(self.pools),
            kind_head(kind), hidden=self.hidden,
        )
        return NeuralModel(spec, rng, dtype=self.dtype)

    def policy_model(self, kind: K, rng, c: int = DEFAULT_CLIP) -> SiameseModel:
        enc = encoder_spec(
            self.input_shape, list(self.channels), list(self.pools),
            embedding=self.embedding,
        )
        cls = classifier_spec(self.embedding, policy_head(kind, c), hidden=self.hidden)
        return SiameseModel(enc, cls, rng, dtype=self.dtype)


# Pooling stops after four stages so the trunk keeps a 6x3 spatial map;
# collapsing further to 3x1 measurably hurts the pixel-scale attributes
# (border width most of all).
DESK = Profile(
    name="desk",
    canvas=(80, 40),
    input_width=96,
    input_height=48,
    channels=(8, 8, 16, 16, 32, 32),
    pools=(1, 1, 1, 1, 0, 0),
    hidden=256,
    embedding=256,
    schema=DESK_SCHEMA,
    jitter=JitterSpec(mode="tr2", max_dx=5, max_dy=3),
)

FULL = Profile(
    name="full",
    canvas=(330, 150),
    input_width=330,
    input_height=150,
    channels=(32, 32, 64, 64, 128, 128),
    pools=(1, 1, 1, 1, 1, 0),
    hidden=256,
    embedding=256,
    schema=None,
    jitter=JitterSpec(mode="tr2"),
    train_samples=20000,
    eval_samples=2000,
    delta_pairs=15000,
    default_epochs=40,
)

PROFILES = {p.name: p for p in (DESK, FULL)}


def get_profile(name: str) -> Profile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(
            f"unknown profile {name!r}; available: {sorted(PROFILES)}"
        ) from None
