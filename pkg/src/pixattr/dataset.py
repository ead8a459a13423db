"""Synthetic corpora: rendered buttons with known attributes, and image pairs
labelled with their clipped attribute differences.

Two dataset families are produced here.  Prediction samples pair one rendered
image with the exact configuration that produced it.  Delta samples pair two
images rendered under one shared context and record, per attribute, the signed
difference of their values clipped to [-c, c] (binary equal/unequal for the
kinds without an ordering).  Both generators are deterministic given a seed;
rendering work is keyed by sample index so it could be farmed out in parallel
without changing the output.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import pathlib

import numpy as np

from .image import Image, read_image, write_image
from .render import GeometryError, RenderContext, render
from .schema import (
    KINDS,
    AttributeConfig,
    AttributeKind,
    is_color_kind,
    is_comparable,
    sample_config,
)

DEFAULT_CLIP = 5
DEFAULT_LABELS = ("OK", "GO", "ON", "UP", "NO", "ADD", "RUN", "SET", "NEW", "TOP")
MANIFEST_NAME = "manifest.jsonl"
FORMAT_TAG = "pixattr-dataset-v1"


class DatasetError(Exception):
    """Raised for generation misuse and for corrupt or inconsistent corpora."""


def _clip_diff(a, b, c: int) -> int:
    if a == b:
        return 0
    d = a - b  # infinite radius saturates the clip on its own
    if d > c:
        return c
    if d < -c:
        return -c
    return int(d)


@dataclasses.dataclass
class DeltaVector:
    """Per-attribute difference labels for an image pair.

    Comparable scalar kinds map to one integer in [-c, c]; color kinds map to
    one clipped integer per channel; the unordered kinds (font, gravity) map
    to 0 for equal and 1 for unequal.
    """

    entries: dict
    c: int = DEFAULT_CLIP

    def __post_init__(self):
        if self.c < 1:
            raise ValueError("clip bound must be >= 1")
        if set(self.entries) != set(KINDS):
            raise ValueError("delta vector must cover every attribute kind")
        for kind, value in self.entries.items():
            if is_color_kind(kind):
                ok = (
                    isinstance(value, tuple)
                    and len(value) == 3
                    and all(isinstance(v, int) and abs(v) <= self.c for v in value)
                )
            elif is_comparable(kind):
                ok = isinstance(value, int) and abs(value) <= self.c
            else:
                ok = value in (0, 1)
            if not ok:
                raise ValueError(f"bad delta entry for {kind.value}: {value!r}")

    @classmethod
    def from_configs(cls, a: AttributeConfig, b: AttributeConfig, c: int = DEFAULT_CLIP):
        """Label the pair (a, b) with clip(a - b) per attribute."""
        entries = {}
        for kind in KINDS:
            va, vb = a.get(kind), b.get(kind)
            if is_color_kind(kind):
                entries[kind] = tuple(_clip_diff(x, y, c) for x, y in zip(va, vb))
            elif is_comparable(kind):
                entries[kind] = _clip_diff(va, vb, c)
            else:
                entries[kind] = 0 if va == vb else 1
        return cls(entries, c)

    def negate(self) -> "DeltaVector":
        """Labels of the swapped pair: comparable entries flip sign, flags stay."""
        entries = {}
        for kind, value in self.entries.items():
            if is_color_kind(kind):
                entries[kind] = tuple(-v for v in value)
            elif is_comparable(kind):
                entries[kind] = -value
            else:
                entries[kind] = value
        return DeltaVector(entries, self.c)

    def get(self, kind: AttributeKind):
        return self.entries[kind]

    def to_record(self) -> dict:
        out = {"c": self.c, "entries": {}}
        for kind, value in self.entries.items():
            out["entries"][kind.value] = list(value) if is_color_kind(kind) else value
        return out

    @classmethod
    def from_record(cls, rec: dict) -> "DeltaVector":
        entries = {}
        for name, value in rec["entries"].items():
            kind = AttributeKind(name)
            entries[kind] = tuple(int(v) for v in value) if is_color_kind(kind) else int(value)
        return cls(entries, int(rec["c"]))


@dataclasses.dataclass
class PredictionSample:
    image: Image
    label: AttributeConfig
    ctx: RenderContext


@dataclasses.dataclass
class DeltaSample:
    """Image pair plus difference labels.

    Synthetic pairs share one context; pairs collected from refinement runs
    keep the target's context on side a and the candidate's on side b.
    """

    image_a: Image
    image_b: Image
    labels: DeltaVector
    cfg_a: AttributeConfig
    cfg_b: AttributeConfig
    ctx_a: RenderContext
    ctx_b: RenderContext


@dataclasses.dataclass(frozen=True)
class JitterSpec:
    """How a component is placed on the canvas.

    center  exact canvas center.
    tr1     uniform position keeping `margin` pixels from every edge (the
            margin shrinks when the component is too large for it).
    tr2     canvas center plus uniform offsets in [-max_dx, max_dx] and
            [-max_dy, max_dy], clamped so the component stays on canvas.
    """

    mode: str = "center"
    margin: int = 20
    max_dx: int = 13
    max_dy: int = 19

    def __post_init__(self):
        if self.mode not in ("center", "tr1", "tr2"):
            raise ValueError(f"unknown jitter mode {self.mode!r}")


def place_component(width, height, jitter: JitterSpec, canvas_w, canvas_h, rng):
    """Top-left position for a width x height component under the jitter rule."""
    if width > canvas_w or height > canvas_h:
        raise GeometryError(
            f"{width}x{height} component cannot fit a {canvas_w}x{canvas_h} canvas"
        )
    cx = (canvas_w - width) // 2
    cy = (canvas_h - height) // 2
    if jitter.mode == "center":
        return cx, cy
    if jitter.mode == "tr1":
        mx = max(0, min(jitter.margin, (canvas_w - width) // 2))
        my = max(0, min(jitter.margin, (canvas_h - height) // 2))
        x = int(rng.integers(mx, canvas_w - width - mx + 1))
        y = int(rng.integers(my, canvas_h - height - my + 1))
        return x, y
    x = cx + int(rng.integers(-jitter.max_dx, jitter.max_dx + 1))
    y = cy + int(rng.integers(-jitter.max_dy, jitter.max_dy + 1))
    return min(max(x, 0), canvas_w - width), min(max(y, 0), canvas_h - height)


def _draw_background(mode: str, rng, screenshots):
    if mode == "white":
        return "white"
    if mode == "rand":
        return tuple(int(v) for v in rng.integers(0, 256, size=3))
    if mode == "screenshot":
        return screenshots[int(rng.integers(len(screenshots)))]
    raise ValueError(f"unknown background mode {mode!r}")


def gen_prediction_dataset(
    n: int,
    schema=None,
    jitter: JitterSpec = JitterSpec(),
    background_mode: str = "white",
    subset_size: int = 3,
    seed: int = 0,
    canvas=(330, 150),
    labels=DEFAULT_LABELS,
    screenshots=None,
) -> list[PredictionSample]:
    """Rendered buttons with ground-truth configurations.

    Consecutive configurations stay correlated: each sample redraws a uniform
    subset of `subset_size` attributes from its predecessor and keeps the
    rest, so the corpus is dense in near-duplicates.  subset_size=12 gives
    independent draws.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if not 1 <= subset_size <= len(KINDS):
        raise ValueError("subset_size must be in [1, 12]")
    if background_mode == "screenshot" and not screenshots:
        raise DatasetError("screenshot background mode needs a non-empty pool")
    canvas_w, canvas_h = canvas
    chain_rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    samples = []
    prev = None
    for i in range(n):
        if prev is None:
            cfg = sample_config(chain_rng, schema=schema)
        else:
            picked = chain_rng.choice(len(KINDS), size=subset_size, replace=False)
            kinds = tuple(KINDS[j] for j in sorted(int(p) for p in picked))
            cfg = sample_config(chain_rng, resample_kinds=kinds, previous=prev, schema=schema)
        ctx_rng = np.random.default_rng(np.random.SeedSequence([seed, 1, i]))
        x, y = place_component(cfg.width, cfg.height, jitter, canvas_w, canvas_h, ctx_rng)
        background = _draw_background(background_mode, ctx_rng, screenshots)
        text = labels[int(ctx_rng.integers(len(labels)))]
        ctx = RenderContext(canvas_w, canvas_h, x, y, background=background, label=text)
        samples.append(PredictionSample(render(cfg, ctx), cfg, ctx))
        prev = cfg
    return samples


def gen_delta_dataset(
    m: int,
    schema=None,
    c: int = DEFAULT_CLIP,
    seed: int = 0,
    jitter: JitterSpec = JitterSpec(),
    canvas=(330, 150),
    labels=DEFAULT_LABELS,
    local_fraction: float = 0.5,
    local_subset: int = 3,
    background_modes=("white", "rand"),
) -> list[DeltaSample]:
    """Image pairs with clipped per-attribute difference labels.

    A `local_fraction` share of pairs differ only in a small resampled subset
    of attributes; the rest are independent draws.  The mixture matters: the
    comparison policy must stay accurate near its goal state, where almost
    everything already matches, not just between arbitrary buttons.
    """
    if m < 1:
        raise ValueError("need m >= 1")
    if c < 1:
        raise ValueError("need c >= 1")
    canvas_w, canvas_h = canvas
    samples = []
    for i in range(m):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 2, i]))
        cfg_a = sample_config(rng, schema=schema)
        if rng.random() < local_fraction:
            picked = rng.choice(len(KINDS), size=local_subset, replace=False)
            kinds = tuple(KINDS[j] for j in sorted(int(p) for p in picked))
            cfg_b = sample_config(rng, resample_kinds=kinds, previous=cfg_a, schema=schema)
        else:
            cfg_b = sample_config(rng, schema=schema)
        mode = background_modes[int(rng.integers(len(background_modes)))]
        background = _draw_background(mode, rng, None)
        # one shared placement large enough for both sides
        x, y = place_component(
            max(cfg_a.width, cfg_b.width),
            max(cfg_a.height, cfg_b.height),
            jitter,
            canvas_w,
            canvas_h,
            rng,
        )
        text = labels[int(rng.integers(len(labels)))]
        ctx = RenderContext(canvas_w, canvas_h, x, y, background=background, label=text)
        samples.append(
            DeltaSample(
                image_a=render(cfg_a, ctx),
                image_b=render(cfg_b, ctx),
                labels=DeltaVector.from_configs(cfg_a, cfg_b, c),
                cfg_a=cfg_a,
                cfg_b=cfg_b,
                ctx_a=ctx,
                ctx_b=ctx,
            )
        )
    return samples


def dagger_augment(
    policy_models,
    base_dataset: list[DeltaSample],
    rounds: int = 2,
    per_round: int | None = None,
    seed: int = 0,
    refine_spec=None,
) -> list[DeltaSample]:
    """Grow a delta corpus with the states an actual refinement run visits.

    For each picked base pair the comparison policy refines cfg_b toward the
    target image_a; every configuration the loop passes through becomes a new
    training pair (target image, candidate render) labelled with the true
    clipped difference.  This aligns the training distribution with what the
    policy sees when deployed, where candidates are self-rendered on a plain
    white background rather than drawn from the synthetic pair generator.
    """
    out = list(base_dataset)
    if rounds == 0:
        return out
    if not base_dataset:
        raise DatasetError("need a non-empty base corpus")
    from .refine import collect_states  # deferred: refine builds on this module

    c = base_dataset[0].labels.c
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    if per_round is None:
        per_round = len(base_dataset)
    for _ in range(rounds):
        picked = rng.choice(
            len(base_dataset), size=per_round, replace=per_round > len(base_dataset)
        )
        for i in picked:
            base = base_dataset[int(i)]
            traj_seed = int(rng.integers(2**31))
            visited = collect_states(
                policy_models,
                base.image_a,
                base.ctx_a,
                base.cfg_b,
                spec=refine_spec,
                seed=traj_seed,
                target_config=base.cfg_a,
            )
            white_ctx = dataclasses.replace(base.ctx_a, background="white")
            for cfg in visited:
                out.append(
                    DeltaSample(
                        image_a=base.image_a,
                        image_b=render(cfg, white_ctx),
                        labels=DeltaVector.from_configs(base.cfg_a, cfg, c),
                        cfg_a=base.cfg_a,
                        cfg_b=cfg,
                        ctx_a=base.ctx_a,
                        ctx_b=white_ctx,
                    )
                )
    return out


def _sha256_file(path: pathlib.Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _ctx_to_record(ctx: RenderContext, root: pathlib.Path, bg_cache: dict) -> dict:
    bg = ctx.background
    if isinstance(bg, Image):
        key = hashlib.sha256(bg.pixels.tobytes()).hexdigest()[:16]
        rel = f"backgrounds/{key}.ppm"
        if key not in bg_cache:
            target = root / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            write_image(bg, target)
            bg_cache[key] = rel
        bg_rec = {"file": rel}
    elif bg == "white":
        bg_rec = "white"
    else:
        bg_rec = [int(v) for v in bg]
    return {
        "canvas_width": ctx.canvas_width,
        "canvas_height": ctx.canvas_height,
        "x_pos": ctx.x_pos,
        "y_pos": ctx.y_pos,
        "background": bg_rec,
        "label": ctx.label,
    }


def _ctx_from_record(rec: dict, root: pathlib.Path) -> RenderContext:
    bg = rec["background"]
    if isinstance(bg, dict):
        bg = read_image(root / bg["file"])
    elif isinstance(bg, list):
        bg = tuple(int(v) for v in bg)
    return RenderContext(
        canvas_width=int(rec["canvas_width"]),
        canvas_height=int(rec["canvas_height"]),
        x_pos=int(rec["x_pos"]),
        y_pos=int(rec["y_pos"]),
        background=bg,
        label=rec["label"],
    )


def save_dataset(ds, directory) -> None:
    """Write a corpus as manifest.jsonl plus one PPM file per image.

    Every record carries the sha256 of its image files, so silent corruption
    is caught on load before any training happens.
    """
    if not ds:
        raise DatasetError("refusing to save an empty dataset")
    root = pathlib.Path(directory)
    (root / "images").mkdir(parents=True, exist_ok=True)
    is_delta = isinstance(ds[0], DeltaSample)
    bg_cache: dict = {}
    lines = [
        json.dumps(
            {
                "format": FORMAT_TAG,
                "sample_kind": "delta" if is_delta else "prediction",
                "count": len(ds),
            }
        )
    ]
    for i, sample in enumerate(ds):
        if is_delta:
            rel_a, rel_b = f"images/{i:06d}_a.ppm", f"images/{i:06d}_b.ppm"
            write_image(sample.image_a, root / rel_a)
            write_image(sample.image_b, root / rel_b)
            rec = {
                "image_a": rel_a,
                "sha256_a": _sha256_file(root / rel_a),
                "image_b": rel_b,
                "sha256_b": _sha256_file(root / rel_b),
                "labels": sample.labels.to_record(),
                "cfg_a": sample.cfg_a.to_record(),
                "cfg_b": sample.cfg_b.to_record(),
                "ctx_a": _ctx_to_record(sample.ctx_a, root, bg_cache),
                "ctx_b": _ctx_to_record(sample.ctx_b, root, bg_cache),
            }
        else:
            rel = f"images/{i:06d}.ppm"
            write_image(sample.image, root / rel)
            rec = {
                "image": rel,
                "sha256": _sha256_file(root / rel),
                "label": sample.label.to_record(),
                "ctx": _ctx_to_record(sample.ctx, root, bg_cache),
            }
        lines.append(json.dumps(rec))
    (root / MANIFEST_NAME).write_text("\n".join(lines) + "\n")


def _read_checked(root: pathlib.Path, rel: str, sha: str) -> Image:
    path = root / rel
    try:
        data = path.read_bytes()
    except FileNotFoundError as exc:
        raise DatasetError(f"missing image file {rel}") from exc
    if hashlib.sha256(data).hexdigest() != sha:
        raise DatasetError(f"checksum mismatch for {rel}")
    return read_image(path)


def load_dataset(directory, verify_fraction: float = 0.05, verify_seed: int = 0):
    """Read a corpus back, checking checksums and (on a sample) re-rendering.

    `verify_fraction` of the samples are re-rendered from their stored labels
    and contexts and compared bit-exactly against the stored images; any
    disagreement means the corpus no longer matches its own metadata.
    """
    root = pathlib.Path(directory)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise DatasetError(f"no {MANIFEST_NAME} under {root}")
    try:
        lines = manifest.read_text().splitlines()
        records = [json.loads(line) for line in lines if line.strip()]
    except json.JSONDecodeError as exc:
        raise DatasetError("manifest is not valid JSONL") from exc
    if not records or records[0].get("format") != FORMAT_TAG:
        raise DatasetError("manifest header missing or from an unknown format")
    header, records = records[0], records[1:]
    if header["count"] != len(records):
        raise DatasetError("manifest record count disagrees with its header")
    is_delta = header["sample_kind"] == "delta"
    samples = []
    try:
        for rec in records:
            if is_delta:
                samples.append(
                    DeltaSample(
                        image_a=_read_checked(root, rec["image_a"], rec["sha256_a"]),
                        image_b=_read_checked(root, rec["image_b"], rec["sha256_b"]),
                        labels=DeltaVector.from_record(rec["labels"]),
                        cfg_a=AttributeConfig.from_record(rec["cfg_a"]),
                        cfg_b=AttributeConfig.from_record(rec["cfg_b"]),
                        ctx_a=_ctx_from_record(rec["ctx_a"], root),
                        ctx_b=_ctx_from_record(rec["ctx_b"], root),
                    )
                )
            else:
                samples.append(
                    PredictionSample(
                        image=_read_checked(root, rec["image"], rec["sha256"]),
                        label=AttributeConfig.from_record(rec["label"]),
                        ctx=_ctx_from_record(rec["ctx"], root),
                    )
                )
    except KeyError as exc:
        raise DatasetError(f"manifest record missing field {exc}") from exc
    if verify_fraction > 0:
        n_check = min(len(samples), math.ceil(verify_fraction * len(samples)))
        rng = np.random.default_rng(verify_seed)
        for i in rng.choice(len(samples), size=n_check, replace=False):
            s = samples[int(i)]
            if is_delta:
                ok = render(s.cfg_a, s.ctx_a) == s.image_a and render(s.cfg_b, s.ctx_b) == s.image_b
            else:
                ok = render(s.label, s.ctx) == s.image
            if not ok:
                raise DatasetError(f"sample {int(i)} does not re-render to its stored image")
    return samples
