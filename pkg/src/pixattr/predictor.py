"""Image-to-attribute inference: per-attribute networks, a shift ensemble,
and saliency-guided color snapping.

Each attribute gets its own small network.  At inference time the input is
padded to the network size, run under a handful of random translations whose
output distributions are averaged, and for color attributes the regressed
value is snapped to an actually-occurring pixel color picked with a saliency
mask.  Everything here is deterministic given the perturbation seed.
"""

from __future__ import annotations

import dataclasses
import json
import pathlib

import numpy as np

from .colorspace import cie76
from .image import Image, pad_image, shift_image
from .net.checkpoint import load_checkpoint, save_checkpoint
from .net.layers import GroupSoftmax, Softmax
from .net.model import model_dtype
from .schema import (
    KINDS,
    AttributeConfig,
    AttributeKind,
    domain_values,
    is_color_kind,
)


class PredictorError(Exception):
    """Inference-time misuse: bad input sizes, missing models, dead ensembles."""


@dataclasses.dataclass(frozen=True)
class PerturbationSpec:
    """Shift-ensemble settings: k forward passes under shifts in [-t, t]."""

    k: int = 5
    t: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("ensemble size must be >= 1")
        if self.t < 0:
            raise ValueError("shift bound must be >= 0")


def kind_head(kind: AttributeKind) -> tuple:
    """Network head for one attribute: regression for colors, classes otherwise."""
    if is_color_kind(kind):
        return ("regression", 3)
    return ("classification", len(domain_values(kind)))


def encode_label(kind: AttributeKind, value):
    """Training target for one attribute value."""
    if is_color_kind(kind):
        return np.asarray(value, dtype=np.float64) / 255.0
    return domain_values(kind).index(value)


def decode_output(kind: AttributeKind, out: np.ndarray):
    """(value, confidence, candidate values, probabilities) from a net output.

    Color regressions become a degenerate one-candidate distribution so the
    callers can treat every kind the same way.
    """
    if is_color_kind(kind):
        rgb = tuple(int(round(float(v) * 255)) for v in np.clip(out, 0.0, 1.0))
        return rgb, 1.0, [rgb], np.array([1.0])
    values = domain_values(kind)
    if out.shape != (len(values),):
        raise PredictorError(
            f"{kind.value} head produced {out.shape}, expected ({len(values)},)"
        )
    idx = int(np.argmax(out))
    return values[idx], float(out[idx]), list(values), np.asarray(out, dtype=np.float64)


def prediction_arrays(samples, kind: AttributeKind, input_w: int, input_h: int,
                      pad_mode="edge", dtype=np.float64):
    """Stack a prediction corpus into network inputs and per-kind targets."""
    x = np.stack(
        [pad_image(s.image, input_w, input_h, mode=pad_mode).to_float_chw(dtype)
         for s in samples]
    )
    if is_color_kind(kind):
        y = np.stack([encode_label(kind, s.label.get(kind)) for s in samples]).astype(dtype)
    else:
        y = np.array([encode_label(kind, s.label.get(kind)) for s in samples], dtype=np.int64)
    return x, y


def _box_fits(box, dx, dy, width, height) -> bool:
    x0, y0, x1, y1 = box
    return x0 + dx >= 0 and y0 + dy >= 0 and x1 + dx <= width and y1 + dy <= height


def ensemble_predict(model, image: Image, spec: PerturbationSpec = PerturbationSpec(),
                     content_box=None, pad_mode: str = "edge") -> np.ndarray:
    """Average the model outputs over k shifted copies of the image.

    The first pass is always unshifted.  When `content_box` (in source-image
    coordinates) is given, shifts that would push it off the canvas are
    dropped; if nothing survives the ensemble is dead and that is an error.
    """
    _, ih, iw = model.spec.input_shape
    if image.width > iw or image.height > ih:
        raise PredictorError(
            f"{image.width}x{image.height} image exceeds the {iw}x{ih} model input"
        )
    padded = pad_image(image, iw, ih, mode=pad_mode)
    if content_box is not None:
        left = (iw - image.width) // 2
        top = (ih - image.height) // 2
        x0, y0, x1, y1 = content_box
        content_box = (x0 + left, y0 + top, x1 + left, y1 + top)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))
    shifts = [(0, 0)]
    for _ in range(spec.k - 1):
        dx, dy = rng.integers(-spec.t, spec.t + 1, size=2)
        shifts.append((int(dx), int(dy)))
    dtype = model_dtype(model)
    outputs = []
    for dx, dy in shifts:
        if content_box is not None and not _box_fits(content_box, dx, dy, iw, ih):
            continue
        x = shift_image(padded, dx, dy).to_float_chw(dtype)[None]
        outputs.append(model.forward(x, train=False)[0])
    if not outputs:
        raise PredictorError("every ensemble perturbation pushed the content off canvas")
    return np.mean(outputs, axis=0)


def saliency_map(model, image: Image):
    """(per-pixel input sensitivity in [0, 1], degenerate flag).

    Backpropagates the winning pre-softmax logit (for regressions, the summed
    outputs) to the input, takes the absolute value, reduces channels by max,
    and min-max normalizes.  A map without any variation cannot be normalized
    and comes back as zeros with the flag set.
    """
    _, ih, iw = model.spec.input_shape
    padded = pad_image(image, iw, ih, mode="edge")
    x = padded.to_float_chw(model_dtype(model))[None]
    layers = model.layers
    body = layers[:-1] if isinstance(layers[-1], (Softmax, GroupSoftmax)) else layers
    h = x
    for layer in body:
        h = layer.forward(h, train=False)
    seed = np.zeros_like(h)
    last = layers[-1]
    if isinstance(last, Softmax):
        seed[0, int(np.argmax(h[0]))] = 1.0
    elif isinstance(last, GroupSoftmax):
        per_group = h.shape[1] // last.groups
        for g in range(last.groups):
            block = h[0, g * per_group : (g + 1) * per_group]
            seed[0, g * per_group + int(np.argmax(block))] = 1.0
    else:
        seed[:] = 1.0
    grad = seed
    for layer in reversed(body):
        grad = layer.backward(grad)
    model.zero_grads()
    sal = np.abs(grad[0]).max(axis=0)
    left = (iw - image.width) // 2
    top = (ih - image.height) // 2
    sal = sal[top : top + image.height, left : left + image.width]
    lo, hi = float(sal.min()), float(sal.max())
    if hi - lo <= 0.0:
        return np.zeros_like(sal), True
    return (sal - lo) / (hi - lo), False


def color_clip(predicted, image: Image, saliency: np.ndarray, threshold: float = 0.8,
               top_n: int = 5, mode: str = "saliency_top5"):
    """Snap a regressed color to a color that actually occurs in the image.

    saliency_top5 counts colors only where the saliency clears `threshold`,
    image_top5 counts over the whole image, image_all keeps every distinct
    color.  The candidate nearest to `predicted` (CIE76) wins; with no
    candidates the prediction passes through untouched.
    """
    if saliency.shape != (image.height, image.width):
        raise ValueError(
            f"saliency shape {saliency.shape} does not match image "
            f"{(image.height, image.width)}"
        )
    flat = image.pixels.reshape(-1, 3)
    if mode == "saliency_top5":
        pool = flat[saliency.reshape(-1) >= threshold]
        limit = top_n
    elif mode == "image_top5":
        pool, limit = flat, top_n
    elif mode == "image_all":
        pool, limit = flat, None
    else:
        raise ValueError(f"unknown color clip mode {mode!r}")
    if pool.size == 0:
        return tuple(int(v) for v in predicted)
    colors, counts = np.unique(pool, axis=0, return_counts=True)
    if limit is not None and len(colors) > limit:
        # most frequent first, lexicographic color as the deterministic tie-break
        order = np.lexsort((colors[:, 2], colors[:, 1], colors[:, 0], -counts))
        colors = colors[order[:limit]]
    pred = tuple(int(v) for v in predicted)
    distances = [cie76(pred, tuple(int(v) for v in c)) for c in colors]
    return tuple(int(v) for v in colors[int(np.argmin(distances))])


@dataclasses.dataclass
class KindPrediction:
    kind: AttributeKind
    value: object
    confidence: float
    values: list
    probs: np.ndarray


@dataclasses.dataclass
class PredictionResult:
    config: AttributeConfig
    predictions: dict
    failures: dict


def _fallback_value(kind: AttributeKind):
    if is_color_kind(kind):
        return (0, 0, 0)
    return domain_values(kind)[0]


@dataclasses.dataclass
class PredictorBundle:
    """One trained network per attribute plus shared preprocessing settings."""

    models: dict
    input_height: int
    input_width: int
    pad_mode: str = "edge"
    perturbation: PerturbationSpec = PerturbationSpec()
    clip_threshold: float = 0.8
    clip_top_n: int = 5
    clip_mode: str = "saliency_top5"

    def __post_init__(self):
        if set(self.models) != set(KINDS):
            missing = sorted(k.value for k in set(KINDS) - set(self.models))
            raise ValueError(f"bundle must cover every attribute; missing {missing}")
        expect = (3, self.input_height, self.input_width)
        for kind, model in self.models.items():
            if tuple(model.spec.input_shape) != expect:
                raise ValueError(
                    f"{kind.value} model input {model.spec.input_shape} != {expect}"
                )


def predict_config(bundle: PredictorBundle, image: Image, content_box=None) -> PredictionResult:
    """Predict all 12 attributes of a rendered component.

    A failure in one attribute's model is recorded under its name and replaced
    by a domain-valid fallback; the other attributes are unaffected.  The
    returned configuration always validates.
    """
    values, predictions, failures = {}, {}, {}
    for kind in KINDS:
        try:
            model = bundle.models[kind]
            out = ensemble_predict(
                model, image, bundle.perturbation,
                content_box=content_box, pad_mode=bundle.pad_mode,
            )
            value, conf, cand, probs = decode_output(kind, out)
            if is_color_kind(kind):
                sal, degenerate = saliency_map(model, image)
                if not degenerate:
                    value = color_clip(
                        value, image, sal,
                        threshold=bundle.clip_threshold,
                        top_n=bundle.clip_top_n,
                        mode=bundle.clip_mode,
                    )
                    cand, probs = [value], np.array([1.0])
            values[kind] = value
            predictions[kind] = KindPrediction(kind, value, conf, cand, probs)
        except Exception as exc:  # noqa: BLE001 - per-kind isolation is the contract
            failures[kind] = f"{type(exc).__name__}: {exc}"
            value = _fallback_value(kind)
            values[kind] = value
            predictions[kind] = KindPrediction(kind, value, 0.0, [value], np.array([1.0]))
    config = AttributeConfig(**{kind.value: v for kind, v in values.items()})
    return PredictionResult(config, predictions, failures)


def save_bundle(bundle: PredictorBundle, directory) -> None:
    root = pathlib.Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "input_height": bundle.input_height,
        "input_width": bundle.input_width,
        "pad_mode": bundle.pad_mode,
        "perturbation": dataclasses.asdict(bundle.perturbation),
        "clip_threshold": bundle.clip_threshold,
        "clip_top_n": bundle.clip_top_n,
        "clip_mode": bundle.clip_mode,
    }
    (root / "bundle.json").write_text(json.dumps(meta, indent=2) + "\n")
    for kind, model in bundle.models.items():
        save_checkpoint(model, root / f"{kind.value}.ckpt", meta={"attribute": kind.value})


def load_bundle(directory, dtype=np.float64) -> PredictorBundle:
    root = pathlib.Path(directory)
    meta_path = root / "bundle.json"
    if not meta_path.is_file():
        raise PredictorError(f"no bundle.json under {root}")
    meta = json.loads(meta_path.read_text())
    models = {}
    for kind in KINDS:
        path = root / f"{kind.value}.ckpt"
        if not path.is_file():
            raise PredictorError(f"bundle is missing the {kind.value} checkpoint")
        models[kind], _ = load_checkpoint(path, dtype=dtype)
    return PredictorBundle(
        models=models,
        input_height=int(meta["input_height"]),
        input_width=int(meta["input_width"]),
        pad_mode=meta["pad_mode"],
        perturbation=PerturbationSpec(**meta["perturbation"]),
        clip_threshold=float(meta["clip_threshold"]),
        clip_top_n=int(meta["clip_top_n"]),
        clip_mode=meta["clip_mode"],
    )
