"""Deterministic software rasterizer for the Button component.

Drawing order: background, drop shadow, rounded-rect fill, inner border
stroke, then text. Geometry is evaluated as a signed-distance field sampled
on a 2x2 grid per pixel (4 samples), giving platform-independent coverage
anti-aliasing. All compositing happens in float64 and is quantized to 8-bit
exactly once, so equal inputs produce bit-identical images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import schema
from .glyphs import text_mask
from .image import Image
from .schema import INF_RADIUS, AttributeConfig

SHADOW_OPACITY = 0.4
# Shadow alpha below this quantizes to no visible change on any background.
_ALPHA_CUTOFF = 1.0 / 512.0


class GeometryError(Exception):
    """Component rectangle does not fit the canvas."""


@dataclass(frozen=True)
class RenderContext:
    """Placement and surroundings of a component on a canvas."""

    canvas_width: int
    canvas_height: int
    x_pos: int
    y_pos: int
    background: object = "white"  # "white" | (r, g, b) | Image
    label: str = "OK"


def resolve_background(background, width: int, height: int) -> np.ndarray:
    """Background as a float64 (height, width, 3) array in [0, 255]."""
    if background == "white" or background is None:
        return np.full((height, width, 3), 255.0)
    if isinstance(background, Image):
        tile = background.pixels
        reps_y = -(-height // tile.shape[0])
        reps_x = -(-width // tile.shape[1])
        buf = np.tile(tile, (reps_y, reps_x, 1))[:height, :width]
        return buf.astype(np.float64)
    rgb = tuple(background)
    if len(rgb) != 3:
        raise ValueError(f"bad background {background!r}")
    buf = np.empty((height, width, 3))
    buf[:] = np.asarray(rgb, dtype=np.float64)
    return buf


def effective_radius(config: AttributeConfig) -> float:
    """Corner radius after clamping; the infinite sentinel means pill ends."""
    rmax = min(config.width, config.height) / 2.0
    if config.border_radius == INF_RADIUS:
        return rmax
    return min(float(config.border_radius), rmax)


def _coverage(x0, x1, y0, y1, ox, oy, w, h, r) -> np.ndarray:
    """Rounded-rect coverage over canvas pixel window [x0,x1) x [y0,y1).

    The rect has top-left (ox, oy) and size (w, h); per pixel, 4 sample
    points at (+-0.25, +-0.25) around the center vote inside/outside.
    """
    if w <= 0 or h <= 0 or x1 <= x0 or y1 <= y0:
        return np.zeros((max(y1 - y0, 0), max(x1 - x0, 0)))
    xs = np.arange(x0, x1, dtype=np.float64) + 0.5 - ox
    ys = np.arange(y0, y1, dtype=np.float64) + 0.5 - oy
    hx, hy = w / 2.0, h / 2.0
    cov = np.zeros((ys.size, xs.size))
    for dy in (-0.25, 0.25):
        for dx in (-0.25, 0.25):
            qx = np.abs(xs[None, :] + dx - hx) - (hx - r)
            qy = np.abs(ys[:, None] + dy - hy) - (hy - r)
            d = (
                np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
                + np.minimum(np.maximum(qx, qy), 0.0)
                - r
            )
            cov += d <= 0.0
    return cov / 4.0


def _box_blur_axis(a: np.ndarray, r: int, axis: int) -> np.ndarray:
    if r == 0:
        return a
    a = np.moveaxis(a, axis, 0)
    n = a.shape[0]
    zeros = np.zeros((r,) + a.shape[1:])
    padded = np.concatenate([zeros, a, zeros], axis=0)
    c = np.cumsum(padded, axis=0)
    c = np.concatenate([np.zeros((1,) + c.shape[1:]), c], axis=0)
    out = (c[2 * r + 1 :] - c[:n]) / (2 * r + 1)
    return np.moveaxis(out, 0, axis)


def _shadow_alpha(config: AttributeConfig, ctx: RenderContext):
    """Shadow alpha map and its top-left canvas position, or None."""
    s = config.shadow
    if s <= 0:
        return None
    margin = 2 * s + 1
    w, h = config.width, config.height
    sil = _coverage(
        -margin, w + margin, -margin, h + margin, 0, 0, w, h, effective_radius(config)
    )
    for _ in range(2):
        sil = _box_blur_axis(sil, s, 0)
        sil = _box_blur_axis(sil, s, 1)
    alpha = sil * SHADOW_OPACITY
    alpha[alpha < _ALPHA_CUTOFF] = 0.0
    x0 = ctx.x_pos - margin
    y0 = ctx.y_pos - margin + (s + 1) // 2  # offset points the shadow downward
    return alpha, x0, y0


def _blend_region(buf, alpha, color, x0, y0):
    """Composite `color` with per-pixel `alpha` onto buf at (x0, y0), clipped."""
    h, w = alpha.shape
    cy0, cy1 = max(y0, 0), min(y0 + h, buf.shape[0])
    cx0, cx1 = max(x0, 0), min(x0 + w, buf.shape[1])
    if cy1 <= cy0 or cx1 <= cx0:
        return
    a = alpha[cy0 - y0 : cy1 - y0, cx0 - x0 : cx1 - x0][..., None]
    region = buf[cy0:cy1, cx0:cx1]
    if color is None:
        region *= 1.0 - a
    else:
        region *= 1.0 - a
        region += np.asarray(color, dtype=np.float64) * a


def _text_placement(config: AttributeConfig, mask_shape) -> tuple[int, int]:
    """Top-left of the text block in component-local coordinates."""
    th, tw = mask_shape
    bw, pad = config.border_width, config.padding
    x0, y0 = bw + pad, bw + pad
    x1, y1 = config.width - bw - pad, config.height - bw - pad
    g = config.text_gravity
    if g == "left":
        tx, ty = x0, y0 + (y1 - y0 - th) // 2
    elif g == "right":
        tx, ty = x1 - tw, y0 + (y1 - y0 - th) // 2
    elif g == "top":
        tx, ty = x0 + (x1 - x0 - tw) // 2, y0
    elif g == "bottom":
        tx, ty = x0 + (x1 - x0 - tw) // 2, y1 - th
    else:  # center
        tx, ty = x0 + (x1 - x0 - tw) // 2, y0 + (y1 - y0 - th) // 2
    return tx, ty


def _composite_text(buf, config: AttributeConfig, ctx: RenderContext):
    if config.text_size <= 0 or not ctx.label:
        return
    mask, opacity = text_mask(ctx.label, config.text_size, config.text_font)
    if mask.size == 0 or not mask.any():
        return
    tx, ty = _text_placement(config, mask.shape)
    # Clip the block to the border-inset content box.
    bw = config.border_width
    cx0, cy0 = bw, bw
    cx1, cy1 = config.width - bw, config.height - bw
    mx0 = max(cx0 - tx, 0)
    my0 = max(cy0 - ty, 0)
    mx1 = min(cx1 - tx, mask.shape[1])
    my1 = min(cy1 - ty, mask.shape[0])
    if mx1 <= mx0 or my1 <= my0:
        return
    clipped = mask[my0:my1, mx0:mx1].astype(np.float64) * opacity
    _blend_region(
        buf,
        clipped,
        config.text_color,
        ctx.x_pos + tx + mx0,
        ctx.y_pos + ty + my0,
    )


def render(config: AttributeConfig, ctx: RenderContext) -> Image:
    violations = schema.validate(config)
    if violations:
        raise schema.DomainError(
            "invalid config: " + ", ".join(v.kind.value for v in violations)
        )
    w, h = config.width, config.height
    if (
        ctx.x_pos < 0
        or ctx.y_pos < 0
        or ctx.x_pos + w > ctx.canvas_width
        or ctx.y_pos + h > ctx.canvas_height
    ):
        raise GeometryError(
            f"{w}x{h} component at ({ctx.x_pos}, {ctx.y_pos}) exceeds "
            f"{ctx.canvas_width}x{ctx.canvas_height} canvas"
        )
    buf = resolve_background(ctx.background, ctx.canvas_width, ctx.canvas_height)

    shadow = _shadow_alpha(config, ctx)
    if shadow is not None:
        alpha, sx0, sy0 = shadow
        _blend_region(buf, alpha, None, sx0, sy0)

    # Fill and border share one coverage evaluation; the border is the ring
    # between the outer shape and the same shape inset by border_width.
    bx0, bx1 = ctx.x_pos - 1, ctx.x_pos + w + 1
    by0, by1 = ctx.y_pos - 1, ctx.y_pos + h + 1
    r = effective_radius(config)
    cov_o = _coverage(bx0, bx1, by0, by1, ctx.x_pos, ctx.y_pos, w, h, r)
    bwd = config.border_width
    iw, ih = w - 2 * bwd, h - 2 * bwd
    if bwd > 0 and iw > 0 and ih > 0:
        cov_i = _coverage(
            bx0, bx1, by0, by1, ctx.x_pos + bwd, ctx.y_pos + bwd, iw, ih, max(r - bwd, 0.0)
        )
    elif bwd > 0:
        cov_i = np.zeros_like(cov_o)
    else:
        cov_i = cov_o
    cy0, cy1 = max(by0, 0), min(by1, ctx.canvas_height)
    cx0, cx1 = max(bx0, 0), min(bx1, ctx.canvas_width)
    if cy1 > cy0 and cx1 > cx0:
        o = cov_o[cy0 - by0 : cy1 - by0, cx0 - bx0 : cx1 - bx0][..., None]
        i = cov_i[cy0 - by0 : cy1 - by0, cx0 - bx0 : cx1 - bx0][..., None]
        region = buf[cy0:cy1, cx0:cx1]
        main = np.asarray(config.main_color, dtype=np.float64)
        border = np.asarray(config.border_color, dtype=np.float64)
        region *= 1.0 - o
        region += border * (o - i) + main * i

    _composite_text(buf, config, ctx)
    return Image(
        ctx.canvas_width,
        ctx.canvas_height,
        np.clip(np.rint(buf), 0.0, 255.0).astype(np.uint8),
    )


def footprint_mask(config: AttributeConfig, ctx: RenderContext) -> np.ndarray:
    """Boolean (canvas_height, canvas_width) mask of pixels the component touches."""
    fp = np.zeros((ctx.canvas_height, ctx.canvas_width), dtype=bool)

    def mark(alpha, x0, y0):
        h, w = alpha.shape
        cy0, cy1 = max(y0, 0), min(y0 + h, fp.shape[0])
        cx0, cx1 = max(x0, 0), min(x0 + w, fp.shape[1])
        if cy1 > cy0 and cx1 > cx0:
            fp[cy0:cy1, cx0:cx1] |= (
                alpha[cy0 - y0 : cy1 - y0, cx0 - x0 : cx1 - x0] > 0.0
            )

    shadow = _shadow_alpha(config, ctx)
    if shadow is not None:
        mark(*shadow)
    cov = _coverage(
        -1,
        config.width + 1,
        -1,
        config.height + 1,
        0,
        0,
        config.width,
        config.height,
        effective_radius(config),
    )
    mark(cov, ctx.x_pos - 1, ctx.y_pos - 1)
    return fp


def shadow_reach(shadow: int) -> int:
    """How far (px) the blurred shadow can extend beyond the component rect."""
    return 2 * shadow + 1 if shadow > 0 else 0


def component_bbox(config: AttributeConfig, ctx: RenderContext, include_shadow=True):
    """(x0, y0, x1, y1) canvas box covering the component and optionally its shadow."""
    x0, y0 = ctx.x_pos, ctx.y_pos
    x1, y1 = ctx.x_pos + config.width, ctx.y_pos + config.height
    if include_shadow and config.shadow > 0:
        reach = shadow_reach(config.shadow)
        off = (config.shadow + 1) // 2
        x0 -= reach
        x1 += reach
        y0 -= reach - off
        y1 += reach + off
    return x0, y0, x1, y1


def context_fits(config: AttributeConfig, ctx: RenderContext, include_shadow=True) -> bool:
    x0, y0, x1, y1 = component_bbox(config, ctx, include_shadow)
    return x0 >= 0 and y0 >= 0 and x1 <= ctx.canvas_width and y1 <= ctx.canvas_height
