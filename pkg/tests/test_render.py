"""Rasterizer: determinism, geometry, observability, footprint, equivariance."""

import numpy as np
import pytest

from pixattr import schema
from pixattr.image import Image
from pixattr.render import (
    GeometryError,
    RenderContext,
    component_bbox,
    context_fits,
    effective_radius,
    footprint_mask,
    render,
    resolve_background,
)
from pixattr.schema import INF_RADIUS, AttributeConfig, AttributeKind, PerceivableClass

K = AttributeKind

# Wide and tall enough that every domain value of every attribute changes
# pixels: radii up to 20 need min(w,h) > 40, padding up to 43 needs width
# beyond 2*43 + text, and left gravity makes padding shift the text.
def canonical(**overrides) -> AttributeConfig:
    vals = dict(
        border_color=(0, 0, 0),
        border_radius=4,
        border_width=2,
        main_color=(66, 133, 244),
        padding=4,
        shadow=2,
        text_color=(20, 20, 20),
        text_font="regular",
        text_gravity="left",
        text_size=14,
        height=44,
        width=220,
    )
    vals.update(overrides)
    return AttributeConfig(**vals)


CTX = RenderContext(340, 120, 60, 38, "white", "GO")


def nonbackground(img: Image) -> np.ndarray:
    return np.any(img.pixels != 255, axis=2)


def test_render_is_deterministic():
    assert render(canonical(), CTX) == render(canonical(), CTX)


def test_zero_text_size_equals_no_label():
    with_size0 = render(canonical(text_size=0), CTX)
    no_label = render(
        canonical(text_size=0),
        RenderContext(340, 120, 60, 38, "white", ""),
    )
    assert with_size0 == no_label


def test_border_width_difference_is_visible():
    a = render(canonical(border_width=3), CTX)
    b = render(canonical(border_width=5), CTX)
    assert a != b


def test_invalid_config_rejected():
    with pytest.raises(schema.DomainError):
        render(canonical(border_width=13), CTX)


def test_component_must_fit_canvas():
    with pytest.raises(GeometryError):
        render(canonical(), RenderContext(100, 100, 0, 0, "white", "GO"))
    with pytest.raises(GeometryError):
        render(canonical(width=60, height=30), RenderContext(96, 48, 40, 20))


def test_solid_and_screenshot_backgrounds():
    solid = render(canonical(shadow=0), RenderContext(340, 120, 60, 38, (10, 200, 30), "GO"))
    assert tuple(solid.pixels[0, 0]) == (10, 200, 30)
    shot = Image.filled(16, 16, (7, 7, 7))
    bg = resolve_background(shot, 40, 33)
    assert bg.shape == (33, 40, 3)
    assert np.all(bg == 7.0)


def test_effective_radius_clamps_and_pill():
    assert effective_radius(canonical(border_radius=20)) == 20.0
    assert effective_radius(canonical(border_radius=INF_RADIUS)) == 22.0
    assert effective_radius(canonical(border_radius=20, height=24)) == 12.0


def test_observability_500_random_different_pairs():
    rng = np.random.default_rng(42)
    kinds = list(schema.COMPARABLE_KINDS)
    for _ in range(500):
        kind = kinds[int(rng.integers(len(kinds)))]
        while True:
            a = schema.sample_value(kind, rng)
            b = schema.sample_value(kind, rng)
            if schema.perceivable_class(kind, a, b) is PerceivableClass.DIFFERENT:
                break
        ia = render(canonical(**{kind.value: a}), CTX)
        ib = render(canonical(**{kind.value: b}), CTX)
        assert ia != ib, f"{kind.value}: {a} vs {b} rendered identically"


def test_observability_corner_cases():
    for a, b in [(20, INF_RADIUS), (19, INF_RADIUS)]:
        assert render(canonical(border_radius=a), CTX) != render(
            canonical(border_radius=b), CTX
        )
    assert render(canonical(padding=39), CTX) != render(canonical(padding=43), CTX)
    for f in ("thin", "light", "medium", "bolt"):
        assert render(canonical(text_font=f), CTX) != render(canonical(), CTX)
    for g in ("top", "center", "right", "bottom"):
        assert render(canonical(text_gravity=g), CTX) != render(canonical(), CTX)


def test_translation_equivariance():
    cfg = canonical()
    ctx1 = RenderContext(340, 120, 50, 30, "white", "GO")
    ctx2 = RenderContext(340, 120, 57, 41, "white", "GO")
    assert context_fits(cfg, ctx1) and context_fits(cfg, ctx2)
    im1, im2 = render(cfg, ctx1), render(cfg, ctx2)
    dy, dx = 11, 7
    shifted = np.full_like(im1.pixels, 255)
    shifted[dy:, dx:] = im1.pixels[:-dy, :-dx]
    assert np.array_equal(shifted, im2.pixels)


def test_footprint_monotone_in_growing_attributes():
    prev = None
    for s in range(0, 13, 2):
        cur = nonbackground(render(canonical(shadow=s), CTX))
        if prev is not None:
            assert not (prev & ~cur).any(), f"shadow {s} shrank the footprint"
        prev = cur
    prev = None
    for w in (25, 80, 160, 275):
        cur = nonbackground(render(canonical(width=w), CTX))
        if prev is not None:
            assert not (prev & ~cur).any()
        prev = cur
    prev = None
    for bw in range(0, 13, 3):
        cur = nonbackground(render(canonical(border_width=bw), CTX))
        if prev is not None:
            assert not (prev & ~cur).any()
        prev = cur


def test_footprint_mask_covers_rendered_pixels():
    fp = footprint_mask(canonical(), CTX)
    assert fp.shape == (120, 340)
    assert np.all(fp | ~nonbackground(render(canonical(), CTX)))
    # and it is localized: nothing marked far away from the component
    assert not fp[:10, :10].any()


def test_component_bbox_and_fit():
    cfg = canonical(shadow=4)
    x0, y0, x1, y1 = component_bbox(cfg, CTX, include_shadow=True)
    assert x0 < CTX.x_pos and y1 > CTX.y_pos + cfg.height
    assert context_fits(cfg, CTX)
    tight = RenderContext(224, 48, 2, 2)
    assert not context_fits(cfg, tight)


def test_text_clipped_to_content_box():
    # Border pixels stay border-colored even when the text block overflows.
    cfg = canonical(width=40, text_size=30, padding=0, border_width=4, text_color=(255, 0, 0))
    img = render(cfg, RenderContext(120, 120, 30, 30, "white", "WWW"))
    border_band = img.pixels[30 + 1, 30 + 1]
    assert tuple(border_band) == (0, 0, 0)
