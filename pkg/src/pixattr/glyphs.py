"""Embedded 5x7 bitmap glyphs and text-mask construction.

Glyphs are uppercase ASCII letters drawn as 7 rows of 5 cells. A text mask is
built by nearest-neighbor scaling each glyph to the requested cap height, so
every text size in the domain produces a distinct raster. Font weights are
realized as morphological variants of the same mask: "thin" erodes the
strokes where that leaves any ink (and lowers ink opacity), "light" only
lowers opacity, "medium" and "bolt" dilate by one and two steps.
"""

from __future__ import annotations

import numpy as np

_RAW = {
    "A": (".XXX.", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"),
    "B": ("XXXX.", "X...X", "X...X", "XXXX.", "X...X", "X...X", "XXXX."),
    "C": (".XXX.", "X...X", "X....", "X....", "X....", "X...X", ".XXX."),
    "D": ("XXXX.", "X...X", "X...X", "X...X", "X...X", "X...X", "XXXX."),
    "E": ("XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "XXXXX"),
    "F": ("XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "X...."),
    "G": (".XXX.", "X...X", "X....", "X.XXX", "X...X", "X...X", ".XXXX"),
    "H": ("X...X", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"),
    "I": ("XXXXX", "..X..", "..X..", "..X..", "..X..", "..X..", "XXXXX"),
    "J": ("..XXX", "...X.", "...X.", "...X.", "...X.", "X..X.", ".XX.."),
    "K": ("X...X", "X..X.", "X.X..", "XX...", "X.X..", "X..X.", "X...X"),
    "L": ("X....", "X....", "X....", "X....", "X....", "X....", "XXXXX"),
    "M": ("X...X", "XX.XX", "X.X.X", "X.X.X", "X...X", "X...X", "X...X"),
    "N": ("X...X", "XX..X", "X.X.X", "X..XX", "X...X", "X...X", "X...X"),
    "O": (".XXX.", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."),
    "P": ("XXXX.", "X...X", "X...X", "XXXX.", "X....", "X....", "X...."),
    "Q": (".XXX.", "X...X", "X...X", "X...X", "X.X.X", "X..X.", ".XX.X"),
    "R": ("XXXX.", "X...X", "X...X", "XXXX.", "X.X..", "X..X.", "X...X"),
    "S": (".XXXX", "X....", "X....", ".XXX.", "....X", "....X", "XXXX."),
    "T": ("XXXXX", "..X..", "..X..", "..X..", "..X..", "..X..", "..X.."),
    "U": ("X...X", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."),
    "V": ("X...X", "X...X", "X...X", "X...X", "X...X", ".X.X.", "..X.."),
    "W": ("X...X", "X...X", "X...X", "X.X.X", "X.X.X", "XX.XX", "X...X"),
    "X": ("X...X", "X...X", ".X.X.", "..X..", ".X.X.", "X...X", "X...X"),
    "Y": ("X...X", "X...X", ".X.X.", "..X..", "..X..", "..X..", "..X.."),
    "Z": ("XXXXX", "....X", "...X.", "..X..", ".X...", "X....", "XXXXX"),
}

GLYPH_ROWS = 7
GLYPH_COLS = 5

FONT_OPACITY = {"thin": 0.55, "light": 0.7, "regular": 1.0, "medium": 1.0, "bolt": 1.0}
_FONT_DILATIONS = {"thin": 0, "light": 0, "regular": 0, "medium": 1, "bolt": 2}

_GLYPHS = {
    ch: np.array([[c == "X" for c in row] for row in rows], dtype=bool)
    for ch, rows in _RAW.items()
}


def glyph_mask(ch: str) -> np.ndarray:
    """7x5 boolean cell grid for one character (space is all blank)."""
    if ch == " ":
        return np.zeros((GLYPH_ROWS, GLYPH_COLS), dtype=bool)
    try:
        return _GLYPHS[ch.upper()]
    except KeyError:
        raise KeyError(f"no glyph for character {ch!r}") from None


def glyph_width(cap_height: int) -> int:
    return int(round(GLYPH_COLS * cap_height / GLYPH_ROWS))


def glyph_spacing(cap_height: int) -> int:
    return max(1, int(round(cap_height / GLYPH_ROWS)))


def _scale_nearest(mask: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    src_h, src_w = mask.shape
    rows = np.minimum((np.arange(out_h) + 0.5) * src_h / out_h, src_h - 1).astype(int)
    cols = np.minimum((np.arange(out_w) + 0.5) * src_w / out_w, src_w - 1).astype(int)
    return mask[np.ix_(rows, cols)]


def _dilate(mask: np.ndarray) -> np.ndarray:
    p = np.pad(mask, 1)
    return mask | p[:-2, 1:-1] | p[2:, 1:-1] | p[1:-1, :-2] | p[1:-1, 2:]


def _erode(mask: np.ndarray) -> np.ndarray:
    p = np.pad(mask, 1)
    return mask & p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]


def text_mask(text: str, cap_height: int, font: str) -> tuple[np.ndarray, float]:
    """Rasterize a label at the given cap height.

    Returns (boolean ink mask, ink opacity). cap_height 0 yields an empty
    mask.
    """
    if font not in FONT_OPACITY:
        raise ValueError(f"unknown font {font!r}")
    opacity = FONT_OPACITY[font]
    if cap_height <= 0 or not text:
        return np.zeros((0, 0), dtype=bool), opacity
    gw = glyph_width(cap_height)
    sp = glyph_spacing(cap_height)
    total_w = len(text) * gw + (len(text) - 1) * sp
    mask = np.zeros((cap_height, total_w), dtype=bool)
    x = 0
    for ch in text:
        mask[:, x : x + gw] = _scale_nearest(glyph_mask(ch), cap_height, gw)
        x += gw + sp
    for _ in range(_FONT_DILATIONS[font]):
        mask = _dilate(mask)
    if font == "thin":
        eroded = _erode(mask)
        if eroded.any():
            mask = eroded
    return mask, opacity


def text_block_size(text: str, cap_height: int) -> tuple[int, int]:
    """(width, height) of the rendered text block before clipping."""
    if cap_height <= 0 or not text:
        return 0, 0
    gw = glyph_width(cap_height)
    sp = glyph_spacing(cap_height)
    return len(text) * gw + (len(text) - 1) * sp, cap_height
