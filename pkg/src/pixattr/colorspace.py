"""sRGB to CIELAB conversion and the CIE76 color difference.

The conversion chain is sRGB (8-bit) -> linear RGB -> XYZ (D65) -> L*a*b*.
The white point is taken as the XYZ of sRGB white under the same matrix
(i.e. the matrix row sums), so that pure white maps exactly to
L*=100, a*=0, b*=0.
"""

from __future__ import annotations

import math

# sRGB -> XYZ, D65, 2-degree observer.
_M = (
    (0.4124, 0.3576, 0.1805),
    (0.2126, 0.7152, 0.0722),
    (0.0193, 0.1192, 0.9505),
)

# Reference white = matrix row sums, so srgb_to_lab((255,255,255)) == (100, 0, 0).
_WHITE = tuple(sum(row) for row in _M)

_LAB_EPS = (6.0 / 29.0) ** 3


def _srgb_channel_to_linear(v8: int | float) -> float:
    v = v8 / 255.0
    if v > 0.04045:
        return ((v + 0.055) / 1.055) ** 2.4
    return v / 12.92


def _lab_f(t: float) -> float:
    if t > _LAB_EPS:
        return t ** (1.0 / 3.0)
    return t / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0


def srgb_to_lab(rgb: tuple[int, int, int]) -> tuple[float, float, float]:
    """Convert an 8-bit sRGB triple to CIELAB (L*, a*, b*)."""
    r, g, b = (_srgb_channel_to_linear(c) for c in rgb)
    xyz = tuple(m[0] * r + m[1] * g + m[2] * b for m in _M)
    fx, fy, fz = (_lab_f(c / w) for c, w in zip(xyz, _WHITE))
    return (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))


def cie76(rgb_a: tuple[int, int, int], rgb_b: tuple[int, int, int]) -> float:
    """Euclidean distance between two sRGB colors in CIELAB."""
    la, aa, ba = srgb_to_lab(rgb_a)
    lb, ab, bb = srgb_to_lab(rgb_b)
    return math.sqrt((la - lb) ** 2 + (aa - ab) ** 2 + (ba - bb) ** 2)
