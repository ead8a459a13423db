"""Fixed-size 8-bit RGB raster plus lossless PPM persistence and padding.

The on-disk format is binary PPM (P6, maxval 255) written with a canonical
header so files are bit-reproducible: b"P6\\n{w} {h}\\n255\\n" followed by
row-major RGB bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MalformedImageError(ValueError):
    """File contents do not parse as the expected binary PPM."""


@dataclass
class Image:
    """Row-major 3-channel 8-bit raster."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width, 3), dtype uint8

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    def copy(self) -> "Image":
        return Image(self.width, self.height, self.pixels.copy())

    def to_float_chw(self, dtype=np.float64) -> np.ndarray:
        """Float (3, H, W) tensor scaled to [0, 1], the network input layout."""
        return np.transpose(self.pixels, (2, 0, 1)).astype(dtype) / 255.0

    @classmethod
    def filled(cls, width: int, height: int, rgb=(255, 255, 255)) -> "Image":
        buf = np.empty((height, width, 3), dtype=np.uint8)
        buf[:] = np.asarray(rgb, dtype=np.uint8)
        return cls(width, height, buf)

    @classmethod
    def from_float_chw(cls, arr: np.ndarray) -> "Image":
        clipped = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
        return cls(arr.shape[2], arr.shape[1], np.transpose(clipped, (1, 2, 0)))


def write_image(img: Image, path) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())


def _read_header_tokens(data: bytes) -> tuple[list[bytes], int]:
    """Return the first 4 whitespace-separated header tokens and the pixel offset.

    Comments (# to end of line) are allowed per the PPM standard even though
    our writer never emits them.
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < 4:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise MalformedImageError("truncated header")
        tokens.append(data[start:i])
    if i >= n:
        raise MalformedImageError("missing pixel data")
    return tokens, i + 1  # exactly one whitespace byte separates header and pixels


def read_image(path) -> Image:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise MalformedImageError("not a P6 file")
    tokens, offset = _read_header_tokens(data)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MalformedImageError(f"bad header fields: {exc}") from exc
    if maxval != 255:
        raise MalformedImageError(f"unsupported maxval {maxval}")
    if width <= 0 or height <= 0:
        raise MalformedImageError("non-positive dimensions")
    expected = 3 * width * height
    body = data[offset : offset + expected]
    if len(body) != expected:
        raise MalformedImageError(
            f"expected {expected} pixel bytes, found {len(body)}"
        )
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    return Image(width, height, pixels.copy())


def pad_image(
    img: Image,
    target_w: int,
    target_h: int,
    mode: str = "edge",
    constant_rgb=(255, 255, 255),
    rerender=None,
) -> Image:
    """Grow an image to (target_w, target_h) with the source centered.

    Modes: "edge" replicates the nearest border pixel outward, "constant"
    fills with constant_rgb, "zero" is constant black (the no-information
    fill), and "bbox_expand" calls `rerender(target_w, target_h)` to draw the
    component on a larger canvas when the caller still knows the config,
    falling back to edge replication otherwise.
    """
    if target_w < img.width or target_h < img.height:
        raise ValueError("padding target smaller than source")
    if target_w == img.width and target_h == img.height:
        return img.copy()
    if mode == "bbox_expand":
        if rerender is not None:
            out = rerender(target_w, target_h)
            if out.width != target_w or out.height != target_h:
                raise ValueError("rerender returned wrong size")
            return out
        mode = "edge"
    if mode == "zero":
        mode, constant_rgb = "constant", (0, 0, 0)

    left = (target_w - img.width) // 2
    right = target_w - img.width - left
    top = (target_h - img.height) // 2
    bottom = target_h - img.height - top
    if mode == "edge":
        buf = np.pad(img.pixels, ((top, bottom), (left, right), (0, 0)), mode="edge")
    elif mode == "constant":
        buf = np.empty((target_h, target_w, 3), dtype=np.uint8)
        buf[:] = np.asarray(constant_rgb, dtype=np.uint8)
        buf[top : top + img.height, left : left + img.width] = img.pixels
    else:
        raise ValueError(f"unknown padding mode {mode!r}")
    return Image(target_w, target_h, buf)


def shift_image(img: Image, dx: int, dy: int) -> Image:
    """Translate content by (dx, dy) pixels, replicating edges into the gap."""
    if dx == 0 and dy == 0:
        return img.copy()
    pad_left, pad_right = max(dx, 0), max(-dx, 0)
    pad_top, pad_bottom = max(dy, 0), max(-dy, 0)
    buf = np.pad(
        img.pixels,
        ((pad_top, pad_bottom), (pad_left, pad_right), (0, 0)),
        mode="edge",
    )
    y0 = pad_bottom
    x0 = pad_right
    out = buf[y0 : y0 + img.height, x0 : x0 + img.width]
    return Image(img.width, img.height, out.copy())


def translate_to_center(img: Image, x_pos: int, y_pos: int, comp_w: int, comp_h: int) -> Image:
    """Shift content so a component at (x_pos, y_pos) lands centered on the canvas."""
    cx = (img.width - comp_w) // 2
    cy = (img.height - comp_h) // 2
    return shift_image(img, cx - x_pos, cy - y_pos)
