"""Stage 1 image preprocessing: denoise, resize, contrast enhancement.

The pipeline applies non-local means denoising, aspect-preserving resize
to a maximum dimension, then contrast-limited adaptive histogram
equalization, in that order. All operations are pure functions on
``ImageBuffer`` values and are deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from PIL import Image
from scipy.ndimage import uniform_filter

log = logging.getLogger(__name__)

SUPPORTED_EXTENSIONS = {".jpg", ".jpeg", ".png"}

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


class ImageLoadError(Exception):
    """Raised when an input file cannot be decoded as JPEG or PNG."""


@dataclass
class ImageBuffer:
    """Decoded raster image: uint8 samples, shape (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w) or (h, w, 1|3) array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {arr.dtype}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def data(self) -> bytes:
        """Row-major raw samples, length = width * height * channels."""
        return self.pixels.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ImageBuffer":
        path = Path(path)
        if path.suffix.lower() not in SUPPORTED_EXTENSIONS:
            raise ImageLoadError(f"unsupported format: {path.name}")
        try:
            with Image.open(path) as im:
                if im.mode == "L":
                    arr = np.asarray(im.convert("L"), dtype=np.uint8)
                else:
                    arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception as exc:
            raise ImageLoadError(f"failed to decode {path.name}: {exc}") from exc
        return cls(arr)

    def to_file(self, path: str | Path) -> None:
        arr = self.pixels[:, :, 0] if self.channels == 1 else self.pixels
        Image.fromarray(arr).save(path, format="PNG")

    def to_png_bytes(self) -> bytes:
        import io

        arr = self.pixels[:, :, 0] if self.channels == 1 else self.pixels
        buf = io.BytesIO()
        Image.fromarray(arr).save(buf, format="PNG")
        return buf.getvalue()


@dataclass(frozen=True)
class PreprocessConfig:
    """Parameters for the three preprocessing stages."""

    nlm_strength: float = 5.0
    nlm_template_radius: int = 3
    nlm_search_radius: int = 10
    max_dimension: int = 1024
    clahe_clip_limit: float = 2.0
    clahe_tiles_x: int = 8
    clahe_tiles_y: int = 8

    def __post_init__(self):
        for name in (
            "nlm_strength",
            "nlm_template_radius",
            "nlm_search_radius",
            "max_dimension",
            "clahe_clip_limit",
            "clahe_tiles_x",
            "clahe_tiles_y",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def _nlm_plane(plane: np.ndarray, strength: float, template_radius: int,
               search_radius: int) -> np.ndarray:
    """Non-local means on a single float64 plane.

    Per-pixel output is the similarity-weighted average of pixels in the
    search window, with weights exp(-d2 / h^2) where d2 is the mean
    squared distance between the (2*template_radius+1)^2 patches centred
    on the two pixels. Borders are handled by symmetric padding.
    """
    h_img, w_img = plane.shape
    if plane.min() == plane.max():
        # every patch is identical; weighted average is the identity
        return plane.copy()
    tr, sr = template_radius, search_radius
    pad = tr + sr
    padded = np.pad(plane, pad, mode="symmetric")
    inv_h2 = 1.0 / (strength * strength)
    size = 2 * tr + 1

    # view covering the image plus template margin
    a = padded[sr:sr + h_img + 2 * tr, sr:sr + w_img + 2 * tr]
    num = np.zeros((h_img, w_img))
    den = np.zeros((h_img, w_img))
    for dy in range(-sr, sr + 1):
        for dx in range(-sr, sr + 1):
            b = padded[sr + dy:sr + dy + h_img + 2 * tr,
                       sr + dx:sr + dx + w_img + 2 * tr]
            d2 = uniform_filter((a - b) ** 2, size=size)[tr:tr + h_img, tr:tr + w_img]
            w = np.exp(-d2 * inv_h2)
            num += w * b[tr:tr + h_img, tr:tr + w_img]
            den += w
    return num / den


def nlm_denoise(img: ImageBuffer, cfg: PreprocessConfig) -> ImageBuffer:
    """Non-local means denoising, applied per channel."""
    out = np.empty_like(img.pixels)
    for c in range(img.channels):
        plane = _nlm_plane(
            img.pixels[:, :, c].astype(np.float64),
            cfg.nlm_strength,
            cfg.nlm_template_radius,
            cfg.nlm_search_radius,
        )
        out[:, :, c] = np.clip(np.rint(plane), 0, 255).astype(np.uint8)
    return ImageBuffer(out)


def resize_max_dim(img: ImageBuffer, max_dimension: int) -> ImageBuffer:
    """Downscale so the larger dimension equals max_dimension; never upscale.

    The other dimension is scaled proportionally with round-half-up and a
    floor of 1 pixel. Bilinear interpolation.
    """
    if max_dimension < 1:
        raise ValueError("max_dimension must be >= 1")
    h, w = img.height, img.width
    longest = max(h, w)
    if longest <= max_dimension:
        return img
    scale = max_dimension / longest
    new_w = max(1, int(np.floor(w * scale + 0.5)))
    new_h = max(1, int(np.floor(h * scale + 0.5)))
    resized = cv2.resize(img.pixels, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    if resized.ndim == 2:
        resized = resized[:, :, np.newaxis]
    return ImageBuffer(resized)


def clahe_tile_mapping(tile: np.ndarray, clip_limit: float) -> np.ndarray:
    """Per-tile intensity mapping: clipped histogram CDF scaled to [0, 255].

    The clip ceiling is clip_limit * tile_pixels / 256 (floored at 1) and
    the clipped excess is redistributed uniformly over all 256 bins.
    """
    hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
    limit = max(1.0, clip_limit * tile.size / 256.0)
    clipped = np.minimum(hist, limit)
    excess = hist.sum() - clipped.sum()
    clipped += excess / 256.0
    cdf = np.cumsum(clipped)
    return np.rint(255.0 * cdf / cdf[-1]).astype(np.uint8)


def _global_equalize(plane: np.ndarray) -> np.ndarray:
    hist = np.bincount(plane.ravel(), minlength=256).astype(np.float64)
    cdf = np.cumsum(hist)
    lut = np.rint(255.0 * cdf / cdf[-1]).astype(np.uint8)
    return lut[plane]


def _clahe_plane(plane: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    h, w = plane.shape
    ty, tx = cfg.clahe_tiles_y, cfg.clahe_tiles_x
    if h < ty or w < tx:
        log.warning(
            "image %dx%d smaller than %dx%d tile grid; using global equalization",
            w, h, tx, ty,
        )
        return _global_equalize(plane)

    y_edges = np.rint(np.linspace(0, h, ty + 1)).astype(int)
    x_edges = np.rint(np.linspace(0, w, tx + 1)).astype(int)
    luts = np.empty((ty, tx, 256), dtype=np.uint8)
    for j in range(ty):
        for i in range(tx):
            tile = plane[y_edges[j]:y_edges[j + 1], x_edges[i]:x_edges[i + 1]]
            luts[j, i] = clahe_tile_mapping(tile, cfg.clahe_clip_limit)

    # bilinear blend between tile mappings, indexed by tile-centre coordinates
    cy = (y_edges[:-1] + y_edges[1:] - 1) / 2.0
    cx = (x_edges[:-1] + x_edges[1:] - 1) / 2.0
    fy = np.interp(np.arange(h), cy, np.arange(ty))
    fx = np.interp(np.arange(w), cx, np.arange(tx))
    j0 = np.minimum(fy.astype(int), ty - 1)
    i0 = np.minimum(fx.astype(int), tx - 1)
    j1 = np.minimum(j0 + 1, ty - 1)
    i1 = np.minimum(i0 + 1, tx - 1)
    wy = (fy - j0)[:, np.newaxis]
    wx = (fx - i0)[np.newaxis, :]

    j0c, j1c = j0[:, np.newaxis], j1[:, np.newaxis]
    i0c, i1c = i0[np.newaxis, :], i1[np.newaxis, :]
    v = plane
    out = (
        (1 - wy) * (1 - wx) * luts[j0c, i0c, v]
        + (1 - wy) * wx * luts[j0c, i1c, v]
        + wy * (1 - wx) * luts[j1c, i0c, v]
        + wy * wx * luts[j1c, i1c, v]
    )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def clahe(img: ImageBuffer, cfg: PreprocessConfig) -> ImageBuffer:
    """Contrast-limited adaptive histogram equalization.

    Grayscale images are equalized directly. RGB images are converted to
    BT.601 luma, the luma plane is equalized, and each channel is rescaled
    proportionally so hue is preserved.
    """
    if img.channels == 1:
        return ImageBuffer(_clahe_plane(img.pixels[:, :, 0], cfg)[:, :, np.newaxis])

    rgb = img.pixels.astype(np.float64)
    luma = rgb @ _LUMA
    luma_u8 = np.clip(np.rint(luma), 0, 255).astype(np.uint8)
    eq = _clahe_plane(luma_u8, cfg).astype(np.float64)
    factor = eq / np.maximum(luma_u8, 1)
    out = np.clip(np.rint(rgb * factor[:, :, np.newaxis]), 0, 255).astype(np.uint8)
    # pure black pixels have no chroma to rescale; take the equalized luma
    black = luma_u8 == 0
    if black.any():
        out[black] = eq[black][:, np.newaxis].astype(np.uint8)
    return ImageBuffer(out)


def preprocess(img: ImageBuffer, cfg: PreprocessConfig) -> ImageBuffer:
    """Full preprocessing chain: denoise, then resize, then equalize."""
    return clahe(resize_max_dim(nlm_denoise(img, cfg), cfg.max_dimension), cfg)
