"""Hue and intensity words sampled on a regular grid."""

from __future__ import annotations

import numpy as np

from ..stream import WordObservation
from .imageio import Frame


def grid_points(width: int, height: int, step: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centred grid coordinates ``(xs, ys)``, row-major."""
    if step <= 0:
        raise ValueError("grid_step must be positive")
    ys, xs = np.meshgrid(np.arange(step // 2, height, step), np.arange(step // 2, width, step), indexing="ij")
    return xs.ravel(), ys.ravel()


def hue(pixels: np.ndarray) -> np.ndarray:
    """Hue in [0, 1); zero for grey pixels."""
    p = pixels.astype(np.float64) / 255.0
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    mx = p.max(axis=-1)
    mn = p.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta == 0, 1.0, delta)
    h = np.where(mx == r, ((g - b) / safe) % 6.0,
                 np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    return np.where(delta == 0, 0.0, h / 6.0) % 1.0


def quantize_unit(values: np.ndarray, bins: int) -> np.ndarray:
    return np.clip((values * bins).astype(np.int64), 0, bins - 1)


def pixel_word_ids(frame: Frame, grid_step: int, hue_bins: int = 12, intensity_bins: int = 8):
    """Channel-local hue and intensity word ids per grid point: ``(xs, ys, hue_ids, intensity_ids)``."""
    xs, ys = grid_points(frame.width, frame.height, grid_step)
    px = frame.pixels[ys, xs]
    hue_w = quantize_unit(hue(px), hue_bins)
    int_w = quantize_unit(frame.luma()[ys, xs] / 256.0, intensity_bins)
    return xs, ys, hue_w, int_w


def pixel_words(frame: Frame, grid_step: int, t: int = 0, hue_bins: int = 12, intensity_bins: int = 8,
                hue_offset: int = 0, intensity_offset: int | None = None) -> list[WordObservation]:
    """One hue word and one intensity word per grid point.

    By default hue occupies ids ``[0, hue_bins)`` and intensity follows it.
    """
    if intensity_offset is None:
        intensity_offset = hue_offset + hue_bins
    xs, ys, hue_w, int_w = pixel_word_ids(frame, grid_step, hue_bins, intensity_bins)
    out = []
    for x, y, hw, iw in zip(xs.tolist(), ys.tolist(), hue_w.tolist(), int_w.tolist()):
        out.append(WordObservation(t, x, y, hue_offset + hw))
        out.append(WordObservation(t, x, y, intensity_offset + iw))
    return out
