"""Per-pixel mixture-of-Gaussians background model over intensity."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..stream import WordObservation


class BackgroundModel:
    """Online per-pixel Gaussian mixture (Stauffer-Grimson style).

    Components are ranked by weight / std. The leading components whose
    cumulative weight first exceeds ``bg_fraction`` model the background; a pixel
    is foreground when it matches none of them. The first frame seeds the model
    and is reported as entirely foreground.
    """

    def __init__(self, width: int, height: int, components: int = 3, threshold: float = 2.5,
                 bg_fraction: float = 0.7, learning_rate: float = 0.01, variance_floor: float = 4.0,
                 initial_variance: float = 225.0):
        if width <= 0 or height <= 0 or components <= 0:
            raise ValueError("background model needs positive size and component count")
        self.width, self.height, self.M = width, height, components
        self.threshold = threshold
        self.bg_fraction = bg_fraction
        self.learning_rate = learning_rate
        self.variance_floor = variance_floor
        self.initial_variance = max(initial_variance, variance_floor)
        shape = (components, height, width)
        self.weight = np.zeros(shape)
        self.weight[0] = 1.0
        self.mean = np.zeros(shape)
        self.var = np.full(shape, self.initial_variance)
        self.frames_seen = 0

    def update(self, intensity: np.ndarray) -> np.ndarray:
        """Fold one intensity image into the model; returns the foreground mask (H, W) bool."""
        x = np.asarray(intensity, np.float64)
        if x.shape != (self.height, self.width):
            raise ValueError(f"frame is {x.shape[::-1]}, model expects {(self.width, self.height)}")
        if self.frames_seen == 0:
            self.mean[0] = x
            self.frames_seen = 1
            return np.ones(x.shape, bool)
        self.frames_seen += 1
        lr = self.learning_rate
        rank = self.weight / np.sqrt(self.var)
        matches = (np.abs(x - self.mean) < self.threshold * np.sqrt(self.var)) & (self.weight > 0)
        any_match = matches.any(axis=0)
        best = np.argmax(np.where(matches, rank, -np.inf), axis=0)

        # background set from the ranking before this frame's update
        order = np.argsort(-rank, axis=0, kind="stable")
        w_sorted = np.take_along_axis(self.weight, order, axis=0)
        cum = np.cumsum(w_sorted, axis=0)
        in_bg_sorted = (cum - w_sorted) <= self.bg_fraction  # include components until the fraction is exceeded
        in_bg = np.zeros_like(in_bg_sorted)
        np.put_along_axis(in_bg, order, in_bg_sorted, axis=0)
        matched_bg = np.take_along_axis(in_bg, best[None], axis=0)[0]
        foreground = ~(any_match & matched_bg)

        hit = np.zeros(self.weight.shape, bool)
        np.put_along_axis(hit, best[None], any_match[None], axis=0)
        self.weight = (1 - lr) * self.weight + lr * hit
        diff = x[None] - self.mean
        self.mean = np.where(hit, self.mean + lr * diff, self.mean)
        self.var = np.where(hit, self.var + lr * (diff * diff - self.var), self.var)

        # unmatched pixels replace their weakest component
        miss = ~any_match
        if miss.any():
            weakest = np.argmin(rank, axis=0)
            rep = np.zeros(self.weight.shape, bool)
            np.put_along_axis(rep, weakest[None], miss[None], axis=0)
            self.weight = np.where(rep, lr, self.weight)
            self.mean = np.where(rep, x[None], self.mean)
            self.var = np.where(rep, self.initial_variance, self.var)
        self.weight /= self.weight.sum(axis=0, keepdims=True)
        self.var = np.maximum(self.var, self.variance_floor)
        return foreground


def mask_subsample(words: Sequence[WordObservation], mask: np.ndarray, bg_density_ratio: float,
                   rng: np.random.Generator) -> list[WordObservation]:
    """Keep every word on a foreground pixel, and each background word
    independently with probability ``bg_density_ratio``."""
    if not 0 <= bg_density_ratio <= 1:
        raise ValueError("bg_density_ratio must lie in [0, 1]")
    u = rng.random(len(words))
    return [w for w, ui in zip(words, u) if mask[w.y, w.x] or ui < bg_density_ratio]
