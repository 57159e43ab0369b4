"""Oriented Gaussian-derivative filter bank and the k-means texton codebook."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

SCALES = (1.0, 2.0, 4.0)
ORIENTATIONS = (0.0, 45.0, 90.0, 135.0)  # edge direction in degrees, x right / y down
TRUNCATE = 4.0


class FeatureError(ValueError):
    pass


def min_frame_size() -> int:
    return 2 * int(TRUNCATE * max(SCALES) + 0.5) + 1


def _derivative_kernels(sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Sampled Gaussian and its first two derivatives. The second derivative is
    # shifted to zero sum so flat regions give exactly no response.
    r = int(TRUNCATE * sigma + 0.5)
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    g1 = -x / sigma**2 * g
    g2 = (x * x / sigma**4 - 1.0 / sigma**2) * g
    g2 -= g2.mean()
    return g, g1, g2


def filter_bank_maps(gray: np.ndarray) -> np.ndarray:
    """Dense (12, H, W) energy maps, scale-major then orientation.

    Each channel is the energy of a quadrature-like pair: the first and second
    Gaussian derivatives taken across an edge of the given orientation, scale
    normalised by sigma and sigma**2.
    """
    gray = np.asarray(gray, np.float64)
    if min(gray.shape) < min_frame_size():
        raise FeatureError(f"frame must be at least {min_frame_size()} px on each side for the filter bank")
    out = []
    for s in SCALES:
        k = _derivative_kernels(s)
        d = {}
        for name, (oy, ox) in (("x", (0, 1)), ("y", (1, 0)), ("xx", (0, 2)), ("yy", (2, 0)), ("xy", (1, 1))):
            tmp = ndimage.convolve1d(gray, k[oy], axis=0, mode="reflect")
            d[name] = ndimage.convolve1d(tmp, k[ox], axis=1, mode="reflect")
        for theta in ORIENTATIONS:
            rad = np.deg2rad(theta)
            nx, ny = -np.sin(rad), np.cos(rad)  # normal to the edge
            odd = nx * d["x"] + ny * d["y"]
            even = nx * nx * d["xx"] + 2 * nx * ny * d["xy"] + ny * ny * d["yy"]
            out.append(np.hypot(s * odd, s * s * even))
    return np.stack(out)


def filter_responses(gray: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """12-dimensional response vectors at the given grid points, shape (n, 12)."""
    maps = filter_bank_maps(gray)
    return maps[:, ys, xs].T.copy()


@dataclass
class Codebook:
    centers: np.ndarray
    trained: bool = True

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    def quantize(self, vectors: np.ndarray) -> np.ndarray:
        """Nearest centre per row; ties go to the lowest index."""
        v = np.atleast_2d(np.asarray(vectors, np.float64))
        d2 = (v * v).sum(1)[:, None] - 2 * v @ self.centers.T + (self.centers * self.centers).sum(1)[None, :]
        return np.argmin(d2, axis=1)

    def to_json(self) -> str:
        return json.dumps({"K": self.K, "dim": int(self.centers.shape[1]),
                           "centers": self.centers.tolist()}, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Codebook":
        data = json.loads(text)
        centers = np.asarray(data["centers"], np.float64).reshape(data["K"], data["dim"])
        if not np.all(np.isfinite(centers)):
            raise FeatureError("codebook centres must be finite")
        return cls(centers)


def quantize(vector: np.ndarray, codebook: Codebook) -> int:
    return int(codebook.quantize(vector)[0])


def train_codebook(vectors: np.ndarray, K: int, seed: int = 0, max_iter: int = 100) -> Codebook:
    from sklearn.cluster import KMeans

    vectors = np.asarray(vectors, np.float64)
    if K <= 0:
        raise FeatureError("codebook size must be positive")
    if len(np.unique(vectors, axis=0)) < K:
        raise FeatureError(f"need at least {K} distinct training vectors, got {len(np.unique(vectors, axis=0))}")
    km = KMeans(n_clusters=K, n_init=1, max_iter=max_iter, random_state=seed, init="k-means++")
    km.fit(vectors)
    return Codebook(np.ascontiguousarray(km.cluster_centers_))
