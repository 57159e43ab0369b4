"""Spatiotemporal cells and the neighbourhoods topic priors are pooled over."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class CellIndex(NamedTuple):
    cx: int
    cy: int
    t: int


@dataclass(frozen=True)
class NeighborhoodSpec:
    spatial_radius: int = 1
    temporal_radius: int = 1

    def __post_init__(self):
        if self.spatial_radius < 0 or self.temporal_radius < 0:
            raise ValueError("neighbourhood radii must be non-negative")


@dataclass(frozen=True)
class GridBounds:
    """Extent of the cell grid: columns, rows, and the largest frame index."""

    nx: int
    ny: int
    max_t: int


def cell_of(x: int, y: int, t: int, cell_size: int) -> CellIndex:
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    return CellIndex(x // cell_size, y // cell_size, t)


def neighbors(c: CellIndex, spec: NeighborhoodSpec, bounds: GridBounds) -> set[CellIndex]:
    """All cells within the L-inf spatial ball and the temporal window of ``c``, clipped to bounds."""
    rs, rt = spec.spatial_radius, spec.temporal_radius
    out = {c}
    for t in range(max(0, c.t - rt), min(bounds.max_t, c.t + rt) + 1):
        for cy in range(max(0, c.cy - rs), min(bounds.ny - 1, c.cy + rs) + 1):
            for cx in range(max(0, c.cx - rs), min(bounds.nx - 1, c.cx + rs) + 1):
                out.add(CellIndex(cx, cy, t))
    return out
