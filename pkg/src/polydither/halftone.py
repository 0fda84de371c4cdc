"""Runtime dithering against the tiling-based threshold structure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyomino import ProductionRule, Tiling, Transform, cover_rectangle
from .ranktable import RankTable
from .structure import PixelGeometry, classify_tiles


class UnknownClass(LookupError):
    """A tile of the view has a structural class the table does not know."""


@dataclass(frozen=True)
class ThresholdView:
    """Per-pixel ranks of an image rectangle; immutable once built."""

    width: int
    height: int
    offset: tuple[int, int]
    scale: int
    pixel_count: int  # 6 S^2
    ranks: np.ndarray  # (height, width)
    tile: np.ndarray  # (height, width) tile index into ``tiling``
    classes: np.ndarray  # class id per tile of ``tiling`` (-1 if not in view)
    tiling: Tiling

    @property
    def thresholds(self) -> np.ndarray:
        return (self.ranks + 0.5) / self.pixel_count

    def threshold_at(self, x: int, y: int) -> float:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise IndexError(f"pixel ({x}, {y}) outside {self.width}x{self.height} view")
        return (int(self.ranks[y, x]) + 0.5) / self.pixel_count

    def complete_tiles(self) -> np.ndarray:
        """Tiles whose every pixel lies inside the view."""
        counts = np.bincount(self.tile.reshape(-1), minlength=len(self.tiling))
        return np.nonzero(counts == self.pixel_count)[0]


def build_threshold_view(
    width: int,
    height: int,
    table: RankTable,
    rule: ProductionRule,
    offset: tuple[int, int] = (0, 0),
) -> ThresholdView:
    """Threshold view of ``width`` x ``height`` pixels starting at pixel ``offset`` of the structure."""
    if width < 1 or height < 1:
        raise ValueError("view must be at least 1x1 pixels")
    if table.registry is None:
        raise ValueError("table has no registry attached")
    S = table.scale
    ox, oy = offset
    cx0, cy0 = ox // S, oy // S
    sx, sy = ox - cx0 * S, oy - cy0 * S  # pixel shift inside the first cell
    wc = (sx + width + S - 1) // S
    hc = (sy + height + S - 1) // S
    tiling = cover_rectangle(wc, hc, rule, seed=Transform(translation=(cx0, cy0)))
    rect_tiles = tiling.rect_tiles()
    ids, _ = classify_tiles(tiling, table.registry, rect_tiles)
    if (ids < 0).any():
        raise UnknownClass(f"{int((ids < 0).sum())} tiles of the view have no class in the table")
    classes = np.full(len(tiling), -1, dtype=np.int64)
    classes[rect_tiles] = ids

    geo = PixelGeometry(tiling.shape, S)
    # tile-local raster index -> rank, per tile, via the class rank rows
    px = np.arange(width) + sx
    py = np.arange(height) + sy
    wx, wy, _, _ = tiling.window
    tile = tiling.owner[(py // S)[:, None] - wy, (px // S)[None, :] - wx]
    lx = px[None, :] - tiling.origin[tile, 0] * S
    ly = py[:, None] - tiling.origin[tile, 1] * S
    hmax = max(g.shape[0] for g in geo.index)
    wmax = max(g.shape[1] for g in geo.index)
    stack = np.full((8, hmax, wmax), -1, dtype=np.int64)
    for o, g in enumerate(geo.index):
        stack[o, : g.shape[0], : g.shape[1]] = g
    local = stack[tiling.orient[tile], ly, lx]
    assert (local >= 0).all()
    ranks = table.ranks[classes[tile], local]
    return ThresholdView(width, height, (ox, oy), S, table.pixel_count, ranks, tile, classes, tiling)


def dither(image: np.ndarray, view: ThresholdView) -> np.ndarray:
    """Binary image, True = black: a pixel is black iff its intensity is below its threshold."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (view.height, view.width):
        raise ValueError(f"image is {image.shape[::-1]}, view is {(view.width, view.height)}")
    if image.size and (image.min() < 0 or image.max() > 1):
        raise ValueError("intensities must lie in [0, 1]")
    return image < view.thresholds


def ramp_image(width: int, height: int) -> np.ndarray:
    """Horizontal ramp from 0 (left column) to 1 (right column)."""
    if width < 2:
        raise ValueError("ramp needs width >= 2")
    return np.broadcast_to(np.linspace(0.0, 1.0, width)[None, :], (height, width)).copy()


def dither_ramp(view: ThresholdView) -> np.ndarray:
    return dither(ramp_image(view.width, view.height), view)


def black_count(g: float, pixel_count: int) -> int:
    """Black pixels per complete tile at constant intensity ``g``."""
    r = np.arange(pixel_count)
    return int(((r + 0.5) / pixel_count > g).sum())
