"""Overlapping subsection geometry and overlap-add synthesis.

The image is divided into P x Q subsections whose centers are uniformly
spaced and whose extents are twice the spacing, so adjacent subsections
overlap by half in each direction.  Each subsection carries a bilinear
interpolation window (a tent of full image size); after normalizing by
the pixel-wise total the windows form an exact partition of unity, which
makes overlap-add synthesis a plain weighted sum.
"""

from dataclasses import dataclass, field

import numpy as np

from .spectral import as_image

__all__ = ["TileGrid", "build_grid", "synthesize_object"]


@dataclass(frozen=True)
class TileGrid:
    """Subsection geometry for an M x N image.

    ``windows[p, q]`` is the normalized interpolation window of tile
    (p, q), full image size; the windows sum to 1 at every pixel.
    Tiles are indexed 0-based: p in [0, P), q in [0, Q).
    """

    shape: tuple[int, int]
    tiles: tuple[int, int]
    row_centers: np.ndarray   # (P,) center row per tile row, pixels
    col_centers: np.ndarray   # (Q,) center column per tile column, pixels
    tile_length: tuple[float, float]   # (l_m, l_n), pixels
    windows: np.ndarray = field(repr=False)   # (P, Q, M, N)

    @property
    def n_tiles(self) -> int:
        return self.tiles[0] * self.tiles[1]

    def center(self, p: int, q: int) -> tuple[int, int]:
        """Center pixel of tile (p, q)."""
        self._check_index(p, q)
        return int(self.row_centers[p]), int(self.col_centers[q])

    def window(self, p: int, q: int) -> np.ndarray:
        """Normalized interpolation window of tile (p, q)."""
        self._check_index(p, q)
        return self.windows[p, q]

    def _check_index(self, p: int, q: int) -> None:
        if not (0 <= p < self.tiles[0] and 0 <= q < self.tiles[1]):
            raise IndexError(f"tile index ({p}, {q}) out of range for {self.tiles} grid")


def _tent(length: int, centers: np.ndarray, half_width: float) -> np.ndarray:
    """1-D interpolation tents: max(1 - |c - x| / half_width, 0), one row
    per center."""
    x = np.arange(length, dtype=np.float64)
    return np.maximum(1.0 - np.abs(centers[:, None] - x[None, :]) / half_width, 0.0)


def build_grid(m: int, n: int, p_tiles: int, q_tiles: int) -> TileGrid:
    """Build the P x Q half-overlap subsection grid for an M x N image.

    Centers sit at ((p + 1/2) * M / P) rounded to the nearest pixel, and
    the tile extents are l_m = 2M/P, l_n = 2N/Q.  Raw tent windows are
    normalized by their pixel-wise total so that exterior pixels, which
    fewer tiles reach, still receive total weight 1.

    A 1 x 1 grid is the degenerate single-subsection case: one all-ones
    window, reducing overlap-add to the identity.
    """
    if p_tiles < 1 or q_tiles < 1:
        raise ValueError(f"need at least 1 tile per axis, got {p_tiles} x {q_tiles}")
    if m < 2 * p_tiles or n < 2 * q_tiles:
        raise ValueError(
            f"image {m} x {n} too small for a {p_tiles} x {q_tiles} grid"
        )

    row_centers = np.rint((np.arange(p_tiles) + 0.5) * m / p_tiles).astype(np.int64)
    col_centers = np.rint((np.arange(q_tiles) + 0.5) * n / q_tiles).astype(np.int64)
    l_m = 2.0 * m / p_tiles
    l_n = 2.0 * n / q_tiles

    rows = _tent(m, row_centers.astype(np.float64), l_m / 2.0)   # (P, M)
    cols = _tent(n, col_centers.astype(np.float64), l_n / 2.0)   # (Q, N)
    windows = rows[:, None, :, None] * cols[None, :, None, :]    # (P, Q, M, N)

    total = windows.sum(axis=(0, 1))
    if (total <= 0).any():
        raise ValueError("tile windows leave uncovered pixels; grid too coarse")
    windows /= total

    return TileGrid(
        shape=(m, n),
        tiles=(p_tiles, q_tiles),
        row_centers=row_centers,
        col_centers=col_centers,
        tile_length=(l_m, l_n),
        windows=windows,
    )


def synthesize_object(local_objects, grid: TileGrid) -> np.ndarray:
    """Overlap-add synthesis: sum of window-weighted local objects.

    ``local_objects`` is indexable as [p][q] (or an array of shape
    (P, Q, M, N)), one full-size local estimate per tile.  Tiles are
    accumulated in fixed row-major order so the result is independent of
    how the local estimates were produced.
    """
    p_tiles, q_tiles = grid.tiles
    out = np.zeros(grid.shape, dtype=np.float64)
    for p in range(p_tiles):
        row = local_objects[p]
        for q in range(q_tiles):
            local = as_image(row[q])
            if local.shape != grid.shape:
                raise ValueError(
                    f"local object for tile ({p}, {q}) has shape {local.shape}, "
                    f"expected {grid.shape}"
                )
            out += local * grid.windows[p, q]
    return out
