"""Local PSF estimation and the spatial-domain projection steps.

A local PSF is estimated by single-frame deconvolution of an image
against the current object restricted to the subsection of interest
with a Gaussian apodization kernel.  The raw estimate is then projected
onto the feasible set: nonnegative, unit mass, and supported on a disk
whose center follows the estimate's center of mass (so translated PSFs,
the cause of image morph, stay representable).

Isoplanatism weights compare a PSF against a complementary estimate
obtained with a wider apodization: the more the two disagree, the more
the blur varies across the subsection and the smaller the weight.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import ObjectCollapseError, PsfCollapseError
from .filters import masked_reciprocal
from .spectral import as_image, center_index, dft2, idft2, kernel_spectrum, to_centered
from .tiling import TileGrid

__all__ = [
    "ApodizationKernel",
    "IsoplanatismParams",
    "LocalPsfSet",
    "apodization_kernel",
    "estimate_local_psf",
    "project_psf",
    "project_object",
    "compute_weight",
    "support_disk",
]


@dataclass(frozen=True)
class ApodizationKernel:
    """Gaussian isolation mask exp(-((m-c0)^2 + (n-c1)^2) / width^2),
    evaluated on the plain pixel lattice (no wrapping, no normalization)."""

    center: tuple[int, int]
    width: float
    values: np.ndarray


@dataclass(frozen=True)
class IsoplanatismParams:
    """Weight law parameters: a = min(d^(-2 * sensitivity), cap) with
    d the Frobenius distance between a PSF and its complementary twin."""

    sensitivity: float = 1.5
    cap: float = 1e12

    def __post_init__(self):
        if not self.sensitivity > 0:
            raise ValueError(f"sensitivity must be > 0, got {self.sensitivity}")
        if not np.isfinite(self.cap) or self.cap <= 0:
            raise ValueError(f"cap must be finite and positive, got {self.cap}")


def apodization_kernel(grid: TileGrid, p: int, q: int, width: float) -> ApodizationKernel:
    """Gaussian apodization mask centered on tile (p, q)."""
    if not width > 0:
        raise ValueError(f"width must be > 0, got {width}")
    c0, c1 = grid.center(p, q)
    m, n = grid.shape
    rows = (np.arange(m, dtype=np.float64) - c0) ** 2
    cols = (np.arange(n, dtype=np.float64) - c1) ** 2
    values = np.exp(-(rows[:, None] + cols[None, :]) / width**2)
    return ApodizationKernel(center=(c0, c1), width=float(width), values=values)


def estimate_local_psf(image_spectrum, obj, kernel: ApodizationKernel, epsilon: float) -> np.ndarray:
    """Raw local PSF estimate: deconvolve one image by the apodized object.

        h = IDFT( I / [DFT(obj * K)]_{> eps} )

    returned in the centered-kernel convention (real part).  Raises
    ObjectCollapseError when the apodized object spectrum lies entirely
    below the threshold, which would make the estimate vanish.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    obj = as_image(obj)
    image_spectrum = np.asarray(image_spectrum, dtype=np.complex128)
    if image_spectrum.shape != obj.shape:
        raise ValueError(
            f"shape mismatch: image spectrum {image_spectrum.shape}, object {obj.shape}"
        )
    recip = apodized_reciprocal(obj, kernel, epsilon)
    return to_centered(idft2(image_spectrum * recip).real)


def apodized_reciprocal(obj, kernel: ApodizationKernel, epsilon: float) -> np.ndarray:
    """Thresholded reciprocal of the apodized-object spectrum.

    Shared across the frames of one subsection: multiplying an image
    spectrum by this array performs the division in
    :func:`estimate_local_psf`.
    """
    den = dft2(as_image(obj) * kernel.values)
    recip = masked_reciprocal(den, epsilon)
    if not recip.any():
        raise ObjectCollapseError(
            "apodized object spectrum is entirely below the division threshold"
        )
    return recip


@lru_cache(maxsize=32)
def _centered_disk(shape: tuple[int, int], radius: int) -> np.ndarray:
    c0, c1 = center_index(shape)
    rows = (np.arange(shape[0]) - c0) ** 2
    cols = (np.arange(shape[1]) - c1) ** 2
    return (rows[:, None] + cols[None, :]) <= radius * radius


def support_disk(shape, center, radius: int) -> np.ndarray:
    """Boolean mask of the pixels within ``radius`` of ``center``.

    The disk wraps periodically, consistent with circular convolution.
    """
    mask = _centered_disk(tuple(shape), int(radius))
    c0, c1 = center_index(shape)
    return np.roll(mask, (center[0] - c0, center[1] - c1), axis=(0, 1))


def _round_toward(value: float, anchor: int) -> int:
    """Round to the nearest integer; exact halves go toward ``anchor``."""
    low = int(np.floor(value))
    frac = value - low
    if frac > 0.5:
        return low + 1
    if frac < 0.5:
        return low
    return low + 1 if abs(low + 1 - anchor) < abs(low - anchor) else low


def project_psf(estimate, radius: int) -> tuple[np.ndarray, tuple[int, int]]:
    """Project a raw PSF estimate onto the feasible set.

    Steps: clip to the nonnegative real part, normalize to unit mass,
    locate the intensity centroid (rounded to the nearest pixel, ties
    toward the array center), zero everything strictly outside the disk
    of ``radius`` around it, and renormalize so the kernel keeps unit
    mass (and hence a unit-DC spectrum).

    A very diffuse estimate can put the centroid inside a clipped-out
    valley whose whole disk is zero; the disk is then recentered on the
    peak pixel, which always carries mass, instead of aborting the run.

    Returns the projected centered kernel and the disk center.  Raises
    PsfCollapseError when nothing survives clipping.
    """
    if radius < 1:
        raise ValueError(f"support radius must be >= 1, got {radius}")
    estimate = np.asarray(estimate)
    psf = np.maximum(estimate.real.astype(np.float64, copy=True), 0.0)
    total = psf.sum()
    if not total > 0:
        raise PsfCollapseError("PSF estimate is nonpositive everywhere")
    psf /= total

    m, n = psf.shape
    c0, c1 = center_index(psf.shape)
    row_mass = psf.sum(axis=1)
    col_mass = psf.sum(axis=0)
    centroid = (
        _round_toward(float(row_mass @ np.arange(m)), c0),
        _round_toward(float(col_mass @ np.arange(n)), c1),
    )

    masked = np.where(support_disk(psf.shape, centroid, radius), psf, 0.0)
    total = masked.sum()
    if not total > 0:
        peak = np.unravel_index(int(np.argmax(psf)), psf.shape)
        centroid = (int(peak[0]), int(peak[1]))
        masked = np.where(support_disk(psf.shape, centroid, radius), psf, 0.0)
        total = masked.sum()
        if not total > 0:
            raise PsfCollapseError(
                f"no PSF mass inside the support disk at {centroid} (radius {radius})"
            )
    return masked / total, centroid


def project_object(estimate) -> np.ndarray:
    """Project an object estimate onto the feasible set: clip the real
    part to nonnegative values and normalize to unit total intensity."""
    estimate = np.asarray(estimate)
    obj = np.maximum(estimate.real.astype(np.float64, copy=True), 0.0)
    total = obj.sum()
    if not total > 0:
        raise ObjectCollapseError("object estimate is nonpositive everywhere")
    return obj / total


class LocalPsfSet:
    """Per-(tile, frame) PSFs with their adaptive support centers.

    Projected PSFs vanish outside a disk of ``radius`` pixels, so only
    the (2*radius+1)^2 patch around each support center is stored; full
    centered kernels and their spectra are materialized on demand.  Each
    entry also keeps the complementary PSF (the wider-apodization twin
    used for the isoplanatism weights).
    """

    def __init__(self, tiles: tuple[int, int], n_frames: int, shape: tuple[int, int], radius: int):
        m, n = shape
        if radius < 1 or radius > (min(m, n) - 1) // 2:
            raise ValueError(
                f"support radius {radius} does not fit a {m} x {n} kernel"
            )
        self.tiles = tiles
        self.n_frames = n_frames
        self.shape = (m, n)
        self.radius = int(radius)
        d = 2 * self.radius + 1
        c = center_index(shape)
        self.patches = np.zeros(tiles + (n_frames, d, d), dtype=np.float64)
        self.centers = np.zeros(tiles + (n_frames, 2), dtype=np.int64)
        self.centers[..., 0] = c[0]
        self.centers[..., 1] = c[1]
        self.comp_patches = np.zeros_like(self.patches)
        self.comp_centers = self.centers.copy()

    @classmethod
    def deltas(cls, tiles, n_frames, shape, radius) -> "LocalPsfSet":
        """Initial set: every PSF is a centered delta (identity blur)."""
        out = cls(tiles, n_frames, shape, radius)
        out.patches[..., radius, radius] = 1.0
        out.comp_patches[..., radius, radius] = 1.0
        return out

    def _extract(self, full: np.ndarray, center) -> np.ndarray:
        c0, c1 = center_index(self.shape)
        r = self.radius
        rolled = np.roll(full, (c0 - center[0], c1 - center[1]), axis=(0, 1))
        return rolled[c0 - r : c0 + r + 1, c1 - r : c1 + r + 1].copy()

    def _materialize(self, patch: np.ndarray, center) -> np.ndarray:
        c0, c1 = center_index(self.shape)
        r = self.radius
        full = np.zeros(self.shape, dtype=np.float64)
        full[c0 - r : c0 + r + 1, c1 - r : c1 + r + 1] = patch
        return np.roll(full, (center[0] - c0, center[1] - c1), axis=(0, 1))

    def store(self, p, q, s, psf, center, complementary, comp_center) -> None:
        """Record the projected PSF pair of tile (p, q), frame s."""
        self.patches[p, q, s] = self._extract(psf, center)
        self.centers[p, q, s] = center
        self.comp_patches[p, q, s] = self._extract(complementary, comp_center)
        self.comp_centers[p, q, s] = comp_center

    def kernel(self, p, q, s) -> np.ndarray:
        """Full-size centered kernel of tile (p, q), frame s."""
        return self._materialize(self.patches[p, q, s], self.centers[p, q, s])

    def complementary(self, p, q, s) -> np.ndarray:
        """Full-size complementary kernel of tile (p, q), frame s."""
        return self._materialize(self.comp_patches[p, q, s], self.comp_centers[p, q, s])

    def spectrum(self, p, q, s) -> np.ndarray:
        """OTF of tile (p, q), frame s (recomputed, not cached)."""
        return kernel_spectrum(self.kernel(p, q, s))

    def support_center(self, p, q, s) -> tuple[int, int]:
        cy, cx = self.centers[p, q, s]
        return int(cy), int(cx)

    def drop_first_frame(self) -> None:
        """Slide the frame axis for online processing: discard frame 0 and
        open a delta-initialized slot at the end."""
        c = center_index(self.shape)
        r = self.radius
        for arr in (self.patches, self.comp_patches):
            arr[:, :, :-1] = arr[:, :, 1:]
            arr[:, :, -1] = 0.0
            arr[:, :, -1, r, r] = 1.0
        for arr in (self.centers, self.comp_centers):
            arr[:, :, :-1] = arr[:, :, 1:]
            arr[:, :, -1] = c


def compute_weight(psf, complementary, params: IsoplanatismParams) -> float:
    """Isoplanatism weight of one (subsection, frame) pair.

    Monotone decreasing in the Frobenius distance between the PSF and
    its complementary estimate; capped so identical estimates (zero
    distance) stay finite.
    """
    psf = np.asarray(psf, dtype=np.float64)
    complementary = np.asarray(complementary, dtype=np.float64)
    if psf.shape != complementary.shape:
        raise ValueError(
            f"shape mismatch: PSF {psf.shape}, complementary {complementary.shape}"
        )
    distance = float(np.linalg.norm(psf - complementary))
    if distance == 0.0:
        return params.cap
    with np.errstate(over="ignore", divide="ignore"):
        weight = distance ** (-2.0 * params.sensitivity)
    return float(min(weight, params.cap))
