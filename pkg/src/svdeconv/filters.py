"""Spectral-domain deconvolution filters.

All filters operate bin-wise on full-size spectra.  Division is guarded:
bins whose denominator magnitude does not exceed the threshold are set
to zero, and any quotient that overflows past it is treated the same
way, so outputs are always finite.
"""

from dataclasses import dataclass, field

import numpy as np

from .spectral import idft2

__all__ = [
    "WeightTable",
    "masked_reciprocal",
    "thresholded_divide",
    "wiener",
    "multiframe_wiener",
    "weighted_multiframe",
]


@dataclass
class WeightTable:
    """Per-(tile, frame) isoplanatism weights, shape (P, Q, S)."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError(f"expected a (P, Q, S) array, got shape {self.values.shape}")
        if not np.isfinite(self.values).all() or (self.values < 0).any():
            raise ValueError("weights must be finite and nonnegative")

    @classmethod
    def uniform(cls, tiles, n_frames) -> "WeightTable":
        return cls(np.ones(tuple(tiles) + (n_frames,)))

    def tile_means(self) -> np.ndarray:
        """Per-tile average weight, shape (P, Q)."""
        return self.values.mean(axis=2)

    def row(self, p, q) -> np.ndarray:
        """All frame weights of tile (p, q)."""
        return self.values[p, q]


def masked_reciprocal(den, threshold: float) -> np.ndarray:
    """1/den where |den| > threshold, else 0.  Overflowing bins become 0."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    den = np.asarray(den)
    out = np.zeros(den.shape, dtype=np.complex128)
    mask = np.abs(den) > threshold
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out[mask] = 1.0 / den[mask]
    np.nan_to_num(out, copy=False, nan=0.0, posinf=0.0, neginf=0.0)
    return out


def thresholded_divide(num, den, threshold: float) -> np.ndarray:
    """Bin-wise num/den where |den| > threshold, 0 elsewhere.

    Total on finite inputs: never produces NaN or Inf.
    """
    num = np.asarray(num)
    if num.shape != np.shape(den):
        raise ValueError(f"shape mismatch: numerator {num.shape}, denominator {np.shape(den)}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = num * masked_reciprocal(den, threshold)
    np.nan_to_num(out, copy=False, nan=0.0, posinf=0.0, neginf=0.0)
    return out


def wiener(image_spectrum, otf, snr: float) -> np.ndarray:
    """Single-frame Wiener filter: conj(H) * I / (|H|^2 + 1/snr).

    ``snr = inf`` gives the inverse filter on bins where |H| > 0 and zero
    on the rest.
    """
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    image_spectrum = np.asarray(image_spectrum, dtype=np.complex128)
    otf = np.asarray(otf, dtype=np.complex128)
    if image_spectrum.shape != otf.shape:
        raise ValueError(
            f"shape mismatch: image {image_spectrum.shape}, OTF {otf.shape}"
        )
    num = np.conj(otf) * image_spectrum
    den = np.abs(otf) ** 2
    if np.isinf(snr):
        return thresholded_divide(num, den, 0.0)
    return num / (den + 1.0 / snr)


def _stack_spectra(spectra, name: str) -> np.ndarray:
    arr = np.asarray(spectra, dtype=np.complex128)
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty stack of 2-D spectra")
    return arr


def multiframe_wiener(image_spectra, otfs) -> np.ndarray:
    """Multi-frame filter: sum_s conj(H_s) I_s / sum_s |H_s|^2.

    Bins where every OTF vanishes are set to zero.  With a single frame
    this reduces to the inverse filter on the OTF's support.
    """
    image_spectra = _stack_spectra(image_spectra, "image spectra")
    otfs = _stack_spectra(otfs, "OTFs")
    if image_spectra.shape != otfs.shape:
        raise ValueError(
            f"shape mismatch: images {image_spectra.shape}, OTFs {otfs.shape}"
        )
    num = np.zeros(image_spectra.shape[1:], dtype=np.complex128)
    den = np.zeros(image_spectra.shape[1:], dtype=np.float64)
    for i_s, h_s in zip(image_spectra, otfs):
        num += np.conj(h_s) * i_s
        den += np.abs(h_s) ** 2
    return thresholded_divide(num, den, 0.0)


def weighted_multiframe(image_spectra, otfs, weights, epsilon: float) -> np.ndarray:
    """Weighted multi-frame deconvolution of one subsection.

    Every frame contributes proportionally to its weight:

        o = real( IDFT( [sum_s a_s conj(H_s) I_s]
                        / [sum_s a_s |H_s|^2]_{> eps * mean(a)} ) )

    The inputs are full-image spectra; locality comes from the per-tile
    OTFs and from the window applied afterwards during overlap-add.
    With uniform weights and ``epsilon = 0`` this is exactly
    :func:`multiframe_wiener` followed by the inverse DFT.  The output is
    invariant to rescaling all weights by a common positive factor.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    image_spectra = _stack_spectra(image_spectra, "image spectra")
    otfs = _stack_spectra(otfs, "OTFs")
    if image_spectra.shape != otfs.shape:
        raise ValueError(
            f"shape mismatch: images {image_spectra.shape}, OTFs {otfs.shape}"
        )
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (image_spectra.shape[0],):
        raise ValueError(
            f"expected {image_spectra.shape[0]} weights, got shape {weights.shape}"
        )
    if not np.isfinite(weights).all() or (weights < 0).any():
        raise ValueError("weights must be finite and nonnegative")
    if not weights.any():
        raise ValueError("all weights are zero; upstream weighting failed")

    num = np.zeros(image_spectra.shape[1:], dtype=np.complex128)
    den = np.zeros(image_spectra.shape[1:], dtype=np.float64)
    for a_s, i_s, h_s in zip(weights, image_spectra, otfs):
        if a_s == 0.0:
            continue
        num += a_s * np.conj(h_s) * i_s
        den += a_s * np.abs(h_s) ** 2
    mean_weight = weights.mean()
    return idft2(thresholded_divide(num, den, epsilon * mean_weight)).real
