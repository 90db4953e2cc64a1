"""Restoration quality metrics: Fourier ring correlation and SSIM.

FRC compares two images ring by ring in the frequency plane: bins are
grouped by their rounded radial distance from DC, and each ring reports
the normalized cross-correlation of the two spectra over its bins.  A
scalar quality summary is the largest ring whose correlation still
exceeds the two-sigma reference curve.

SSIM is the mean of the local structural-similarity map computed from
Gaussian-windowed means, variances, and covariance.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .spectral import as_image, dft2

__all__ = [
    "FrcCurve",
    "SsimParams",
    "frc",
    "two_sigma_curve",
    "rn_max",
    "ssim",
    "fourier_shift",
    "align_to",
    "write_frc_csv",
    "read_frc_csv",
]

# Crossing comparisons tolerate this much slack so that exact ties
# (e.g. FRC = threshold = 1 on ring 1 of identical images) count as above.
CROSSING_TOLERANCE = 1e-9


@dataclass
class FrcCurve:
    """Per-ring correlation between two spectra.

    ``rings[i]`` is the ring index (rounded radial frequency in bins),
    ``correlation`` the real part of the normalized cross-correlation,
    ``magnitude`` its absolute value, ``counts`` the bins per ring, and
    ``complete`` whether the ring lies entirely inside the frequency
    lattice (partial corner rings are retained but flagged and ignored
    by the crossing summary).
    """

    rings: np.ndarray
    correlation: np.ndarray
    magnitude: np.ndarray
    counts: np.ndarray
    threshold: np.ndarray
    complete: np.ndarray = field(repr=False)
    threshold_factor: float = 2.0


def _ring_index(shape) -> tuple[np.ndarray, int]:
    m, n = shape
    fy = np.fft.fftfreq(m) * m
    fx = np.fft.fftfreq(n) * n
    radius = np.hypot(fy[:, None], fx[None, :])
    return np.rint(radius).astype(np.int64), (min(m, n) - 1) // 2


def two_sigma_curve(counts, factor: float = 2.0) -> np.ndarray:
    """Reference curve threshold[r] = factor / sqrt(n_r / 2).

    The default factor 2 is the conventional two-sigma significance
    level for ring correlations.
    """
    counts = np.asarray(counts, dtype=np.float64)
    out = np.full(counts.shape, np.inf)
    np.divide(factor, np.sqrt(counts / 2.0), out=out, where=counts > 0)
    return out


def frc(reference, estimate, threshold_factor: float = 2.0) -> FrcCurve:
    """Fourier ring correlation between a reference and an estimate.

    Per ring r:  sum(O * conj(Ô)) / sqrt(sum|O|^2 * sum|Ô|^2)
    over the bins of the ring.  Rings with no spectral energy in either
    image report zero correlation.
    """
    reference = as_image(reference)
    estimate = as_image(estimate)
    if reference.shape != estimate.shape:
        raise ValueError(
            f"shape mismatch: reference {reference.shape}, estimate {estimate.shape}"
        )
    spec_ref = dft2(reference)
    spec_est = dft2(estimate)

    ring, max_complete = _ring_index(reference.shape)
    n_rings = int(ring.max()) + 1
    flat = ring.ravel()
    counts = np.bincount(flat, minlength=n_rings)

    cross = spec_ref * np.conj(spec_est)
    cross_re = np.bincount(flat, weights=cross.real.ravel(), minlength=n_rings)
    cross_im = np.bincount(flat, weights=cross.imag.ravel(), minlength=n_rings)
    power_ref = np.bincount(flat, weights=np.abs(spec_ref).ravel() ** 2, minlength=n_rings)
    power_est = np.bincount(flat, weights=np.abs(spec_est).ravel() ** 2, minlength=n_rings)

    populated = counts > 0
    norm = np.sqrt(power_ref * power_est)
    numerator = cross_re + 1j * cross_im
    correlation = np.zeros(n_rings, dtype=np.complex128)
    np.divide(numerator, norm, out=correlation, where=norm > 0)

    rings = np.nonzero(populated)[0]
    return FrcCurve(
        rings=rings,
        correlation=correlation[rings].real,
        magnitude=np.abs(correlation[rings]),
        counts=counts[rings],
        threshold=two_sigma_curve(counts[rings], threshold_factor),
        complete=rings <= max_complete,
        threshold_factor=threshold_factor,
    )


def rn_max(curve: FrcCurve) -> int:
    """Largest ring, scanning outward, up to which the correlation stays
    above the reference curve.

    Only complete rings participate, and rings whose threshold reaches 1
    are skipped as uninformative: a normalized correlation can never
    exceed such a threshold (ring 1 of any image has 8 bins and hence a
    threshold of exactly 1), so those rings carry no evidence either
    way.  Ring 0 (DC) is the baseline; if the first informative ring
    fails, the result is 0.  The scan stops at the first failing ring,
    so spurious re-crossings of noisy high-frequency rings are ignored.
    """
    best = 0
    for ring, value, threshold, complete in zip(
        curve.rings, curve.correlation, curve.threshold, curve.complete
    ):
        if ring == 0:
            continue
        if not complete:
            break
        if threshold > 1.0 - CROSSING_TOLERANCE:
            continue
        if value >= threshold - CROSSING_TOLERANCE:
            best = int(ring)
        else:
            break
    return best


@dataclass(frozen=True)
class SsimParams:
    """Local-statistics window and stabilizer constants.

    The default window is the common 11 x 11 Gaussian with sigma 1.5;
    pass ``window`` explicitly (e.g. a normalized box) to override it.
    Stabilizers are c1 = (k1 * L)^2 and c2 = (k2 * L)^2 for dynamic
    range L.
    """

    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    window: np.ndarray | None = None

    def make_window(self) -> np.ndarray:
        if self.window is not None:
            w = np.asarray(self.window, dtype=np.float64)
            if w.ndim != 2 or (w < 0).any() or w.sum() <= 0:
                raise ValueError("window must be a nonnegative 2-D array with mass")
            return w / w.sum()
        half = (self.window_size - 1) / 2.0
        x = np.arange(self.window_size) - half
        g = np.exp(-(x**2) / (2.0 * self.window_sigma**2))
        w = g[:, None] * g[None, :]
        return w / w.sum()

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


def _local_stats(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, window.shape)
    return np.einsum("ijkl,kl->ij", view, window)


def ssim(reference, estimate, params: SsimParams = SsimParams()) -> float:
    """Mean structural similarity between two images of equal shape.

        map = (2 mu_o mu_e + c1)(2 cov + c2)
              / ((mu_o^2 + mu_e^2 + c1)(var_o + var_e + c2))

    with window-weighted local statistics, evaluated where the window
    fits entirely inside the images, then averaged.
    """
    reference = as_image(reference)
    estimate = as_image(estimate)
    if reference.shape != estimate.shape:
        raise ValueError(
            f"shape mismatch: reference {reference.shape}, estimate {estimate.shape}"
        )
    window = params.make_window()
    if window.shape[0] > reference.shape[0] or window.shape[1] > reference.shape[1]:
        raise ValueError(
            f"window {window.shape} larger than images {reference.shape}"
        )

    mu_r = _local_stats(reference, window)
    mu_e = _local_stats(estimate, window)
    var_r = _local_stats(reference * reference, window) - mu_r * mu_r
    var_e = _local_stats(estimate * estimate, window) - mu_e * mu_e
    cov = _local_stats(reference * estimate, window) - mu_r * mu_e

    c1, c2 = params.c1, params.c2
    numerator = (2.0 * mu_r * mu_e + c1) * (2.0 * cov + c2)
    denominator = (mu_r * mu_r + mu_e * mu_e + c1) * (var_r + var_e + c2)
    return float(np.mean(numerator / denominator))


def fourier_shift(image, dy: float, dx: float) -> np.ndarray:
    """Circularly shift an image by a (possibly fractional) offset via a
    spectral phase ramp."""
    image = as_image(image)
    m, n = image.shape
    ky = np.fft.fftfreq(m)[:, None]
    kx = np.fft.fftfreq(n)[None, :]
    ramp = np.exp(-2j * np.pi * (ky * dy + kx * dx))
    return np.fft.ifft2(np.fft.fft2(image) * ramp).real


def align_to(estimate, reference, *, substep: float = 0.1):
    """Remove the global translation and scale ambiguity of a blind
    estimate before comparing it to a reference.

    Finds the circular shift (integer peak of the cross-correlation,
    refined on a +-1 pixel grid of ``substep`` spacing) and the scalar
    gain minimizing the L2 distance to the reference.  Returns
    ``(aligned, shift, relative_error)``.
    """
    estimate = as_image(estimate)
    reference = as_image(reference)
    if estimate.shape != reference.shape:
        raise ValueError(
            f"shape mismatch: estimate {estimate.shape}, reference {reference.shape}"
        )
    m, n = estimate.shape
    xcorr = np.fft.ifft2(np.fft.fft2(reference) * np.conj(np.fft.fft2(estimate))).real
    dy, dx = np.unravel_index(np.argmax(xcorr), xcorr.shape)
    dy = dy if dy <= m // 2 else dy - m
    dx = dx if dx <= n // 2 else dx - n

    ref_norm = np.linalg.norm(reference)
    best = (np.inf, estimate, (0.0, 0.0))
    offsets = np.arange(-1.0, 1.0 + substep / 2, substep)
    for fy in offsets:
        for fx in offsets:
            candidate = fourier_shift(estimate, dy + fy, dx + fx)
            denom = float((candidate * candidate).sum())
            if denom == 0.0:
                continue
            scale = float((candidate * reference).sum()) / denom
            error = np.linalg.norm(scale * candidate - reference) / ref_norm
            if error < best[0]:
                best = (error, scale * candidate, (dy + fy, dx + fx))
    error, aligned, shift = best
    return aligned, shift, float(error)


def write_frc_csv(curve: FrcCurve, path) -> None:
    """Export a curve as CSV with columns ring, n_r, frc, threshold."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["ring", "n_r", "frc", "threshold"])
        for ring, count, value, threshold in zip(
            curve.rings, curve.counts, curve.correlation, curve.threshold
        ):
            writer.writerow([int(ring), int(count), repr(float(value)), repr(float(threshold))])


def read_frc_csv(path) -> dict[str, np.ndarray]:
    """Load the columns written by :func:`write_frc_csv`."""
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    return {
        "ring": np.array([int(r["ring"]) for r in rows]),
        "n_r": np.array([int(r["n_r"]) for r in rows]),
        "frc": np.array([float(r["frc"]) for r in rows]),
        "threshold": np.array([float(r["threshold"]) for r in rows]),
    }
