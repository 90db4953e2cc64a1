"""2-D DFT helpers, the centered-kernel convention, and direct-space
convolution oracles.

Conventions used throughout the package:

* Images are real 2-D float64 arrays of shape (M, N).
* Spectra are complex128 arrays of the same shape, produced by the
  unnormalized forward DFT (``numpy.fft.fft2``); ``idft2`` applies the
  1/(M*N) factor so the round trip is the identity.
* Kernels (PSFs) are stored full image size with their origin at the
  center pixel (M//2, N//2).  ``kernel_spectrum`` moves the center to
  index (0, 0) before transforming, so a centered delta has a spectrum
  of exactly 1 everywhere and acts as the identity under convolution.
* All convolutions are circular (periodic boundaries), which makes the
  direct-space and spectral paths exactly equivalent.
"""

import numpy as np

__all__ = [
    "as_image",
    "center_index",
    "centered_delta",
    "dft2",
    "idft2",
    "to_origin",
    "to_centered",
    "kernel_spectrum",
    "convolve_direct",
    "convolve_spectral",
    "convolve_anisoplanatic",
]


def as_image(values) -> np.ndarray:
    """Validate and convert to a 2-D float64 image array.

    Raises ValueError for wrong rank, empty axes, or non-finite values.
    """
    img = np.asarray(values, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"empty image axes in shape {img.shape}")
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite values")
    return img


def center_index(shape) -> tuple[int, int]:
    """Origin pixel of a centered kernel: (M//2, N//2)."""
    return shape[0] // 2, shape[1] // 2


def centered_delta(shape) -> np.ndarray:
    """Unit impulse at the center pixel; the identity kernel."""
    delta = np.zeros(shape, dtype=np.float64)
    delta[center_index(shape)] = 1.0
    return delta


def dft2(img) -> np.ndarray:
    """Unnormalized forward 2-D DFT of a real image."""
    return np.fft.fft2(as_image(img))


def idft2(spectrum) -> np.ndarray:
    """Inverse 2-D DFT (applies the 1/(M*N) normalization).

    Returns the complex array; callers take ``.real`` when the result is
    known to be a real image.
    """
    return np.fft.ifft2(np.asarray(spectrum, dtype=np.complex128))


def to_origin(kernel: np.ndarray) -> np.ndarray:
    """Shift a centered kernel so its center pixel lands at index (0, 0)."""
    return np.fft.ifftshift(kernel)


def to_centered(kernel: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_origin`: move the origin pixel back to center."""
    return np.fft.fftshift(kernel)


def kernel_spectrum(kernel) -> np.ndarray:
    """Spectrum (OTF) of a centered kernel.

    The half-size circular shift maps the center pixel to the origin, so
    a centered delta transforms to an all-ones spectrum.
    """
    kernel = as_image(kernel)
    return np.fft.fft2(to_origin(kernel))


def convolve_spectral(obj, kernel) -> np.ndarray:
    """Circular convolution with a centered kernel via the DFT product."""
    obj = as_image(obj)
    if obj.shape != np.shape(kernel):
        raise ValueError(f"shape mismatch: object {obj.shape}, kernel {np.shape(kernel)}")
    return idft2(dft2(obj) * kernel_spectrum(kernel)).real


def convolve_direct(obj, kernel) -> np.ndarray:
    """Circular convolution with a centered kernel by direct summation.

    Accumulates shifted copies of the object weighted by the kernel, in
    row-major kernel order.  O(M*N*nnz(kernel)); intended as a slow
    reference path, exact up to rounding against :func:`convolve_spectral`.
    """
    obj = as_image(obj)
    kernel = as_image(kernel)
    if obj.shape != kernel.shape:
        raise ValueError(f"shape mismatch: object {obj.shape}, kernel {kernel.shape}")
    k0 = to_origin(kernel)
    out = np.zeros_like(obj)
    for du, dv in zip(*np.nonzero(k0)):
        out += k0[du, dv] * np.roll(obj, (du, dv), axis=(0, 1))
    return out


def convolve_anisoplanatic(obj, psf_at, *, check_normalized: bool = True) -> np.ndarray:
    """Space-variant blur: each source pixel spreads through its own PSF.

    ``psf_at(k, l)`` must return the centered kernel attached to source
    pixel (k, l); the output accumulates, with periodic wrapping,

        out[m, n] = sum_{k,l} obj[k, l] * psf_at(k, l)[center + (m-k, n-l)]

    When ``psf_at`` is constant this equals :func:`convolve_direct`.
    Each per-pixel PSF must be nonnegative with unit sum (checked unless
    ``check_normalized`` is False).
    """
    obj = as_image(obj)
    m, n = obj.shape
    c0, c1 = center_index(obj.shape)
    out = np.zeros_like(obj)
    for k in range(m):
        for l in range(n):
            if obj[k, l] == 0.0:
                continue
            psf = np.asarray(psf_at(k, l), dtype=np.float64)
            if psf.shape != obj.shape:
                raise ValueError(
                    f"per-pixel PSF at ({k}, {l}) has shape {psf.shape}, expected {obj.shape}"
                )
            if check_normalized:
                if (psf < 0).any() or abs(psf.sum() - 1.0) > 1e-8:
                    raise ValueError(
                        f"per-pixel PSF at ({k}, {l}) is not a normalized intensity kernel"
                    )
            out += obj[k, l] * np.roll(psf, (k - c0, l - c1), axis=(0, 1))
    return out
