"""Synthetic space-variant blur generator.

The spatially varying PSF is modeled by an A x B grid of anchor
kernels spanning the image; the PSF attached to a source pixel is the
bilinear interpolation of the four surrounding anchors.  Because the
interpolation weights are separable in the source coordinates, the blur
decomposes exactly into one circular convolution per anchor,

    blurred = sum_ab conv(object * weight_ab, anchor_ab),

so frames of any size are produced with FFTs while remaining bin-exact
against the direct space-variant summation.

Anchor kernels default to randomized Gaussian blobs: random width,
random sub-pixel translation (which produces image morph), and an
optional random binary mask for irregular shapes.  All randomness is
driven by seeds, and Gaussian readout noise is drawn as
sigma * standard_normal so stacks generated with equal seeds but
different noise levels share everything except the noise scale.
"""

from dataclasses import dataclass, field

import numpy as np

from .spectral import as_image, center_index, dft2, idft2, kernel_spectrum

__all__ = [
    "NoiseModel",
    "PsfField",
    "make_psf_field",
    "blur_frame",
    "make_stack",
    "StackResult",
    "gaussian_psf",
    "random_psf",
    "scattered_psf",
    "random_field",
    "make_test_object",
]


@dataclass(frozen=True)
class NoiseModel:
    """Additive white Gaussian noise on a [0, 1]-ranged image."""

    sigma: float = 0.0
    seed: int | None = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    def sample(self, shape) -> np.ndarray:
        if self.sigma == 0.0:
            return np.zeros(shape)
        rng = np.random.default_rng(self.seed)
        return self.sigma * rng.standard_normal(shape)


def _hat_weights(length: int, n_anchors: int) -> np.ndarray:
    """1-D bilinear basis, shape (n_anchors, length): rows are the hat
    functions of anchors spaced uniformly from 0 to length-1; they sum
    to 1 at every position."""
    if n_anchors == 1:
        return np.ones((1, length))
    positions = np.linspace(0.0, length - 1.0, n_anchors)
    spacing = (length - 1.0) / (n_anchors - 1)
    x = np.arange(length, dtype=np.float64)
    return np.maximum(1.0 - np.abs(positions[:, None] - x[None, :]) / spacing, 0.0)


@dataclass(frozen=True)
class PsfField:
    """Bilinearly interpolated per-pixel PSF over an M x N image.

    ``anchors[a, b]`` is a full-size centered kernel (nonnegative, unit
    sum); the PSF at source pixel (k, l) is the convex combination of
    the anchors with the separable hat weights at (k, l).
    """

    shape: tuple[int, int]
    anchors: np.ndarray = field(repr=False)   # (A, B, M, N)
    row_weights: np.ndarray = field(repr=False)   # (A, M)
    col_weights: np.ndarray = field(repr=False)   # (B, N)

    def psf_at(self, k: int, l: int) -> np.ndarray:
        """Centered kernel attached to source pixel (k, l)."""
        w = self.row_weights[:, k][:, None] * self.col_weights[:, l][None, :]
        return np.tensordot(w, self.anchors, axes=2)

    def apply(self, obj) -> np.ndarray:
        """Space-variant blur of ``obj``, exact per-anchor evaluation."""
        obj = as_image(obj)
        if obj.shape != self.shape:
            raise ValueError(f"object shape {obj.shape} does not match field {self.shape}")
        total = np.zeros(self.shape, dtype=np.complex128)
        a_count, b_count = self.anchors.shape[:2]
        for a in range(a_count):
            for b in range(b_count):
                weight = self.row_weights[a][:, None] * self.col_weights[b][None, :]
                if not weight.any():
                    continue
                total += dft2(obj * weight) * kernel_spectrum(self.anchors[a, b])
        return idft2(total).real

    def is_constant(self) -> bool:
        first = self.anchors.reshape(-1, *self.shape)[0]
        return all(
            np.array_equal(first, anchor)
            for anchor in self.anchors.reshape(-1, *self.shape)[1:]
        )


def make_psf_field(anchors, shape) -> PsfField:
    """Build a field from an (A, B) grid of full-size centered anchors.

    Each anchor must be nonnegative with unit total mass, so every
    interpolated per-pixel PSF is again a normalized kernel.
    """
    m, n = shape
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.ndim != 4 or anchors.shape[2:] != (m, n):
        raise ValueError(
            f"anchors must have shape (A, B, {m}, {n}), got {anchors.shape}"
        )
    flat = anchors.reshape(-1, m, n)
    if (flat < 0).any():
        raise ValueError("anchor kernels must be nonnegative")
    sums = flat.sum(axis=(1, 2))
    if not np.allclose(sums, 1.0, atol=1e-8):
        raise ValueError("anchor kernels must each sum to 1")
    return PsfField(
        shape=(m, n),
        anchors=anchors,
        row_weights=_hat_weights(m, anchors.shape[0]),
        col_weights=_hat_weights(n, anchors.shape[1]),
    )


def blur_frame(obj, field: PsfField, noise: NoiseModel | None = None) -> np.ndarray:
    """One observed frame: space-variant blur plus additive noise.

    The result is not clamped; noise may push pixels slightly negative,
    as a raw sensor readout would.
    """
    obj = as_image(obj)
    if (obj < 0).any():
        raise ValueError("object must be nonnegative")
    frame = field.apply(obj)
    if noise is not None:
        frame = frame + noise.sample(obj.shape)
    return frame


@dataclass
class StackResult:
    """Frames plus the generation record needed to reproduce them."""

    frames: np.ndarray   # (S, M, N)
    fields: list
    sigma: float
    seed: int


def make_stack(obj, n_frames: int, field_gen=None, sigma: float = 0.0,
               seed: int = 0) -> StackResult:
    """Generate S frames of one object, each with its own random PSF
    field and independent noise.

    ``field_gen(frame_index, rng)`` must return the frame's PsfField;
    by default each frame gets :func:`random_field` with its own
    spawned generator.  Frame order, fields, and noise are fully
    determined by ``seed``.
    """
    obj = as_image(obj)
    if n_frames < 1:
        raise ValueError(f"need at least one frame, got {n_frames}")
    if field_gen is None:
        field_gen = lambda s, rng: random_field(obj.shape, rng)

    frames = np.empty((n_frames,) + obj.shape)
    fields = []
    children = np.random.SeedSequence(seed).spawn(n_frames)
    for s, child in enumerate(children):
        field_seq, noise_seq = child.spawn(2)
        field = field_gen(s, np.random.default_rng(field_seq))
        fields.append(field)
        frame = field.apply(obj)
        if sigma > 0:
            frame = frame + sigma * np.random.default_rng(noise_seq).standard_normal(obj.shape)
        frames[s] = frame
    return StackResult(frames=frames, fields=fields, sigma=float(sigma), seed=int(seed))


def gaussian_psf(shape, sigma: float, shift=(0.0, 0.0), support_radius: int = 6,
                 mask: np.ndarray | None = None) -> np.ndarray:
    """Full-size centered Gaussian blob kernel.

    The blob is centered ``shift`` pixels away from the array center
    (sub-pixel shifts allowed), truncated to the disk of
    ``support_radius`` around its own center, optionally multiplied by
    a binary mask, and normalized to unit mass.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    m, n = shape
    c0, c1 = center_index(shape)
    cy, cx = c0 + shift[0], c1 + shift[1]
    rows = (np.arange(m) - cy) ** 2
    cols = (np.arange(n) - cx) ** 2
    dist2 = rows[:, None] + cols[None, :]
    values = np.exp(-dist2 / (2.0 * sigma**2))
    values[dist2 > support_radius**2] = 0.0
    if mask is not None:
        values = values * mask
    total = values.sum()
    if not total > 0:
        raise ValueError("PSF prototype has no mass after masking")
    return values / total


def random_psf(shape, rng: np.random.Generator, sigma_range=(1.0, 3.0),
               shift_range=(0.0, 4.0), support_radius: int = 6,
               masked: bool = False) -> np.ndarray:
    """Randomized compact blob: random width, random translation drawn
    from ``shift_range`` pixels, and optionally a random binary mask."""
    sigma = rng.uniform(*sigma_range)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    amount = rng.uniform(*shift_range)
    shift = (amount * np.sin(angle), amount * np.cos(angle))
    mask = None
    if masked:
        mask = (rng.random(shape) > 0.35).astype(np.float64)
        # keep the blob's own center so the kernel cannot empty out
        c0, c1 = center_index(shape)
        mask[int(round(c0 + shift[0])), int(round(c1 + shift[1]))] = 1.0
    return gaussian_psf(shape, sigma, shift=shift, support_radius=support_radius, mask=mask)


def scattered_psf(shape, rng: np.random.Generator, support_radius: int = 4,
                  shift_range=(1.5, 3.0), lobe_radius=(0.8, 1.8),
                  lobe_sigma=(0.9, 1.4)) -> np.ndarray:
    """Markedly asymmetric compact kernel: three Gaussian lobes roughly
    120 degrees apart around a randomly translated center.

    The asymmetry puts structure into the OTF phase, so frames blurred
    with these kernels genuinely lose ring correlation against the
    ground truth (a symmetric blur would not, since ring correlation is
    insensitive to pure attenuation).
    """
    m, n = shape
    c0, c1 = center_index(shape)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    amount = rng.uniform(*shift_range)
    cy, cx = c0 + amount * np.sin(angle), c1 + amount * np.cos(angle)
    yy = np.arange(m)[:, None]
    xx = np.arange(n)[None, :]
    values = np.zeros(shape)
    base = rng.uniform(0.0, 2.0 * np.pi)
    for j in range(3):
        lobe_angle = base + j * (2.0 * np.pi / 3.0) + rng.uniform(-0.4, 0.4)
        lobe_dist = rng.uniform(*lobe_radius)
        ly = cy + lobe_dist * np.sin(lobe_angle)
        lx = cx + lobe_dist * np.cos(lobe_angle)
        sigma = rng.uniform(*lobe_sigma)
        values += rng.uniform(0.4, 1.0) * np.exp(
            -((yy - ly) ** 2 + (xx - lx) ** 2) / (2.0 * sigma**2)
        )
    dist2 = (yy - cy) ** 2 + (xx - cx) ** 2
    values[dist2 > support_radius**2] = 0.0
    return values / values.sum()


def random_field(shape, rng: np.random.Generator, anchors=(3, 3),
                 sigma_range=(1.0, 3.0), shift_range=(0.0, 4.0),
                 support_radius: int = 6, masked: bool = False) -> PsfField:
    """Random anchor grid -> smoothly varying blur with morph."""
    a_count, b_count = anchors
    grid = np.empty((a_count, b_count) + tuple(shape))
    for a in range(a_count):
        for b in range(b_count):
            grid[a, b] = random_psf(
                shape, rng, sigma_range=sigma_range, shift_range=shift_range,
                support_radius=support_radius, masked=masked,
            )
    return make_psf_field(grid, shape)


def _lowpass_noise(shape, rng: np.random.Generator, cutoff: float) -> np.ndarray:
    noise = rng.random(shape)
    m, n = shape
    fy = np.fft.fftfreq(m)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    keep = np.exp(-(fy**2 + fx**2) / (2.0 * cutoff**2))
    out = idft2(dft2(noise) * keep).real
    out -= out.min()
    peak = out.max()
    return out / peak if peak > 0 else out


def make_test_object(shape, seed: int = 0, background: float = 0.05) -> np.ndarray:
    """Synthetic ground-truth scene in [background, 1].

    Mixes a band-limited random texture with Gaussian bumps and a few
    hard-edged blocks, so the spectrum is broad and the scene is
    nowhere sparse (a nonzero background keeps every region estimable).
    """
    m, n = shape
    rng = np.random.default_rng(seed)
    img = 0.6 * _lowpass_noise(shape, rng, cutoff=0.06)

    yy = np.arange(m)[:, None]
    xx = np.arange(n)[None, :]
    for _ in range(6):
        cy, cx = rng.uniform(0.15, 0.85) * m, rng.uniform(0.15, 0.85) * n
        width = rng.uniform(0.03, 0.10) * min(m, n)
        amp = rng.uniform(0.3, 0.9)
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * width**2))
    for _ in range(3):
        top, left = rng.integers(0, m - m // 4), rng.integers(0, n - n // 4)
        height = int(rng.integers(m // 16 + 1, m // 4))
        width = int(rng.integers(n // 16 + 1, n // 4))
        img[top : top + height, left : left + width] += rng.uniform(0.2, 0.5)

    img -= img.min()
    img /= img.max()
    return background + (1.0 - background) * img
