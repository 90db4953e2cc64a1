"""Blind multi-frame deconvolution of space-variant blur.

Restores one object from a stack of differently blurred frames by
alternating weighted multi-frame Wiener deconvolution on overlapping
subsections with local PSF estimation under adaptive support
constraints.  Includes a synthetic space-variant blur simulator and
FRC/SSIM evaluation tools.
"""

from .driver import (
    DeconvConfig,
    DeconvState,
    OnlineStep,
    RunResult,
    as_stack,
    initialize,
    iterate,
    run,
    run_online,
)
from .exceptions import (
    DeconvError,
    IterationError,
    ObjectCollapseError,
    PsfCollapseError,
)
from .filters import (
    WeightTable,
    multiframe_wiener,
    thresholded_divide,
    weighted_multiframe,
    wiener,
)
from .metrics import (
    FrcCurve,
    SsimParams,
    align_to,
    fourier_shift,
    frc,
    rn_max,
    ssim,
    two_sigma_curve,
)
from .psf import (
    ApodizationKernel,
    IsoplanatismParams,
    LocalPsfSet,
    apodization_kernel,
    compute_weight,
    estimate_local_psf,
    project_object,
    project_psf,
)
from .simulate import (
    NoiseModel,
    PsfField,
    blur_frame,
    gaussian_psf,
    make_psf_field,
    make_stack,
    make_test_object,
    random_field,
    random_psf,
    scattered_psf,
)
from .spectral import (
    centered_delta,
    convolve_anisoplanatic,
    convolve_direct,
    convolve_spectral,
    dft2,
    idft2,
    kernel_spectrum,
)
from .tiling import TileGrid, build_grid, synthesize_object

__version__ = "0.1.0"
