"""Blind multi-frame deconvolution driver.

Each iteration runs four steps over a stack of frames of one object:

1. per-subsection weighted multi-frame deconvolution of all frames,
   combined into a full object by overlap-add;
2. projection of the object onto the feasible set (nonnegative, unit mass);
3. per-(subsection, frame) local PSF estimation by single-frame
   deconvolution against the apodized object, once with the working
   apodization width and once with a wider one (the complementary
   estimate);
4. projection of both PSF estimates onto the feasible set (nonnegative,
   unit mass, adaptive disk support) and the isoplanatism weight update.

Weights computed in step 4 of iteration k drive step 1 of iteration
k+1; the first object step runs with delta PSFs and uniform weights and
therefore reproduces the pixel-wise average of the frames.

Subsections are independent within steps 1 and 3-4 and may be processed
by worker threads; results are merged in fixed tile order, so outputs
are identical for any thread count.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DeconvError, IterationError
from .filters import WeightTable, weighted_multiframe
from .psf import (
    ApodizationKernel,
    IsoplanatismParams,
    LocalPsfSet,
    apodization_kernel,
    apodized_reciprocal,
    compute_weight,
    project_object,
    project_psf,
)
from .spectral import dft2, idft2, to_centered
from .tiling import TileGrid, build_grid, synthesize_object

__all__ = [
    "DeconvConfig",
    "DeconvState",
    "RunResult",
    "OnlineStep",
    "as_stack",
    "initialize",
    "iterate",
    "run",
    "run_online",
]


@dataclass(frozen=True)
class DeconvConfig:
    """Run parameters.

    Defaults follow the operating point used throughout the test suite
    for 256 x 256 stacks; smaller problems want proportionally smaller
    tile counts and apodization widths.
    """

    iterations: int = 30
    tiles: tuple[int, int] = (7, 7)
    support_radius: int = 6
    apod_width: float = 35.0
    apod_width_delta: float = 14.0
    epsilon: float = 10.0**-4.4
    sensitivity: float = 1.5
    weight_cap: float = 1e12
    online_window: int | None = None
    uniform_weights: bool = False

    def validation_errors(self, shape=None, n_frames=None) -> list[str]:
        """All configuration problems, not just the first one found."""
        errors = []
        if self.iterations < 1:
            errors.append(f"iterations must be >= 1, got {self.iterations}")
        p, q = self.tiles
        if p < 1 or q < 1:
            errors.append(f"tile counts must be >= 1, got {p} x {q}")
        if self.support_radius < 1:
            errors.append(f"support radius must be >= 1, got {self.support_radius}")
        if not self.apod_width > 0:
            errors.append(f"apodization width must be > 0, got {self.apod_width}")
        if not self.apod_width_delta > 0:
            errors.append(
                f"apodization width delta must be > 0, got {self.apod_width_delta}"
            )
        if not self.epsilon > 0:
            errors.append(f"epsilon must be > 0, got {self.epsilon}")
        if not self.sensitivity > 0:
            errors.append(f"sensitivity must be > 0, got {self.sensitivity}")
        if not (np.isfinite(self.weight_cap) and self.weight_cap > 0):
            errors.append(f"weight cap must be finite and > 0, got {self.weight_cap}")
        if self.online_window is not None and self.online_window < 1:
            errors.append(f"online window must be >= 1, got {self.online_window}")
        if shape is not None:
            m, n = shape
            if m < 2 * p or n < 2 * q:
                errors.append(f"image {m} x {n} too small for a {p} x {q} grid")
            if self.support_radius > (min(m, n) - 1) // 2:
                errors.append(
                    f"support radius {self.support_radius} does not fit {m} x {n} frames"
                )
        if n_frames is not None and self.online_window is not None:
            if self.online_window > n_frames:
                errors.append(
                    f"online window {self.online_window} exceeds stack size {n_frames}"
                )
        return errors

    def validate(self, shape=None, n_frames=None) -> None:
        errors = self.validation_errors(shape, n_frames)
        if errors:
            raise ValueError("invalid configuration: " + "; ".join(errors))

    def isoplanatism(self) -> IsoplanatismParams:
        return IsoplanatismParams(sensitivity=self.sensitivity, cap=self.weight_cap)


@dataclass
class DeconvState:
    """Mutable algorithm state between iterations."""

    iteration: int
    obj: np.ndarray
    psfs: LocalPsfSet
    weights: WeightTable
    diagnostics: list = field(default_factory=list)


@dataclass
class RunResult:
    obj: np.ndarray
    psfs: LocalPsfSet
    weights: WeightTable
    diagnostics: list
    grid: TileGrid
    config: DeconvConfig


@dataclass
class OnlineStep:
    """Result of one moving-window step: frames [start, start + window)."""

    start_frame: int
    obj: np.ndarray
    diagnostics: dict


def as_stack(frames) -> np.ndarray:
    """Validate a stack of frames and return it as an (S, M, N) array."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise ValueError(f"expected a stack of 2-D frames, got shape {arr.shape}")
    if arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"empty frame axes in shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("frames contain non-finite values")
    if (arr < 0).any():
        raise ValueError("frames must be nonnegative intensities")
    return arr


class _Workspace:
    """Preprocessed constants shared across iterations: the tile grid,
    apodization kernels, and frame spectra."""

    def __init__(self, frames: np.ndarray, cfg: DeconvConfig):
        s, m, n = frames.shape
        self.grid = build_grid(m, n, *cfg.tiles)
        self.spectra = np.stack([dft2(f) for f in frames])
        p_tiles, q_tiles = cfg.tiles
        self.apod: list[list[ApodizationKernel]] = [
            [apodization_kernel(self.grid, p, q, cfg.apod_width) for q in range(q_tiles)]
            for p in range(p_tiles)
        ]
        wide = cfg.apod_width + cfg.apod_width_delta
        self.apod_wide = [
            [apodization_kernel(self.grid, p, q, wide) for q in range(q_tiles)]
            for p in range(p_tiles)
        ]

    def slide(self, new_frame: np.ndarray) -> None:
        self.spectra[:-1] = self.spectra[1:]
        self.spectra[-1] = dft2(new_frame)


def _tile_map(fn, tiles, pool):
    indices = [(p, q) for p in range(tiles[0]) for q in range(tiles[1])]
    if pool is None:
        for pq in indices:
            fn(pq)
    else:
        # list() propagates the first worker exception
        list(pool.map(fn, indices))


def initialize(frames, cfg: DeconvConfig) -> DeconvState:
    """Delta PSFs, uniform weights, and the projected frame average."""
    frames = as_stack(frames)
    s, m, n = frames.shape
    cfg.validate(shape=(m, n))
    psfs = LocalPsfSet.deltas(cfg.tiles, s, (m, n), cfg.support_radius)
    weights = WeightTable.uniform(cfg.tiles, s)
    obj = project_object(frames.mean(axis=0))
    return DeconvState(iteration=0, obj=obj, psfs=psfs, weights=weights)


def iterate(state: DeconvState, frames, cfg: DeconvConfig, *,
            threads: int = 1, workspace: _Workspace | None = None) -> DeconvState:
    """One full four-step iteration; returns a new state.

    On a collapse failure the input state is left untouched and an
    IterationError carrying it (plus tile/frame context) is raised.
    """
    frames = as_stack(frames)
    if workspace is None:
        workspace = _Workspace(frames, cfg)
    n_frames = frames.shape[0]
    grid = workspace.grid
    p_tiles, q_tiles = grid.tiles
    params = cfg.isoplanatism()
    started = time.perf_counter()

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        # (1) weighted multi-frame deconvolution per subsection
        local_objects = np.empty((p_tiles, q_tiles) + grid.shape)

        def object_job(pq):
            p, q = pq
            otfs = np.stack([state.psfs.spectrum(p, q, s) for s in range(n_frames)])
            local_objects[p, q] = weighted_multiframe(
                workspace.spectra, otfs, state.weights.row(p, q), cfg.epsilon
            )

        new_psfs = LocalPsfSet(cfg.tiles, n_frames, grid.shape, cfg.support_radius)
        new_weights = np.empty((p_tiles, q_tiles, n_frames))

        try:
            _tile_map(object_job, grid.tiles, pool)

            # (2) overlap-add synthesis and object projection
            new_obj = project_object(synthesize_object(local_objects, grid))

            # (3) + (4) local PSF estimation, projection, weight update
            def psf_job(pq):
                p, q = pq
                recip = apodized_reciprocal(new_obj, workspace.apod[p][q], cfg.epsilon)
                recip_wide = apodized_reciprocal(
                    new_obj, workspace.apod_wide[p][q], cfg.epsilon
                )
                for s in range(n_frames):
                    try:
                        estimate = to_centered(idft2(workspace.spectra[s] * recip).real)
                        comp_estimate = to_centered(
                            idft2(workspace.spectra[s] * recip_wide).real
                        )
                        psf, center = project_psf(estimate, cfg.support_radius)
                        comp, comp_center = project_psf(comp_estimate, cfg.support_radius)
                    except DeconvError as err:
                        raise IterationError(
                            f"PSF update failed for tile ({p}, {q}), frame {s}: {err}",
                            tile=(p, q), frame=s,
                        ) from err
                    new_psfs.store(p, q, s, psf, center, comp, comp_center)
                    new_weights[p, q, s] = compute_weight(psf, comp, params)

            _tile_map(psf_job, grid.tiles, pool)
        except DeconvError as err:
            if isinstance(err, IterationError):
                err.iteration = state.iteration + 1
                err.state = state
                raise
            raise IterationError(
                f"iteration {state.iteration + 1} failed: {err}",
                iteration=state.iteration + 1, state=state,
            ) from err
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    if cfg.uniform_weights:
        new_weights[:] = 1.0
    denom = np.linalg.norm(state.obj)
    change = float(np.linalg.norm(new_obj - state.obj) / denom) if denom > 0 else np.inf
    record = {
        "iteration": state.iteration + 1,
        "object_change": change,
        "weight_min": float(new_weights.min()),
        "weight_median": float(np.median(new_weights)),
        "weight_max": float(new_weights.max()),
        "duration_s": time.perf_counter() - started,
    }
    return DeconvState(
        iteration=state.iteration + 1,
        obj=new_obj,
        psfs=new_psfs,
        weights=WeightTable(new_weights),
        diagnostics=state.diagnostics + [record],
    )


def run(frames, cfg: DeconvConfig, *, threads: int = 1, progress=None) -> RunResult:
    """Initialize and iterate ``cfg.iterations`` times over the stack."""
    frames = as_stack(frames)
    cfg.validate(shape=frames.shape[1:], n_frames=frames.shape[0])
    workspace = _Workspace(frames, cfg)
    state = initialize(frames, cfg)
    for _ in range(cfg.iterations):
        state = iterate(state, frames, cfg, threads=threads, workspace=workspace)
        if progress is not None:
            progress(state.iteration, state.diagnostics[-1])
    return RunResult(
        obj=state.obj,
        psfs=state.psfs,
        weights=state.weights,
        diagnostics=state.diagnostics,
        grid=workspace.grid,
        config=cfg,
    )


def run_online(frames, cfg: DeconvConfig, *, threads: int = 1, progress=None):
    """Moving-window processing: step k runs one iteration over frames
    [k, k + window), carrying the object and the PSFs of retained frames
    forward.

    The frame entering the window starts from a delta PSF with weight 0,
    so it sits out the object step until its first real PSF estimate
    lands (a delta OTF passes the raw frame through at full band and
    would otherwise drag the object back toward the blurred input on
    every slide); afterwards it carries its own isoplanatism weight.

    Returns a generator of :class:`OnlineStep`.  The first ``window``
    frames are consumed eagerly so a too-short stream fails fast.
    """
    window = cfg.online_window
    if window is None or window < 2:
        raise ValueError(f"online mode needs a window of >= 2 frames, got {window}")
    stream = iter(frames)
    first = []
    for _ in range(window):
        try:
            first.append(np.asarray(next(stream), dtype=np.float64))
        except StopIteration:
            raise ValueError(
                f"stream ended after {len(first)} frames; window needs {window}"
            ) from None
    current = as_stack(np.stack(first))
    cfg.validate(shape=current.shape[1:], n_frames=window)

    def steps():
        workspace = _Workspace(current, cfg)
        state = initialize(current, cfg)
        buffer = current
        start = 0
        while True:
            state_new = iterate(state, buffer, cfg, threads=threads, workspace=workspace)
            step = OnlineStep(
                start_frame=start,
                obj=state_new.obj,
                diagnostics=state_new.diagnostics[-1] | {"start_frame": start},
            )
            if progress is not None:
                progress(start, step.diagnostics)
            yield step

            nxt = next(stream, None)
            if nxt is None:
                return
            new_frame = as_stack(np.asarray(nxt, dtype=np.float64)[None])[0]
            if new_frame.shape != buffer.shape[1:]:
                raise ValueError(
                    f"frame {start + window} has shape {new_frame.shape}, "
                    f"expected {buffer.shape[1:]}"
                )
            buffer = np.concatenate([buffer[1:], new_frame[None]])
            workspace.slide(new_frame)
            state_new.psfs.drop_first_frame()
            w = state_new.weights.values
            w[:, :, :-1] = w[:, :, 1:]
            w[:, :, -1] = 0.0
            state = replace(state_new, weights=WeightTable(w))
            start += 1

    return steps()
